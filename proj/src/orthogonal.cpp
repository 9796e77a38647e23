#include "ape/orthogonal.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ape {

namespace {

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() < 1) {
        std::ostringstream os;
        os << what << " must be a non-empty square matrix, got " << m.rows() << "x" << m.cols();
        throw Error(ErrorCode::DimensionError, os.str());
    }
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::InvalidParameter, std::string(what) + " has non-finite entries");
    }
}

}  // namespace

GeneratorParam::GeneratorParam(Matrix entries) : entries_(std::move(entries)) {
    require_square(entries_, "generator parameter");
    require_finite(entries_, "generator parameter");
}

GeneratorParam GeneratorParam::zero(Index dim) { return GeneratorParam(Matrix::Zero(dim, dim)); }

SkewSymmetric::SkewSymmetric(Matrix entries) : entries_(std::move(entries)) {
    require_square(entries_, "skew-symmetric matrix");
    require_finite(entries_, "skew-symmetric matrix");
    for (Index i = 0; i < entries_.rows(); ++i) {
        for (Index j = i; j < entries_.cols(); ++j) {
            if (entries_(i, j) != -entries_(j, i)) {
                throw Error(ErrorCode::InvalidParameter, "matrix is not exactly skew-symmetric");
            }
        }
    }
}

SkewSymmetric SkewSymmetric::from_antisymmetric_part(const Matrix& m) {
    require_square(m, "matrix");
    return SkewSymmetric(Matrix((m - m.transpose()) * 0.5));
}

SkewSymmetric SkewSymmetric::zero(Index dim) { return SkewSymmetric(Matrix::Zero(dim, dim)); }

OrthogonalMatrix::OrthogonalMatrix(Matrix entries, double tolerance_per_dim)
    : entries_(std::move(entries)) {
    require_square(entries_, "orthogonal matrix");
    require_finite(entries_, "orthogonal matrix");
    const double defect = orthogonality_defect(entries_);
    const double bound = tolerance_per_dim * static_cast<double>(entries_.rows());
    if (!(defect <= bound)) {
        std::ostringstream os;
        os << "orthogonality defect " << defect << " exceeds " << bound;
        throw Error(ErrorCode::NotOrthogonal, os.str());
    }
}

OrthogonalMatrix OrthogonalMatrix::identity(Index dim) {
    return OrthogonalMatrix(Matrix::Identity(dim, dim), Unchecked{});
}

OrthogonalMatrix OrthogonalMatrix::transpose() const {
    return OrthogonalMatrix(Matrix(entries_.transpose()), Unchecked{});
}

double orthogonality_defect(const Matrix& m) {
    require_square(m, "matrix");
    return (m.transpose() * m - Matrix::Identity(m.rows(), m.cols())).norm();
}

SkewSymmetric skew_symmetrize(const GeneratorParam& param) {
    const Matrix& a = param.entries();
    return SkewSymmetric(Matrix(a - a.transpose()));
}

GeneratorParam fit_skew_parameter(const SkewSymmetric& b) {
    Matrix a = b.entries().triangularView<Eigen::StrictlyUpper>();
    return GeneratorParam(std::move(a));
}

Matrix expm(const Matrix& a) {
    require_square(a, "matrix");
    require_finite(a, "matrix");
    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    static constexpr double theta13 = 5.371920351148152;

    const Index n = a.rows();
    // The Pade solve is off by an ulp at zero; keep exp(0) = I exact.
    if (a.isZero(0.0)) return Matrix::Identity(n, n);
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    }
    const Matrix as = a * std::ldexp(1.0, -squarings);
    const Matrix id = Matrix::Identity(n, n);
    const Matrix a2 = as * as;
    const Matrix a4 = a2 * a2;
    const Matrix a6 = a4 * a2;

    const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                           b[3] * a2 + b[1] * id;
    const Matrix u = as * u_inner;
    const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                     b[2] * a2 + b[0] * id;

    Matrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        r = (r * r).eval();
    }
    return r;
}

OrthogonalMatrix matrix_exp(const SkewSymmetric& b) { return OrthogonalMatrix(expm(b.entries())); }

Matrix matrix_exp_frechet(const Matrix& b, const Matrix& direction) {
    require_square(b, "base point");
    if (direction.rows() != b.rows() || direction.cols() != b.cols()) {
        throw Error(ErrorCode::DimensionError, "direction must match the base point dimension");
    }
    const Index n = b.rows();
    Matrix block = Matrix::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = b;
    block.bottomRightCorner(n, n) = b;
    block.topRightCorner(n, n) = direction;
    return expm(block).topRightCorner(n, n);
}

Matrix matrix_exp_frechet(const SkewSymmetric& b, const Matrix& direction) {
    return matrix_exp_frechet(b.entries(), direction);
}

OrthogonalMatrix generator_from_param(const GeneratorParam& param) {
    return matrix_exp(skew_symmetrize(param));
}

Matrix planar_rotation(double angle) {
    Matrix r(2, 2);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    r << c, -s, s, c;
    return r;
}

CanonicalForm::CanonicalForm(OrthogonalMatrix basis, std::vector<CanonicalBlock> blocks)
    : basis_(std::move(basis)), blocks_(std::move(blocks)) {
    Index total = 0;
    for (const auto& block : blocks_) total += block.size();
    if (total != basis_.dim()) {
        throw Error(ErrorCode::DimensionError, "canonical blocks do not cover the basis dimension");
    }
}

Matrix CanonicalForm::block_matrix() const {
    const Index d = basis_.dim();
    Matrix q = Matrix::Zero(d, d);
    Index at = 0;
    for (const auto& block : blocks_) {
        switch (block.kind) {
            case CanonicalBlock::Kind::Rotation: q.block(at, at, 2, 2) = planar_rotation(block.angle); break;
            case CanonicalBlock::Kind::Fixed: q(at, at) = 1.0; break;
            case CanonicalBlock::Kind::Flip: q(at, at) = -1.0; break;
        }
        at += block.size();
    }
    return q;
}

Matrix CanonicalForm::reconstruct() const {
    const Matrix& p = basis_.entries();
    return p * block_matrix() * p.transpose();
}

double CanonicalForm::determinant() const {
    double det = 1.0;
    for (const auto& block : blocks_) det *= block.determinant();
    return det;
}

int CanonicalForm::flip_count() const {
    return static_cast<int>(std::count_if(blocks_.begin(), blocks_.end(), [](const CanonicalBlock& b) {
        return b.kind == CanonicalBlock::Kind::Flip;
    }));
}

CanonicalForm CanonicalForm::paired() const {
    const Matrix& p = basis_.entries();
    const Index d = p.rows();

    std::vector<Index> rotation_columns;
    std::vector<double> rotation_angles;
    std::vector<Index> fixed_columns;
    std::vector<Index> flip_columns;
    Index at = 0;
    for (const auto& block : blocks_) {
        switch (block.kind) {
            case CanonicalBlock::Kind::Rotation:
                rotation_columns.push_back(at);
                rotation_columns.push_back(at + 1);
                rotation_angles.push_back(block.angle);
                break;
            case CanonicalBlock::Kind::Fixed: fixed_columns.push_back(at); break;
            case CanonicalBlock::Kind::Flip: flip_columns.push_back(at); break;
        }
        at += block.size();
    }

    Matrix reordered(d, d);
    std::vector<CanonicalBlock> blocks;
    Index out = 0;
    auto take = [&](Index column) { reordered.col(out++) = p.col(column); };

    for (std::size_t i = 0; i < rotation_angles.size(); ++i) {
        take(rotation_columns[2 * i]);
        take(rotation_columns[2 * i + 1]);
        blocks.push_back(CanonicalBlock::rotation(rotation_angles[i]));
    }
    for (std::size_t i = 0; i + 1 < fixed_columns.size(); i += 2) {
        take(fixed_columns[i]);
        take(fixed_columns[i + 1]);
        blocks.push_back(CanonicalBlock::rotation(0.0));
    }
    for (std::size_t i = 0; i + 1 < flip_columns.size(); i += 2) {
        take(flip_columns[i]);
        take(flip_columns[i + 1]);
        blocks.push_back(CanonicalBlock::rotation(std::numbers::pi));
    }
    if (fixed_columns.size() % 2 == 1) {
        take(fixed_columns.back());
        blocks.push_back(CanonicalBlock::fixed());
    }
    if (flip_columns.size() % 2 == 1) {
        take(flip_columns.back());
        blocks.push_back(CanonicalBlock::flip());
    }
    return CanonicalForm(OrthogonalMatrix(std::move(reordered)), std::move(blocks));
}

CanonicalForm canonical_form(const OrthogonalMatrix& w) {
    const Index d = w.dim();
    Eigen::RealSchur<Matrix> schur(w.entries(), true);
    if (schur.info() != Eigen::Success) {
        throw Error(ErrorCode::DecompositionFailed, "real Schur iteration did not converge");
    }
    const Matrix& t = schur.matrixT();
    Matrix p = schur.matrixU();

    std::vector<CanonicalBlock> blocks;
    Index i = 0;
    while (i < d) {
        if (i + 1 < d && t(i + 1, i) != 0.0) {
            // A normal 2x2 block with complex eigenvalues is a rotation; take the
            // angle of the nearest rotation and flip its sign by swapping columns.
            const double angle = std::atan2(t(i + 1, i) - t(i, i + 1), t(i, i) + t(i + 1, i + 1));
            if (angle < 0.0) {
                p.col(i).swap(p.col(i + 1));
                blocks.push_back(CanonicalBlock::rotation(-angle));
            } else {
                blocks.push_back(CanonicalBlock::rotation(angle));
            }
            i += 2;
        } else {
            blocks.push_back(t(i, i) < 0.0 ? CanonicalBlock::flip() : CanonicalBlock::fixed());
            i += 1;
        }
    }

    CanonicalForm form(OrthogonalMatrix(std::move(p)), std::move(blocks));
    const double residual = (form.reconstruct() - w.entries()).norm();
    if (!(residual <= kReconstructionTolerance)) {
        std::ostringstream os;
        os << "canonical form reconstruction residual " << residual;
        throw Error(ErrorCode::DecompositionFailed, os.str());
    }
    return form;
}

SkewSymmetric matrix_log_orthogonal(const OrthogonalMatrix& w) {
    const CanonicalForm form = canonical_form(w).paired();
    if (form.flip_count() % 2 == 1) {
        throw Error(ErrorCode::NotSpecialOrthogonal, "determinant -1 has no real logarithm");
    }
    const Index d = w.dim();
    Matrix generator = Matrix::Zero(d, d);
    Index at = 0;
    for (const auto& block : form.blocks()) {
        if (block.kind == CanonicalBlock::Kind::Rotation) {
            // planar_rotation(a) = exp(a * [[0, -1], [1, 0]])
            generator(at, at + 1) = -block.angle;
            generator(at + 1, at) = block.angle;
        }
        at += block.size();
    }
    const Matrix& p = form.basis().entries();
    SkewSymmetric log = SkewSymmetric::from_antisymmetric_part(p * generator * p.transpose());

    const double residual = (expm(log.entries()) - w.entries()).norm();
    if (!(residual <= 1e-6)) {
        std::ostringstream os;
        os << "logarithm reconstruction residual " << residual;
        throw Error(ErrorCode::LogFailed, os.str());
    }
    return log;
}

}  // namespace ape
