#include "ape/rope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ape/random.hpp"

namespace ape {

void RotarySpec::validate() const {
    if (dim < 2 || dim % 2 != 0) throw Error(ErrorCode::DimensionError, "rotary encodings need an even dimension");
    if (static_cast<Index>(angles.size()) * 2 != dim) {
        std::ostringstream os;
        os << "expected " << dim / 2 << " angles, got " << angles.size();
        throw Error(ErrorCode::DimensionError, os.str());
    }
    for (double a : angles) {
        if (!std::isfinite(a)) throw Error(ErrorCode::InvalidParameter, "angles must be finite");
    }
}

RotarySpec RotarySpec::ladder(Index dim, double base) {
    RotarySpec spec;
    spec.dim = dim;
    for (Index i = 0; i < dim / 2; ++i) {
        spec.angles.push_back(std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dim)));
    }
    spec.validate();
    return spec;
}

Matrix rotation_block_matrix(const RotarySpec& spec) {
    spec.validate();
    Matrix c = Matrix::Zero(spec.dim, spec.dim);
    for (std::size_t i = 0; i < spec.angles.size(); ++i) {
        const auto at = static_cast<Index>(2 * i);
        c.block(at, at, 2, 2) = planar_rotation(spec.angles[i]);
    }
    return c;
}

RopeToApe rope_to_ape(const RotarySpec& spec) {
    const OrthogonalMatrix target(rotation_block_matrix(spec));
    bool ambiguous = false;
    for (double a : spec.angles) {
        const double wrapped = std::remainder(a, 2.0 * std::numbers::pi);
        if (std::abs(std::abs(wrapped) - std::numbers::pi) <= 1e-12) ambiguous = true;
    }
    GeneratorParam param = fit_skew_parameter(matrix_log_orthogonal(target));
    OrthogonalMatrix generator = generator_from_param(param);
    const double residual = (generator.entries() - target.entries()).norm();
    return RopeToApe{std::move(param), std::move(generator), ambiguous, residual};
}

ApeToRope ape_to_rope(const OrthogonalMatrix& w) {
    if (w.dim() % 2 != 0) throw Error(ErrorCode::DimensionError, "rotary form needs an even dimension");
    const CanonicalForm form = canonical_form(w).paired();
    if (form.flip_count() % 2 == 1) {
        throw Error(ErrorCode::NotSpecialOrthogonal, "a reflection has no rotary form");
    }
    RotarySpec rotary;
    rotary.dim = w.dim();
    for (const auto& block : form.blocks()) {
        // Even dimension with determinant +1 leaves no unpaired scalar blocks.
        rotary.angles.push_back(block.angle);
    }
    rotary.validate();
    const Matrix& p = form.basis().entries();
    const double residual = (p * rotation_block_matrix(rotary) * p.transpose() - w.entries()).norm();
    return ApeToRope{std::move(rotary), form.basis(), residual};
}

Matrix rotary_scores(const Matrix& q, const Matrix& k, const std::vector<double>& angles,
                     const std::vector<std::int64_t>& query_index, const std::vector<std::int64_t>& key_index) {
    const Index d = q.cols();
    if (k.cols() != d || static_cast<Index>(angles.size()) * 2 != d ||
        static_cast<Index>(query_index.size()) != q.rows() || static_cast<Index>(key_index.size()) != k.rows()) {
        throw Error(ErrorCode::DimensionError, "rotary score inputs have inconsistent shapes");
    }
    auto rotate = [&](const Matrix& rows, const std::vector<std::int64_t>& index) {
        Matrix out(rows.rows(), d);
        for (Index r = 0; r < rows.rows(); ++r) {
            const auto position = static_cast<double>(index[static_cast<std::size_t>(r)]);
            for (std::size_t b = 0; b < angles.size(); ++b) {
                const auto c0 = static_cast<Index>(2 * b);
                const double phi = position * angles[b];
                const double cs = std::cos(phi);
                const double sn = std::sin(phi);
                const double x = rows(r, c0);
                const double y = rows(r, c0 + 1);
                out(r, c0) = cs * x - sn * y;
                out(r, c0 + 1) = sn * x + cs * y;
            }
        }
        return out;
    };
    return rotate(q, query_index) * rotate(k, key_index).transpose();
}

double verify_equivalence(const AttentionBatch& batch, const OrthogonalMatrix& w, std::int64_t p_max) {
    batch.validate();
    const Index m = batch.queries.rows();
    const Index n = batch.keys.rows();
    if (w.dim() != batch.dim()) throw Error(ErrorCode::DimensionError, "generator dimension does not match d");
    if (p_max + 1 < std::max(m, n)) {
        throw Error(ErrorCode::InvalidParameter, "p_max must cover every query and key position");
    }

    const PositionTensor ladder = seq_powers(w, p_max);
    std::vector<AbsolutePosition> query_positions;
    std::vector<AbsolutePosition> key_positions;
    std::vector<std::int64_t> query_index;
    std::vector<std::int64_t> key_index;
    for (Index i = 0; i < m; ++i) {
        query_positions.emplace_back(SeqIndex{i});
        query_index.push_back(i);
    }
    for (Index j = 0; j < n; ++j) {
        key_positions.emplace_back(SeqIndex{j});
        key_index.push_back(j);
    }
    const Matrix ape = ape_scores_fast(batch, ladder.gather(query_positions), ladder.gather(key_positions));

    const ApeToRope rotary = ape_to_rope(w);
    const Matrix& p = rotary.basis.entries();
    const Matrix q = batch.queries * (batch.proj_q * p);
    const Matrix k = batch.keys * (batch.proj_k * p);
    const Matrix rope = rotary_scores(q, k, rotary.rotary.angles, query_index, key_index);
    return (ape - rope).cwiseAbs().maxCoeff();
}

GeneratorParam near_identity_param(Index dim, Rng& rng, double eps) {
    return GeneratorParam(rng.matrix(dim, dim, eps));
}

std::string angles_to_json(const std::vector<double>& angles) { return nlohmann::json(angles).dump(); }

std::vector<double> angles_from_json(const std::string& text) {
    try {
        const auto parsed = nlohmann::json::parse(text);
        if (!parsed.is_array()) throw Error(ErrorCode::ParseError, "angle list must be a JSON array");
        return parsed.get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("bad angle list: ") + e.what());
    }
}

}  // namespace ape
