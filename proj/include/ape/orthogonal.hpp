#pragma once

// Orthogonal generators from unconstrained parameters: A -> B = A - A^T -> exp(B),
// plus the inverse direction (logarithm, canonical form) used for rotary interop.

#include <Eigen/Dense>

#include <vector>

#include "ape/error.hpp"

namespace ape {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Orthogonality validation scale: a d x d matrix is accepted when its
/// defect is at most this value times d.
inline constexpr double kOrthogonalityTolerance = 1e-10;
inline constexpr double kReconstructionTolerance = 1e-8;

/// Unconstrained square parameter. Only the strict upper triangle influences
/// the generator; the remaining entries cancel in A - A^T.
class GeneratorParam {
public:
    explicit GeneratorParam(Matrix entries);

    static GeneratorParam zero(Index dim);

    Index dim() const { return entries_.rows(); }
    const Matrix& entries() const { return entries_; }

private:
    Matrix entries_;
};

class SkewSymmetric {
public:
    /// Accepts only matrices with m + m^T == 0 bit-exactly.
    explicit SkewSymmetric(Matrix entries);

    /// (m - m^T) / 2, which is exactly skew in floating point.
    static SkewSymmetric from_antisymmetric_part(const Matrix& m);
    static SkewSymmetric zero(Index dim);

    Index dim() const { return entries_.rows(); }
    const Matrix& entries() const { return entries_; }

private:
    Matrix entries_;
};

class OrthogonalMatrix {
public:
    /// Validates ||W^T W - I||_F <= tolerance_per_dim * d.
    explicit OrthogonalMatrix(Matrix entries, double tolerance_per_dim = kOrthogonalityTolerance);

    static OrthogonalMatrix identity(Index dim);

    Index dim() const { return entries_.rows(); }
    const Matrix& entries() const { return entries_; }
    double determinant() const { return entries_.determinant(); }

    OrthogonalMatrix transpose() const;

private:
    struct Unchecked {};
    OrthogonalMatrix(Matrix entries, Unchecked) : entries_(std::move(entries)) {}

    Matrix entries_;
};

/// One diagonal block of the canonical form. Rotation blocks are
/// [[cos a, -sin a], [sin a, cos a]].
struct CanonicalBlock {
    enum class Kind { Rotation, Fixed, Flip };

    Kind kind = Kind::Fixed;
    double angle = 0.0;

    static CanonicalBlock rotation(double angle) { return {Kind::Rotation, angle}; }
    static CanonicalBlock fixed() { return {Kind::Fixed, 0.0}; }
    static CanonicalBlock flip() { return {Kind::Flip, 0.0}; }

    Index size() const { return kind == Kind::Rotation ? 2 : 1; }
    double determinant() const { return kind == Kind::Flip ? -1.0 : 1.0; }
};

/// W = P * blockdiag(blocks) * P^T.
class CanonicalForm {
public:
    CanonicalForm(OrthogonalMatrix basis, std::vector<CanonicalBlock> blocks);

    const OrthogonalMatrix& basis() const { return basis_; }
    const std::vector<CanonicalBlock>& blocks() const { return blocks_; }

    Matrix block_matrix() const;
    Matrix reconstruct() const;
    double determinant() const;
    int flip_count() const;

    /// Same matrix, with basis columns reordered so that pairs of Fixed blocks
    /// become Rotation(0) and pairs of Flip blocks become Rotation(pi).
    /// Rotations come first; at most one Fixed and one Flip block remain.
    CanonicalForm paired() const;

private:
    OrthogonalMatrix basis_;
    std::vector<CanonicalBlock> blocks_;
};

/// ||M^T M - I||_F for a square matrix.
double orthogonality_defect(const Matrix& m);

SkewSymmetric skew_symmetrize(const GeneratorParam& param);

/// Strict upper triangle of B; skew_symmetrize of the result gives back B exactly.
GeneratorParam fit_skew_parameter(const SkewSymmetric& b);

/// Scaling and squaring with the degree-13 Pade approximant. Works for any
/// square matrix.
Matrix expm(const Matrix& a);

OrthogonalMatrix matrix_exp(const SkewSymmetric& b);

/// Directional derivative of exp at `b` along `direction`, read off the
/// top-right block of exp([[B, E], [0, B]]).
Matrix matrix_exp_frechet(const Matrix& b, const Matrix& direction);
Matrix matrix_exp_frechet(const SkewSymmetric& b, const Matrix& direction);

/// Real Schur based decomposition; rotation angles lie in [0, pi].
CanonicalForm canonical_form(const OrthogonalMatrix& w);

/// Principal logarithm of a special orthogonal matrix.
SkewSymmetric matrix_log_orthogonal(const OrthogonalMatrix& w);

/// A -> exp(A - A^T).
OrthogonalMatrix generator_from_param(const GeneratorParam& param);

/// 2x2 rotation [[cos a, -sin a], [sin a, cos a]].
Matrix planar_rotation(double angle);

}  // namespace ape
