#pragma once

// Conversions between rotary encodings (a list of planar angles) and
// orthogonal generators, and a numerical check that both score the same.

#include <string>
#include <vector>

#include "ape/attention.hpp"

namespace ape {

struct RotarySpec {
    Index dim = 0;
    std::vector<double> angles;  // dim / 2 entries

    /// Throws DimensionError for odd dim or a wrong angle count.
    void validate() const;

    /// theta_i = base^(-2 (i - 1) / d).
    static RotarySpec ladder(Index dim, double base = 10000.0);
};

Matrix rotation_block_matrix(const RotarySpec& spec);

struct RopeToApe {
    GeneratorParam param;
    OrthogonalMatrix generator;
    /// Set when an angle sits on the branch cut (|theta| == pi mod 2 pi); the
    /// principal branch is used.
    bool branch_ambiguous = false;
    /// ||exp(skew(param)) - rotation_block_matrix(spec)||_F
    double residual = 0.0;
};

RopeToApe rope_to_ape(const RotarySpec& spec);

struct ApeToRope {
    RotarySpec rotary;
    OrthogonalMatrix basis;
    /// ||P R(theta) P^T - W||_F
    double residual = 0.0;
};

/// W = P * rotation_block_matrix(theta) * P^T with angles in [0, pi].
ApeToRope ape_to_rope(const OrthogonalMatrix& w);

/// Rotary scoring of already projected rows: row i of `q` sits at position
/// query_index[i], row j of `k` at key_index[j]; each pair of coordinates is
/// rotated by position * theta.
Matrix rotary_scores(const Matrix& q, const Matrix& k, const std::vector<double>& angles,
                     const std::vector<std::int64_t>& query_index, const std::vector<std::int64_t>& key_index);

/// Max |APE score - rotary score| over a batch with queries at positions
/// 0..m-1 and keys at 0..n-1, all below or at p_max. The rotary side uses the
/// angles and basis from ape_to_rope(w) with projections Phi P.
double verify_equivalence(const AttentionBatch& batch, const OrthogonalMatrix& w, std::int64_t p_max);

/// Near-identity parameters, entries uniform in (-eps, eps).
GeneratorParam near_identity_param(Index dim, Rng& rng, double eps = 1e-3);

/// Angle-list interchange: a JSON array of dim / 2 numbers.
std::string angles_to_json(const std::vector<double>& angles);
std::vector<double> angles_from_json(const std::string& text);

}  // namespace ape
