#pragma once

// Dot-product attention with positional modulation. Scores follow the
// contraction q_i * T_ij * k_j^T with T_ij = A_i^T B_j, where A_i and B_j are
// the absolute-position matrices of query i and key j.

#include <cstdint>
#include <optional>
#include <vector>

#include "ape/encoders.hpp"

namespace ape {

struct AttentionBatch {
    Matrix queries;  // m x d
    Matrix keys;     // n x d
    Matrix values;   // n x d
    Matrix proj_q;   // d x d
    Matrix proj_k;
    Matrix proj_v;

    /// Throws DimensionError / InvalidParameter.
    void validate() const;

    Index dim() const { return queries.cols(); }
    double scale() const;

    Matrix projected_queries() const { return queries * proj_q; }
    Matrix projected_keys() const { return keys * proj_k; }
    Matrix projected_values() const { return values * proj_v; }
};

/// Random batch with entries uniform in [-1, 1].
AttentionBatch random_batch(Index m, Index n, Index d, Rng& rng);

/// m x n tensor of d x d slices; slice (i, j) relates query i to key j.
class RelativeTensor {
public:
    RelativeTensor(Index rows, Index cols, std::vector<Matrix> slices);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    const Matrix& at(Index i, Index j) const { return slices_[static_cast<std::size_t>(i * cols_ + j)]; }

private:
    Index rows_;
    Index cols_;
    std::vector<Matrix> slices_;
};

/// T_ij = interpret(relative_path(query_i, key_j)).
RelativeTensor relative_tensor(const GroupInterpretation& g, const std::vector<AbsolutePosition>& query_positions,
                               const std::vector<AbsolutePosition>& key_positions);

Matrix softmax_rows(const Matrix& scores);

/// (X Phi_q)(Y Phi_k)^T, without the 1/sqrt(d) factor.
Matrix vanilla_scores(const AttentionBatch& batch);

/// softmax(scores / sqrt(d)) * Y Phi_v.
Matrix attend(const AttentionBatch& batch, const Matrix& scores);

Matrix vanilla_attention(const AttentionBatch& batch);

/// Applies `perm` jointly to keys and values and compares vanilla outputs.
bool permutation_invariance_check(const AttentionBatch& batch, const std::vector<std::size_t>& perm,
                                  double tolerance = 1e-10);

/// Same check for position-modulated attention: keys and values move, while the
/// key positions stay attached to their slots.
bool ape_permutation_invariance_check(const AttentionBatch& batch, const PositionTensor& ax,
                                      const PositionTensor& ay, const std::vector<std::size_t>& perm,
                                      double tolerance = 1e-10);

/// Reference contraction through the full m x n x d x d tensor.
Matrix ape_scores_naive(const AttentionBatch& batch, const RelativeTensor& t);

/// Factored contraction: queries and keys are transformed by their own
/// absolute-position matrices, then multiplied once.
Matrix ape_scores_fast(const AttentionBatch& batch, const PositionTensor& ax, const PositionTensor& ay);

/// Absolute (monoid) mode: only the keys are modulated.
Matrix ape_scores_absolute(const AttentionBatch& batch, const PositionTensor& ay);

enum class DecayForm {
    Geometric,     // c^p
    LiteralPower,  // p^c, with p = 0 mapped to 1
};

struct DecayConfig {
    double exponent = 0.98;
    DecayForm form = DecayForm::Geometric;

    void validate() const;
};

using DistanceMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

double decay_multiplier(std::int64_t distance, const DecayConfig& cfg);

Matrix apply_distance_decay(const Matrix& scores, const DistanceMatrix& distances, const DecayConfig& cfg);

/// path_length of every query-to-key relative path.
DistanceMatrix pairwise_distances(const StructureSpec& spec, const std::vector<AbsolutePosition>& query_positions,
                                  const std::vector<AbsolutePosition>& key_positions);

/// Full pipeline: factored scores, 1/sqrt(d), optional decay, softmax, values.
/// In absolute mode the queries are left unmodulated.
Matrix ape_attention(const AttentionBatch& batch, const GroupInterpretation& g,
                     const std::vector<AbsolutePosition>& query_positions,
                     const std::vector<AbsolutePosition>& key_positions,
                     const std::optional<DecayConfig>& decay = std::nullopt);

/// Gradient of sum_ij upstream_ij * score_ij with respect to every generator
/// parameter, where scores come from ape_scores_fast (ape_scores_absolute in
/// absolute mode) with generators exp(A - A^T). One d x d gradient per param.
std::vector<Matrix> score_gradient(const AttentionBatch& batch, const StructureSpec& spec,
                                   const std::vector<GeneratorParam>& params,
                                   const std::vector<AbsolutePosition>& query_positions,
                                   const std::vector<AbsolutePosition>& key_positions, const Matrix& upstream);

/// Generators per attention head, shared by every layer.
class HeadGenerators {
public:
    explicit HeadGenerators(std::vector<GroupInterpretation> heads);

    std::size_t head_count() const { return heads_.size(); }
    const GroupInterpretation& for_head(std::size_t head) const { return heads_.at(head); }
    const GroupInterpretation& for_layer_head(std::size_t /*layer*/, std::size_t head) const { return for_head(head); }

private:
    std::vector<GroupInterpretation> heads_;
};

}  // namespace ape
