#include "ape/attention.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "ape/random.hpp"

namespace ape {

namespace {

void require_shape(const Matrix& m, Index rows, Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << what << " must be " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
        throw Error(ErrorCode::DimensionError, os.str());
    }
}

void require_rows(const PositionTensor& t, Index rows, Index dim, const char* what) {
    if (static_cast<Index>(t.count()) != rows || t.dim() != dim) {
        std::ostringstream os;
        os << what << " has " << t.count() << " slices of size " << t.dim() << ", expected " << rows << " of size "
           << dim;
        throw Error(ErrorCode::DimensionError, os.str());
    }
}

// Row i of the result is (A_i x_i^T)^T for x_i the i-th row of `rows`.
Matrix transform_rows(const Matrix& rows, const PositionTensor& t) {
    Matrix out(rows.rows(), rows.cols());
    for (Index i = 0; i < rows.rows(); ++i) {
        out.row(i) = (t.slice(static_cast<std::size_t>(i)) * rows.row(i).transpose()).transpose();
    }
    return out;
}

AttentionBatch permuted(const AttentionBatch& batch, const std::vector<std::size_t>& perm) {
    const auto n = static_cast<std::size_t>(batch.keys.rows());
    if (perm.size() != n) throw Error(ErrorCode::DimensionError, "permutation length must equal the key count");
    std::vector<bool> seen(n, false);
    AttentionBatch out = batch;
    for (std::size_t j = 0; j < n; ++j) {
        if (perm[j] >= n || seen[perm[j]]) throw Error(ErrorCode::InvalidParameter, "not a permutation");
        seen[perm[j]] = true;
        out.keys.row(static_cast<Index>(j)) = batch.keys.row(static_cast<Index>(perm[j]));
        out.values.row(static_cast<Index>(j)) = batch.values.row(static_cast<Index>(perm[j]));
    }
    return out;
}

}  // namespace

void AttentionBatch::validate() const {
    const Index d = queries.cols();
    if (queries.rows() < 1 || keys.rows() < 1 || d < 1) {
        throw Error(ErrorCode::DimensionError, "attention needs at least one query, one key and d >= 1");
    }
    require_shape(keys, keys.rows(), d, "keys");
    require_shape(values, keys.rows(), d, "values");
    require_shape(proj_q, d, d, "query projection");
    require_shape(proj_k, d, d, "key projection");
    require_shape(proj_v, d, d, "value projection");
    for (const Matrix* m : {&queries, &keys, &values, &proj_q, &proj_k, &proj_v}) {
        if (!m->allFinite()) throw Error(ErrorCode::InvalidParameter, "attention inputs must be finite");
    }
}

double AttentionBatch::scale() const { return 1.0 / std::sqrt(static_cast<double>(dim())); }

AttentionBatch random_batch(Index m, Index n, Index d, Rng& rng) {
    AttentionBatch batch;
    batch.queries = rng.matrix(m, d);
    batch.keys = rng.matrix(n, d);
    batch.values = rng.matrix(n, d);
    batch.proj_q = rng.matrix(d, d);
    batch.proj_k = rng.matrix(d, d);
    batch.proj_v = rng.matrix(d, d);
    return batch;
}

RelativeTensor::RelativeTensor(Index rows, Index cols, std::vector<Matrix> slices)
    : rows_(rows), cols_(cols), slices_(std::move(slices)) {
    if (static_cast<Index>(slices_.size()) != rows_ * cols_) {
        throw Error(ErrorCode::DimensionError, "relative tensor needs rows * cols slices");
    }
}

RelativeTensor relative_tensor(const GroupInterpretation& g, const std::vector<AbsolutePosition>& query_positions,
                               const std::vector<AbsolutePosition>& key_positions) {
    std::vector<Matrix> slices;
    slices.reserve(query_positions.size() * key_positions.size());
    for (const auto& source : query_positions) {
        for (const auto& target : key_positions) {
            slices.push_back(interpret(relative_path(source, target, g.spec()), g).entries());
        }
    }
    return RelativeTensor(static_cast<Index>(query_positions.size()), static_cast<Index>(key_positions.size()),
                          std::move(slices));
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix out(scores.rows(), scores.cols());
    for (Index i = 0; i < scores.rows(); ++i) {
        const double peak = scores.row(i).maxCoeff();
        out.row(i) = (scores.row(i).array() - peak).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

Matrix vanilla_scores(const AttentionBatch& batch) {
    batch.validate();
    return batch.projected_queries() * batch.projected_keys().transpose();
}

Matrix attend(const AttentionBatch& batch, const Matrix& scores) {
    batch.validate();
    require_shape(scores, batch.queries.rows(), batch.keys.rows(), "scores");
    return softmax_rows(scores * batch.scale()) * batch.projected_values();
}

Matrix vanilla_attention(const AttentionBatch& batch) { return attend(batch, vanilla_scores(batch)); }

bool permutation_invariance_check(const AttentionBatch& batch, const std::vector<std::size_t>& perm,
                                  double tolerance) {
    const Matrix before = vanilla_attention(batch);
    const Matrix after = vanilla_attention(permuted(batch, perm));
    return (before - after).cwiseAbs().maxCoeff() <= tolerance;
}

bool ape_permutation_invariance_check(const AttentionBatch& batch, const PositionTensor& ax,
                                      const PositionTensor& ay, const std::vector<std::size_t>& perm,
                                      double tolerance) {
    const Matrix before = attend(batch, ape_scores_fast(batch, ax, ay));
    const AttentionBatch moved = permuted(batch, perm);
    const Matrix after = attend(moved, ape_scores_fast(moved, ax, ay));
    return (before - after).cwiseAbs().maxCoeff() <= tolerance;
}

Matrix ape_scores_naive(const AttentionBatch& batch, const RelativeTensor& t) {
    batch.validate();
    const Index m = batch.queries.rows();
    const Index n = batch.keys.rows();
    const Index d = batch.dim();
    if (t.rows() != m || t.cols() != n) throw Error(ErrorCode::DimensionError, "relative tensor shape mismatch");
    const Matrix q = batch.projected_queries();
    const Matrix k = batch.projected_keys();
    Matrix scores(m, n);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < n; ++j) {
            const Matrix& slice = t.at(i, j);
            require_shape(slice, d, d, "relative slice");
            if (!(orthogonality_defect(slice) <= 1e-9 * static_cast<double>(d))) {
                throw Error(ErrorCode::InvalidPositionTensor, "relative slice is not orthogonal");
            }
            scores(i, j) = q.row(i) * slice * k.row(j).transpose();
        }
    }
    return scores;
}

Matrix ape_scores_fast(const AttentionBatch& batch, const PositionTensor& ax, const PositionTensor& ay) {
    batch.validate();
    require_rows(ax, batch.queries.rows(), batch.dim(), "query position tensor");
    require_rows(ay, batch.keys.rows(), batch.dim(), "key position tensor");
    const Matrix q = transform_rows(batch.projected_queries(), ax);
    const Matrix k = transform_rows(batch.projected_keys(), ay);
    return q * k.transpose();
}

Matrix ape_scores_absolute(const AttentionBatch& batch, const PositionTensor& ay) {
    batch.validate();
    require_rows(ay, batch.keys.rows(), batch.dim(), "key position tensor");
    return batch.projected_queries() * transform_rows(batch.projected_keys(), ay).transpose();
}

void DecayConfig::validate() const {
    if (!std::isfinite(exponent)) throw Error(ErrorCode::InvalidParameter, "decay exponent must be finite");
    if (form == DecayForm::Geometric && !(exponent > 0.0 && exponent <= 1.0)) {
        throw Error(ErrorCode::InvalidParameter, "geometric decay needs 0 < c <= 1");
    }
}

double decay_multiplier(std::int64_t distance, const DecayConfig& cfg) {
    if (distance < 0) throw Error(ErrorCode::InvalidParameter, "distances must be nonnegative");
    if (distance == 0) return 1.0;
    const auto p = static_cast<double>(distance);
    return cfg.form == DecayForm::Geometric ? std::pow(cfg.exponent, p) : std::pow(p, cfg.exponent);
}

Matrix apply_distance_decay(const Matrix& scores, const DistanceMatrix& distances, const DecayConfig& cfg) {
    cfg.validate();
    if (distances.rows() != scores.rows() || distances.cols() != scores.cols()) {
        throw Error(ErrorCode::DimensionError, "distance matrix must match the score shape");
    }
    Matrix out = scores;
    for (Index i = 0; i < scores.rows(); ++i)
        for (Index j = 0; j < scores.cols(); ++j) out(i, j) *= decay_multiplier(distances(i, j), cfg);
    return out;
}

DistanceMatrix pairwise_distances(const StructureSpec& spec, const std::vector<AbsolutePosition>& query_positions,
                                  const std::vector<AbsolutePosition>& key_positions) {
    DistanceMatrix out(static_cast<Index>(query_positions.size()), static_cast<Index>(key_positions.size()));
    StructureSpec relative = spec;
    relative.mode = PositionMode::Relative;
    for (std::size_t i = 0; i < query_positions.size(); ++i) {
        for (std::size_t j = 0; j < key_positions.size(); ++j) {
            out(static_cast<Index>(i), static_cast<Index>(j)) =
                path_length(relative_path(query_positions[i], key_positions[j], relative), relative);
        }
    }
    return out;
}

Matrix ape_attention(const AttentionBatch& batch, const GroupInterpretation& g,
                     const std::vector<AbsolutePosition>& query_positions,
                     const std::vector<AbsolutePosition>& key_positions, const std::optional<DecayConfig>& decay) {
    const PositionTensor ay = build_positions(g, key_positions);
    Matrix scores;
    if (g.spec().mode == PositionMode::Absolute) {
        scores = ape_scores_absolute(batch, ay);
    } else {
        scores = ape_scores_fast(batch, build_positions(g, query_positions), ay);
    }
    if (decay) scores = apply_distance_decay(scores, pairwise_distances(g.spec(), query_positions, key_positions), *decay);
    return attend(batch, scores);
}

std::vector<Matrix> score_gradient(const AttentionBatch& batch, const StructureSpec& spec,
                                   const std::vector<GeneratorParam>& params,
                                   const std::vector<AbsolutePosition>& query_positions,
                                   const std::vector<AbsolutePosition>& key_positions, const Matrix& upstream) {
    batch.validate();
    const GroupInterpretation g = GroupInterpretation::from_params(spec, params);
    if (g.dim() != batch.dim()) throw Error(ErrorCode::DimensionError, "generator dimension does not match d");
    const Index m = batch.queries.rows();
    const Index n = batch.keys.rows();
    require_shape(upstream, m, n, "upstream gradient");
    const bool absolute = spec.mode == PositionMode::Absolute;

    const PositionTensor ay = build_positions(g, key_positions);
    const Matrix q = batch.projected_queries();
    const Matrix k = batch.projected_keys();
    const Matrix k_moved = transform_rows(k, ay);
    Matrix q_moved = q;
    std::optional<PositionTensor> ax;
    if (!absolute) {
        ax = build_positions(g, query_positions);
        require_rows(*ax, m, batch.dim(), "query position tensor");
        q_moved = transform_rows(q, *ax);
    }

    // Gradient with respect to each absolute-position matrix.
    std::map<AbsolutePosition, Matrix> adjoint;
    auto accumulate = [&](const AbsolutePosition& x, const Matrix& contribution) {
        auto [it, inserted] = adjoint.emplace(x, contribution);
        if (!inserted) it->second += contribution;
    };
    const Matrix dq_moved = upstream * k_moved;              // m x d
    const Matrix dk_moved = upstream.transpose() * q_moved;  // n x d
    if (!absolute) {
        for (Index i = 0; i < m; ++i) {
            accumulate(query_positions[static_cast<std::size_t>(i)], dq_moved.row(i).transpose() * q.row(i));
        }
    }
    for (Index j = 0; j < n; ++j) {
        accumulate(key_positions[static_cast<std::size_t>(j)], dk_moved.row(j).transpose() * k.row(j));
    }

    // Back through the products that formed each position matrix.
    const Index block = g.block_dim();
    std::vector<Matrix> grad_w(g.generators().size(), Matrix::Zero(block, block));
    auto through_power = [&](const PositionTensor& ladder, std::int64_t p, const Matrix& c, Matrix& out) {
        for (std::int64_t i = 0; i < p; ++i) {
            out += ladder.slice(static_cast<std::size_t>(i)).transpose() * c *
                   ladder.slice(static_cast<std::size_t>(p - 1 - i)).transpose();
        }
    };

    switch (spec.kind) {
        case StructureKind::Sequence: {
            std::int64_t top = 0;
            for (const auto& [x, c] : adjoint) top = std::max(top, std::get<SeqIndex>(x).index);
            const PositionTensor ladder = seq_powers(g.generator(0), top);
            for (const auto& [x, c] : adjoint) through_power(ladder, std::get<SeqIndex>(x).index, c, grad_w[0]);
            break;
        }
        case StructureKind::Grid: {
            const auto axes = static_cast<std::size_t>(spec.axes);
            std::vector<std::int64_t> top(axes, 0);
            for (const auto& [x, c] : adjoint) {
                const auto& coords = std::get<GridCoord>(x).coords;
                for (std::size_t a = 0; a < axes; ++a) top[a] = std::max(top[a], coords[a]);
            }
            for (std::size_t a = 0; a < axes; ++a) {
                const PositionTensor ladder = seq_powers(g.generator(static_cast<int>(a)), top[a]);
                const auto offset = static_cast<Index>(a) * block;
                for (const auto& [x, c] : adjoint) {
                    through_power(ladder, std::get<GridCoord>(x).coords[a], c.block(offset, offset, block, block),
                                  grad_w[a]);
                }
            }
            break;
        }
        case StructureKind::Tree: {
            for (const auto& [x, c] : adjoint) {
                const auto& word = std::get<TreeNode>(x).branches;
                const std::size_t len = word.size();
                // suffix[k] = W_{b_{k+1}} ... W_{b_len}
                std::vector<Matrix> suffix(len + 1, Matrix::Identity(block, block));
                for (std::size_t k = len; k-- > 0;) {
                    suffix[k] = g.generator(word[k] - 1).entries() * suffix[k + 1];
                }
                Matrix prefix = Matrix::Identity(block, block);
                for (std::size_t k = 0; k < len; ++k) {
                    const Matrix& w = g.generator(word[k] - 1).entries();
                    grad_w[static_cast<std::size_t>(word[k] - 1)] += prefix.transpose() * c * suffix[k + 1].transpose();
                    prefix = (prefix * w).eval();
                }
            }
            break;
        }
    }

    // W = exp(B), B = A - A^T. The adjoint of the Frechet derivative at B is
    // the Frechet derivative at B^T = -B.
    std::vector<Matrix> grads;
    grads.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const SkewSymmetric b = skew_symmetrize(params[i]);
        const Matrix grad_b = matrix_exp_frechet(Matrix(-b.entries()), grad_w[i]);
        grads.emplace_back(grad_b - grad_b.transpose());
    }
    return grads;
}

HeadGenerators::HeadGenerators(std::vector<GroupInterpretation> heads) : heads_(std::move(heads)) {
    if (heads_.empty()) throw Error(ErrorCode::InvalidParameter, "at least one head is required");
}

}  // namespace ape
