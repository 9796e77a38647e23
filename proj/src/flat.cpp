#include "ape/flat.hpp"

#include <sstream>

namespace ape::flat {

Matrix to_matrix(std::span<const double> data, Index rows, Index cols) {
    if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
        std::ostringstream os;
        os << "buffer of " << data.size() << " values cannot be viewed as " << rows << "x" << cols;
        throw Error(ErrorCode::DimensionError, os.str());
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = data[static_cast<std::size_t>(i * cols + j)];
    return m;
}

std::vector<double> from_matrix(const Matrix& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

GroupInterpretation build(const StructureSpec& spec, Index dim, std::span<const double> params) {
    spec.validate();
    const Index block = spec.kind == StructureKind::Grid ? split_dimension(dim, spec.axes) : dim;
    const auto count = static_cast<std::size_t>(spec.generator_count());
    const auto per = static_cast<std::size_t>(block * block);
    if (params.size() != count * per) {
        std::ostringstream os;
        os << "expected " << count << " parameters of " << block << "x" << block << " (" << count * per
           << " values), got " << params.size();
        throw Error(ErrorCode::DimensionError, os.str());
    }
    std::vector<GeneratorParam> parsed;
    for (std::size_t g = 0; g < count; ++g) {
        parsed.emplace_back(to_matrix(params.subspan(g * per, per), block, block));
    }
    return GroupInterpretation::from_params(spec, parsed);
}

std::vector<double> scores(const GroupInterpretation& g, std::span<const double> queries, Index m,
                           std::span<const double> keys, Index n,
                           const std::vector<AbsolutePosition>& query_positions,
                           const std::vector<AbsolutePosition>& key_positions) {
    const Index d = g.dim();
    AttentionBatch batch;
    batch.queries = to_matrix(queries, m, d);
    batch.keys = to_matrix(keys, n, d);
    batch.values = Matrix::Zero(n, d);
    batch.proj_q = batch.proj_k = batch.proj_v = Matrix::Identity(d, d);
    const PositionTensor ay = build_positions(g, key_positions);
    if (g.spec().mode == PositionMode::Absolute) return from_matrix(ape_scores_absolute(batch, ay));
    return from_matrix(ape_scores_fast(batch, build_positions(g, query_positions), ay));
}

std::vector<double> tensor_values(const PositionTensor& tensor) {
    std::vector<double> out;
    out.reserve(tensor.count() * static_cast<std::size_t>(tensor.dim() * tensor.dim()));
    for (const auto& slice : tensor.slices()) {
        const auto values = from_matrix(slice);
        out.insert(out.end(), values.begin(), values.end());
    }
    return out;
}

}  // namespace ape::flat
