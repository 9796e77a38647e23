#pragma once

// Flat, contiguous row-major float64 interchange for foreign callers. Nothing
// here takes ownership of or writes to caller buffers.

#include <span>
#include <vector>

#include "ape/attention.hpp"

namespace ape::flat {

/// Copies a rows x cols row-major buffer into a matrix.
Matrix to_matrix(std::span<const double> data, Index rows, Index cols);
std::vector<double> from_matrix(const Matrix& m);

/// `params` holds generator_count() consecutive block x block row-major
/// parameters, block = dim (dim / axes for grids).
GroupInterpretation build(const StructureSpec& spec, Index dim, std::span<const double> params);

/// Factored scores for already projected queries (m x d) and keys (n x d).
/// In absolute mode only the keys are modulated. Returns m x n row-major.
std::vector<double> scores(const GroupInterpretation& g, std::span<const double> queries, Index m,
                           std::span<const double> keys, Index n,
                           const std::vector<AbsolutePosition>& query_positions,
                           const std::vector<AbsolutePosition>& key_positions);

/// nu * d * d row-major values, the same payload as the binary dump.
std::vector<double> tensor_values(const PositionTensor& tensor);

}  // namespace ape::flat
