#pragma once

// Semantic side: the homomorphism from paths to orthogonal matrices, and
// batched construction of per-position matrix stacks.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <vector>

#include "ape/orthogonal.hpp"
#include "ape/path.hpp"

namespace ape {

class Rng;

/// Per-axis block size d / axes. Throws DimensionSplitError when axes does not divide dim.
Index split_dimension(Index dim, int axes);

/// A structure together with one orthogonal generator per primitive path:
/// one for sequences, kappa for trees, one per axis (of size d / axes) for grids.
class GroupInterpretation {
public:
    GroupInterpretation(StructureSpec spec, std::vector<OrthogonalMatrix> generators);

    static GroupInterpretation from_params(StructureSpec spec, const std::vector<GeneratorParam>& params);

    const StructureSpec& spec() const { return spec_; }
    const std::vector<OrthogonalMatrix>& generators() const { return generators_; }
    const OrthogonalMatrix& generator(int index) const { return generators_.at(static_cast<std::size_t>(index)); }

    /// Dimension of the interpreted matrices (sum of axis blocks for grids).
    Index dim() const;
    /// Dimension of a single generator.
    Index block_dim() const { return generators_.front().dim(); }

private:
    StructureSpec spec_;
    std::vector<OrthogonalMatrix> generators_;
};

/// Random parameters for every generator of `spec` with total dimension `dim`.
std::vector<GeneratorParam> random_params(const StructureSpec& spec, Index dim, Rng& rng, double scale = 1.0);

/// Stack of orthogonal matrices, one per distinct absolute position.
class PositionTensor {
public:
    PositionTensor(std::vector<Matrix> slices, std::vector<AbsolutePosition> positions,
                   std::size_t products = 0);

    std::size_t count() const { return slices_.size(); }
    Index dim() const { return dim_; }
    const Matrix& slice(std::size_t row) const { return slices_.at(row); }
    const std::vector<Matrix>& slices() const { return slices_; }
    const std::vector<AbsolutePosition>& positions() const { return positions_; }

    /// Throws InvalidPosition when `x` has no row.
    std::size_t row_of(const AbsolutePosition& x) const;
    bool contains(const AbsolutePosition& x) const { return index_.count(x) != 0; }

    /// Rows for `positions`, in that order.
    PositionTensor gather(const std::vector<AbsolutePosition>& positions) const;

    /// Matrix products spent building the tensor (a batched product counts once).
    std::size_t products() const { return products_; }

    /// Largest per-slice orthogonality defect.
    double max_defect() const;

private:
    Index dim_ = 0;
    std::vector<Matrix> slices_;
    std::vector<AbsolutePosition> positions_;
    std::map<AbsolutePosition, std::size_t> index_;
    std::size_t products_ = 0;
};

OrthogonalMatrix interpret(const PathWord& p, const GroupInterpretation& g);

/// Block-diagonal [[a, 0], [0, b]].
Matrix direct_sum(const Matrix& a, const Matrix& b);
Matrix direct_sum(const std::vector<Matrix>& blocks);

/// [W^0, ..., W^p_max] through a doubling ladder: each round squares the
/// current step and right-multiplies every filled row by it in one product.
PositionTensor seq_powers(const OrthogonalMatrix& w, std::int64_t p_max);

/// Rows W^{indices[i]} for distinct indices.
PositionTensor subsampled_positions(const GroupInterpretation& g, const std::vector<std::int64_t>& indices);

/// Rows W_{b1} ... W_{bt} for each branch word, built depth by depth with one
/// batched product per (depth, branch); shared prefixes are computed once.
PositionTensor tree_positions(const GroupInterpretation& g, const std::vector<AbsolutePosition>& positions);

/// All coordinates of a grid with the given extents, row-major.
PositionTensor grid_positions(const GroupInterpretation& g, const std::vector<std::int64_t>& extents);

/// Arbitrary distinct grid coordinates.
PositionTensor grid_positions_at(const GroupInterpretation& g, const std::vector<AbsolutePosition>& coords);

/// Dispatches on the structure kind.
PositionTensor build_positions(const GroupInterpretation& g, const std::vector<AbsolutePosition>& positions);

/// Block rotation with angles at multiples of 2 pi / n; W^n = I.
OrthogonalMatrix make_periodic_generator(std::int64_t n, Index dim);

/// Binary dump: a JSON header line {"nu", "dim", "order", "dtype"} followed by
/// nu * dim * dim little-endian doubles, each slice row-major.
void write_dump(std::ostream& out, const PositionTensor& tensor);
/// Reads a dump; positions are labelled as sequence indices 0..nu-1.
PositionTensor read_dump(std::istream& in);

}  // namespace ape
