#include "ape/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ape/random.hpp"

namespace ape {

namespace {

constexpr double kSliceTolerance = 1e-9;

Matrix power(const Matrix& w, std::int64_t exponent) {
    Matrix base = exponent < 0 ? Matrix(w.transpose()) : w;
    auto remaining = static_cast<std::uint64_t>(exponent < 0 ? -exponent : exponent);
    Matrix result = Matrix::Identity(w.rows(), w.cols());
    while (remaining) {
        if (remaining & 1u) result = (result * base).eval();
        remaining >>= 1u;
        if (remaining) base = (base * base).eval();
    }
    return result;
}

// Vertical stack of d x d blocks, so that one product right-multiplies all of them.
Matrix stack(const std::vector<const Matrix*>& blocks, Index d) {
    Matrix stacked(static_cast<Index>(blocks.size()) * d, d);
    for (std::size_t i = 0; i < blocks.size(); ++i) stacked.middleRows(static_cast<Index>(i) * d, d) = *blocks[i];
    return stacked;
}

void require_kind(const GroupInterpretation& g, StructureKind kind, const char* what) {
    if (g.spec().kind != kind) {
        throw Error(ErrorCode::StructureMismatch, std::string(what) + " requires a matching structure, got " +
                                                      to_string(g.spec()));
    }
}

}  // namespace

Index split_dimension(Index dim, int axes) {
    if (axes < 1 || dim < 1 || dim % axes != 0) {
        std::ostringstream os;
        os << "dimension " << dim << " cannot be split evenly across " << axes << " axes";
        throw Error(ErrorCode::DimensionSplitError, os.str());
    }
    return dim / axes;
}

GroupInterpretation::GroupInterpretation(StructureSpec spec, std::vector<OrthogonalMatrix> generators)
    : spec_(std::move(spec)), generators_(std::move(generators)) {
    spec_.validate();
    if (static_cast<int>(generators_.size()) != spec_.generator_count()) {
        std::ostringstream os;
        os << to_string(spec_) << " needs " << spec_.generator_count() << " generators, got " << generators_.size();
        throw Error(ErrorCode::StructureMismatch, os.str());
    }
    const Index d = generators_.front().dim();
    for (const auto& w : generators_) {
        if (w.dim() != d) throw Error(ErrorCode::DimensionSplitError, "generators must share one dimension");
    }
    if (spec_.period) {
        for (const auto& w : generators_) {
            const double residual = (power(w.entries(), *spec_.period) - Matrix::Identity(d, d)).norm();
            if (!(residual <= 1e-8)) {
                std::ostringstream os;
                os << "generator does not have period " << *spec_.period << " (residual " << residual << ")";
                throw Error(ErrorCode::InvalidParameter, os.str());
            }
        }
    }
}

GroupInterpretation GroupInterpretation::from_params(StructureSpec spec, const std::vector<GeneratorParam>& params) {
    std::vector<OrthogonalMatrix> generators;
    generators.reserve(params.size());
    for (const auto& p : params) generators.push_back(generator_from_param(p));
    return GroupInterpretation(std::move(spec), std::move(generators));
}

Index GroupInterpretation::dim() const {
    return spec_.kind == StructureKind::Grid ? block_dim() * spec_.axes : block_dim();
}

std::vector<GeneratorParam> random_params(const StructureSpec& spec, Index dim, Rng& rng, double scale) {
    const Index block = spec.kind == StructureKind::Grid ? split_dimension(dim, spec.axes) : dim;
    std::vector<GeneratorParam> params;
    for (int i = 0; i < spec.generator_count(); ++i) params.push_back(random_param(block, rng, scale));
    return params;
}

PositionTensor::PositionTensor(std::vector<Matrix> slices, std::vector<AbsolutePosition> positions,
                               std::size_t products)
    : slices_(std::move(slices)), positions_(std::move(positions)), products_(products) {
    if (slices_.empty()) throw Error(ErrorCode::InvalidPositionTensor, "position tensor needs at least one slice");
    if (slices_.size() != positions_.size()) {
        throw Error(ErrorCode::InvalidPositionTensor, "one position label is required per slice");
    }
    dim_ = slices_.front().rows();
    for (std::size_t i = 0; i < slices_.size(); ++i) {
        const Matrix& s = slices_[i];
        if (s.rows() != dim_ || s.cols() != dim_) {
            throw Error(ErrorCode::InvalidPositionTensor, "slices must all be d x d");
        }
        const double defect = orthogonality_defect(s);
        if (!(defect <= kSliceTolerance * static_cast<double>(dim_))) {
            std::ostringstream os;
            os << "slice " << i << " has orthogonality defect " << defect;
            throw Error(ErrorCode::InvalidPositionTensor, os.str());
        }
        if (!index_.emplace(positions_[i], i).second) {
            throw Error(ErrorCode::InvalidPosition, "duplicate position " + format_position(positions_[i]));
        }
    }
}

std::size_t PositionTensor::row_of(const AbsolutePosition& x) const {
    auto it = index_.find(x);
    if (it == index_.end()) throw Error(ErrorCode::InvalidPosition, "no row for position " + format_position(x));
    return it->second;
}

PositionTensor PositionTensor::gather(const std::vector<AbsolutePosition>& positions) const {
    std::vector<Matrix> rows;
    rows.reserve(positions.size());
    for (const auto& x : positions) rows.push_back(slices_[row_of(x)]);
    return PositionTensor(std::move(rows), positions, products_);
}

double PositionTensor::max_defect() const {
    double worst = 0.0;
    for (const auto& s : slices_) worst = std::max(worst, orthogonality_defect(s));
    return worst;
}

OrthogonalMatrix interpret(const PathWord& p, const GroupInterpretation& g) {
    const PathWord reduced = normalize(p, g.spec());
    const Index d = g.dim();
    switch (g.spec().kind) {
        case StructureKind::Sequence:
            return OrthogonalMatrix(power(g.generator(0).entries(), std::get<SeqPath>(reduced).offset));
        case StructureKind::Tree: {
            Matrix m = Matrix::Identity(d, d);
            for (TreeLetter letter : std::get<TreePath>(reduced).letters) {
                const Matrix& w = g.generator(std::abs(letter) - 1).entries();
                if (letter > 0) m = (m * w).eval();
                else m = (m * w.transpose()).eval();
            }
            return OrthogonalMatrix(std::move(m));
        }
        case StructureKind::Grid: {
            const auto& offsets = std::get<GridPath>(reduced).offsets;
            std::vector<Matrix> blocks;
            for (std::size_t axis = 0; axis < offsets.size(); ++axis) {
                blocks.push_back(power(g.generator(static_cast<int>(axis)).entries(), offsets[axis]));
            }
            return OrthogonalMatrix(direct_sum(blocks));
        }
    }
    return OrthogonalMatrix::identity(d);
}

Matrix direct_sum(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

Matrix direct_sum(const std::vector<Matrix>& blocks) {
    Index rows = 0;
    Index cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Matrix out = Matrix::Zero(rows, cols);
    Index r = 0;
    Index c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

PositionTensor seq_powers(const OrthogonalMatrix& w, std::int64_t p_max) {
    if (p_max < 0) throw Error(ErrorCode::InvalidParameter, "p_max must be nonnegative");
    const Index d = w.dim();
    const auto rows = static_cast<Index>(p_max) + 1;

    Matrix ladder(rows * d, d);
    ladder.topRows(d).setIdentity();
    Index filled = 1;
    std::size_t products = 0;
    if (rows > 1) {
        ladder.middleRows(d, d) = w.entries();
        filled = 2;
    }
    Matrix step = w.entries();  // W^{filled / 2} before squaring
    while (filled < rows) {
        step = (step * step).eval();  // W^{filled}
        ++products;
        const Index take = std::min(filled, rows - filled);
        ladder.middleRows(filled * d, take * d) = ladder.topRows(take * d) * step;
        ++products;
        filled += take;
    }

    std::vector<Matrix> slices;
    std::vector<AbsolutePosition> positions;
    slices.reserve(static_cast<std::size_t>(rows));
    positions.reserve(static_cast<std::size_t>(rows));
    for (Index k = 0; k < rows; ++k) {
        slices.push_back(ladder.middleRows(k * d, d));
        positions.emplace_back(SeqIndex{k});
    }
    return PositionTensor(std::move(slices), std::move(positions), products);
}

PositionTensor subsampled_positions(const GroupInterpretation& g, const std::vector<std::int64_t>& indices) {
    require_kind(g, StructureKind::Sequence, "subsampled_positions");
    if (indices.empty()) throw Error(ErrorCode::InvalidParameter, "no indices requested");
    for (auto i : indices) {
        if (i < 0) throw Error(ErrorCode::InvalidPosition, "negative sequence index");
    }
    const auto max_index = *std::max_element(indices.begin(), indices.end());
    const PositionTensor ladder = seq_powers(g.generator(0), max_index);
    std::vector<AbsolutePosition> positions;
    positions.reserve(indices.size());
    for (auto i : indices) positions.emplace_back(SeqIndex{i});
    return ladder.gather(positions);
}

PositionTensor tree_positions(const GroupInterpretation& g, const std::vector<AbsolutePosition>& positions) {
    require_kind(g, StructureKind::Tree, "tree_positions");
    if (positions.empty()) throw Error(ErrorCode::InvalidParameter, "no positions requested");
    const Index d = g.dim();
    const int branching = g.spec().branching;

    // Prefix closure, bucketed by depth.
    std::map<std::vector<int>, std::size_t> node_of;
    std::vector<std::vector<int>> words{{}};
    node_of.emplace(std::vector<int>{}, 0);
    std::size_t depth = 0;
    for (const auto& x : positions) {
        check_conforms(x, g.spec());
        const auto& branches = std::get<TreeNode>(x).branches;
        depth = std::max(depth, branches.size());
        for (std::size_t len = 1; len <= branches.size(); ++len) {
            std::vector<int> prefix(branches.begin(), branches.begin() + static_cast<std::ptrdiff_t>(len));
            if (node_of.emplace(prefix, words.size()).second) words.push_back(std::move(prefix));
        }
    }

    std::vector<Matrix> value(words.size());
    value[0] = Matrix::Identity(d, d);
    std::size_t products = 0;
    for (std::size_t t = 1; t <= depth; ++t) {
        for (int branch = 1; branch <= branching; ++branch) {
            std::vector<std::size_t> batch;
            std::vector<const Matrix*> parents;
            for (std::size_t n = 0; n < words.size(); ++n) {
                const auto& word = words[n];
                if (word.size() != t || word.back() != branch) continue;
                batch.push_back(n);
                parents.push_back(&value[node_of.at(std::vector<int>(word.begin(), word.end() - 1))]);
            }
            if (batch.empty()) continue;
            const Matrix result = stack(parents, d) * g.generator(branch - 1).entries();
            ++products;
            for (std::size_t k = 0; k < batch.size(); ++k) {
                value[batch[k]] = result.middleRows(static_cast<Index>(k) * d, d);
            }
        }
    }

    std::vector<Matrix> slices;
    slices.reserve(positions.size());
    for (const auto& x : positions) slices.push_back(value[node_of.at(std::get<TreeNode>(x).branches)]);
    return PositionTensor(std::move(slices), positions, products);
}

PositionTensor grid_positions_at(const GroupInterpretation& g, const std::vector<AbsolutePosition>& coords) {
    require_kind(g, StructureKind::Grid, "grid_positions");
    if (coords.empty()) throw Error(ErrorCode::InvalidParameter, "no positions requested");
    const auto axes = static_cast<std::size_t>(g.spec().axes);
    std::vector<std::int64_t> max_coord(axes, 0);
    for (const auto& x : coords) {
        check_conforms(x, g.spec());
        const auto& c = std::get<GridCoord>(x).coords;
        for (std::size_t a = 0; a < axes; ++a) max_coord[a] = std::max(max_coord[a], c[a]);
    }

    std::vector<PositionTensor> ladders;
    std::size_t products = 0;
    for (std::size_t a = 0; a < axes; ++a) {
        ladders.push_back(seq_powers(g.generator(static_cast<int>(a)), max_coord[a]));
        products += ladders.back().products();
    }

    std::vector<Matrix> slices;
    slices.reserve(coords.size());
    std::vector<Matrix> blocks(axes);
    for (const auto& x : coords) {
        const auto& c = std::get<GridCoord>(x).coords;
        for (std::size_t a = 0; a < axes; ++a) blocks[a] = ladders[a].slice(static_cast<std::size_t>(c[a]));
        slices.push_back(direct_sum(blocks));
    }
    return PositionTensor(std::move(slices), coords, products);
}

PositionTensor grid_positions(const GroupInterpretation& g, const std::vector<std::int64_t>& extents) {
    require_kind(g, StructureKind::Grid, "grid_positions");
    if (static_cast<int>(extents.size()) != g.spec().axes) {
        throw Error(ErrorCode::StructureMismatch, "one extent is required per grid axis");
    }
    return grid_positions_at(g, grid_coordinates(extents));
}

PositionTensor build_positions(const GroupInterpretation& g, const std::vector<AbsolutePosition>& positions) {
    switch (g.spec().kind) {
        case StructureKind::Sequence: {
            std::vector<std::int64_t> indices;
            for (const auto& x : positions) {
                check_conforms(x, g.spec());
                indices.push_back(std::get<SeqIndex>(x).index);
            }
            return subsampled_positions(g, indices);
        }
        case StructureKind::Tree: return tree_positions(g, positions);
        case StructureKind::Grid: return grid_positions_at(g, positions);
    }
    throw Error(ErrorCode::StructureMismatch, "unknown structure");
}

OrthogonalMatrix make_periodic_generator(std::int64_t n, Index dim) {
    if (n < 1) throw Error(ErrorCode::InvalidParameter, "period must be positive");
    if (dim < 2 || dim % 2 != 0) throw Error(ErrorCode::DimensionError, "periodic generator needs an even dimension");
    Matrix w = Matrix::Identity(dim, dim);
    if (n == 1) return OrthogonalMatrix(std::move(w));
    for (Index block = 0; block < dim / 2; ++block) {
        std::int64_t multiplier = (2 * block + 1) % n;
        std::int64_t candidate = multiplier;
        while (candidate < n && std::gcd(candidate, n) != 1) ++candidate;
        multiplier = candidate < n ? candidate : 1;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(multiplier) / static_cast<double>(n);
        w.block(2 * block, 2 * block, 2, 2) = planar_rotation(angle);
    }
    return OrthogonalMatrix(std::move(w));
}

void write_dump(std::ostream& out, const PositionTensor& tensor) {
    const Index d = tensor.dim();
    out << "{\"nu\": " << tensor.count() << ", \"dim\": " << d
        << ", \"order\": \"row-major\", \"dtype\": \"f64le\"}\n";
    std::vector<char> bytes(static_cast<std::size_t>(d * d) * sizeof(double));
    for (const auto& slice : tensor.slices()) {
        std::size_t at = 0;
        for (Index i = 0; i < d; ++i) {
            for (Index j = 0; j < d; ++j) {
                auto bits = std::bit_cast<std::uint64_t>(slice(i, j));
                for (int b = 0; b < 8; ++b) bytes[at++] = static_cast<char>((bits >> (8 * b)) & 0xffu);
            }
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw Error(ErrorCode::ParseError, "failed to write position tensor");
}

PositionTensor read_dump(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw Error(ErrorCode::ParseError, "missing dump header");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("bad dump header: ") + e.what());
    }
    if (meta.value("order", "") != "row-major" || meta.value("dtype", "") != "f64le") {
        throw Error(ErrorCode::ParseError, "unsupported dump layout");
    }
    const auto nu = meta.at("nu").get<std::int64_t>();
    const auto d = meta.at("dim").get<Index>();
    if (nu < 1 || d < 1) throw Error(ErrorCode::ParseError, "dump header has empty shape");

    std::vector<unsigned char> bytes(static_cast<std::size_t>(d * d) * sizeof(double));
    std::vector<Matrix> slices;
    std::vector<AbsolutePosition> positions;
    for (std::int64_t k = 0; k < nu; ++k) {
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
            throw Error(ErrorCode::ParseError, "dump payload is truncated");
        }
        Matrix slice(d, d);
        std::size_t at = 0;
        for (Index i = 0; i < d; ++i) {
            for (Index j = 0; j < d; ++j) {
                std::uint64_t bits = 0;
                for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[at++]) << (8 * b);
                slice(i, j) = std::bit_cast<double>(bits);
            }
        }
        slices.push_back(std::move(slice));
        positions.emplace_back(SeqIndex{k});
    }
    return PositionTensor(std::move(slices), std::move(positions));
}

}  // namespace ape
