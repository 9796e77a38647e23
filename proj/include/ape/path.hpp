#pragma once

// Syntactic side of positional encodings: relative paths as words of a free
// group (sequences, trees) or a direct sum of free groups (grids), and absolute
// positions as forward-only words.

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ape/error.hpp"

namespace ape {

enum class StructureKind { Sequence, Tree, Grid };
enum class PositionMode { Relative, Absolute };

struct StructureSpec {
    StructureKind kind = StructureKind::Sequence;
    int branching = 1;  // kappa, trees only
    int axes = 1;       // grids only
    PositionMode mode = PositionMode::Relative;
    /// Finite cyclic order shared by every generator.
    std::optional<std::int64_t> period;

    static StructureSpec sequence();
    static StructureSpec tree(int branching);
    static StructureSpec grid(int axes);

    StructureSpec with_period(std::int64_t n) const;
    StructureSpec absolute() const;

    /// 1 for sequences, kappa for trees, the axis count for grids.
    int generator_count() const;
    void validate() const;

    bool operator==(const StructureSpec&) const = default;
};

std::string to_string(const StructureSpec& spec);

// Tree letters are signed generator indices: +g descends along branch g,
// -g is its inverse. Generator indices are 1-based.
using TreeLetter = int;
using TreeWordLetters = std::vector<TreeLetter>;

struct SeqPath {
    std::int64_t offset = 0;
    auto operator<=>(const SeqPath&) const = default;
};

struct TreePath {
    TreeWordLetters letters;
    auto operator<=>(const TreePath&) const = default;
};

struct GridPath {
    std::vector<std::int64_t> offsets;
    auto operator<=>(const GridPath&) const = default;
};

using PathWord = std::variant<SeqPath, TreePath, GridPath>;

struct SeqIndex {
    std::int64_t index = 0;
    auto operator<=>(const SeqIndex&) const = default;
};

struct TreeNode {
    std::vector<int> branches;  // root-to-node branch choices, each in 1..kappa
    auto operator<=>(const TreeNode&) const = default;
};

struct GridCoord {
    std::vector<std::int64_t> coords;
    auto operator<=>(const GridCoord&) const = default;
};

using AbsolutePosition = std::variant<SeqIndex, TreeNode, GridCoord>;

/// Throws StructureMismatch / InvalidGenerator / InvalidPosition.
void check_conforms(const PathWord& p, const StructureSpec& spec);
void check_conforms(const AbsolutePosition& x, const StructureSpec& spec);

PathWord identity_path(const StructureSpec& spec);

/// Free reduction of a tree word; with a period n, runs of one generator are
/// also taken modulo n and written with positive letters.
TreeWordLetters reduce_word(const TreeWordLetters& letters, int branching,
                            std::optional<std::int64_t> period = std::nullopt);

/// Canonical representative of `p` under `spec`.
PathWord normalize(const PathWord& p, const StructureSpec& spec);

bool equivalent(const PathWord& p, const PathWord& q, const StructureSpec& spec);

PathWord compose(const PathWord& p, const PathWord& q, const StructureSpec& spec);
PathWord invert(const PathWord& p, const StructureSpec& spec);

/// Absolute position as the forward path from the origin.
PathWord embed(const AbsolutePosition& x, const StructureSpec& spec);

/// invert(embed(source)) composed with embed(target), reduced.
PathWord relative_path(const AbsolutePosition& source, const AbsolutePosition& target,
                       const StructureSpec& spec);

/// Number of steps: |offset| (cyclic distance when periodic), reduced tree word
/// length, or L1 norm of grid offsets.
std::int64_t path_length(const PathWord& p, const StructureSpec& spec);

// Text notation: sequences "-7"; trees "1 2 -1" (empty string is the empty
// word); grids "(-2,3)". Tree positions may be written compactly ("21") when
// every branch index is a single digit, or space separated.
PathWord parse_path(std::string_view text, const StructureSpec& spec);
std::string format_path(const PathWord& p);
AbsolutePosition parse_position(std::string_view text, const StructureSpec& spec);
std::string format_position(const AbsolutePosition& x);

/// Every node of the complete kappa-ary tree down to `depth`, breadth first.
std::vector<AbsolutePosition> complete_tree(int branching, int depth);

/// Row-major (last axis fastest) coordinates of a grid with the given extents.
std::vector<AbsolutePosition> grid_coordinates(const std::vector<std::int64_t>& extents);

}  // namespace ape
