#include "ape/path.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace ape {

namespace {

std::int64_t floor_mod(std::int64_t value, std::int64_t n) {
    const std::int64_t r = value % n;
    return r < 0 ? r + n : r;
}

const char* kind_name(StructureKind kind) {
    switch (kind) {
        case StructureKind::Sequence: return "sequence";
        case StructureKind::Tree: return "tree";
        case StructureKind::Grid: return "grid";
    }
    return "?";
}

const char* path_kind_name(const PathWord& p) {
    return std::visit(
        [](const auto& v) -> const char* {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SeqPath>) return "sequence";
            else if constexpr (std::is_same_v<T, TreePath>) return "tree";
            else return "grid";
        },
        p);
}

[[noreturn]] void mismatch(const StructureSpec& spec, const char* got) {
    std::ostringstream os;
    os << "expected a " << kind_name(spec.kind) << " value, got " << got;
    throw Error(ErrorCode::StructureMismatch, os.str());
}

void check_letter(TreeLetter letter, int branching) {
    if (letter == 0 || std::abs(letter) > branching) {
        std::ostringstream os;
        os << "tree letter " << letter << " outside generators 1.." << branching;
        throw Error(ErrorCode::InvalidGenerator, os.str());
    }
}

void require_relative(const StructureSpec& spec) {
    if (spec.mode == PositionMode::Absolute) {
        throw Error(ErrorCode::InversionUnavailable, "absolute positions form a monoid without inverses");
    }
}

std::string trim(std::string_view text) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::int64_t parse_int(std::string_view token) {
    std::int64_t value = 0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last) {
        throw Error(ErrorCode::ParseError, "not an integer: '" + std::string(token) + "'");
    }
    return value;
}

std::vector<std::int64_t> parse_tuple(std::string_view text) {
    std::string body = trim(text);
    if (!body.empty() && body.front() == '(') {
        if (body.back() != ')') throw Error(ErrorCode::ParseError, "unbalanced parenthesis in '" + body + "'");
        body = body.substr(1, body.size() - 2);
    }
    std::vector<std::int64_t> values;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(parse_int(trim(item)));
    if (values.empty()) throw Error(ErrorCode::ParseError, "empty coordinate tuple");
    return values;
}

std::vector<std::int64_t> parse_words(std::string_view text) {
    std::vector<std::int64_t> values;
    std::stringstream ss{std::string(text)};
    std::string token;
    while (ss >> token) values.push_back(parse_int(token));
    return values;
}

std::string format_tuple(const std::vector<std::int64_t>& values) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
    os << ')';
    return os.str();
}

}  // namespace

StructureSpec StructureSpec::sequence() { return StructureSpec{}; }

StructureSpec StructureSpec::tree(int branching) {
    StructureSpec spec;
    spec.kind = StructureKind::Tree;
    spec.branching = branching;
    spec.validate();
    return spec;
}

StructureSpec StructureSpec::grid(int axes) {
    StructureSpec spec;
    spec.kind = StructureKind::Grid;
    spec.axes = axes;
    spec.validate();
    return spec;
}

StructureSpec StructureSpec::with_period(std::int64_t n) const {
    StructureSpec spec = *this;
    spec.period = n;
    spec.validate();
    return spec;
}

StructureSpec StructureSpec::absolute() const {
    StructureSpec spec = *this;
    spec.mode = PositionMode::Absolute;
    return spec;
}

int StructureSpec::generator_count() const {
    switch (kind) {
        case StructureKind::Sequence: return 1;
        case StructureKind::Tree: return branching;
        case StructureKind::Grid: return axes;
    }
    return 0;
}

void StructureSpec::validate() const {
    if (kind == StructureKind::Tree && branching < 1) {
        throw Error(ErrorCode::InvalidParameter, "tree branching factor must be at least 1");
    }
    if (kind == StructureKind::Grid && axes < 1) {
        throw Error(ErrorCode::InvalidParameter, "grid must have at least one axis");
    }
    if (period && *period < 1) {
        throw Error(ErrorCode::InvalidParameter, "period must be positive");
    }
}

std::string to_string(const StructureSpec& spec) {
    std::ostringstream os;
    os << kind_name(spec.kind);
    if (spec.kind == StructureKind::Tree) os << "(k=" << spec.branching << ")";
    if (spec.kind == StructureKind::Grid) os << "(axes=" << spec.axes << ")";
    if (spec.period) os << " period=" << *spec.period;
    if (spec.mode == PositionMode::Absolute) os << " absolute";
    return os.str();
}

void check_conforms(const PathWord& p, const StructureSpec& spec) {
    switch (spec.kind) {
        case StructureKind::Sequence:
            if (!std::holds_alternative<SeqPath>(p)) mismatch(spec, path_kind_name(p));
            break;
        case StructureKind::Tree:
            if (const auto* t = std::get_if<TreePath>(&p)) {
                for (TreeLetter letter : t->letters) check_letter(letter, spec.branching);
            } else {
                mismatch(spec, path_kind_name(p));
            }
            break;
        case StructureKind::Grid:
            if (const auto* g = std::get_if<GridPath>(&p)) {
                if (static_cast<int>(g->offsets.size()) != spec.axes) {
                    throw Error(ErrorCode::StructureMismatch, "grid path has the wrong number of axes");
                }
            } else {
                mismatch(spec, path_kind_name(p));
            }
            break;
    }
}

void check_conforms(const AbsolutePosition& x, const StructureSpec& spec) {
    switch (spec.kind) {
        case StructureKind::Sequence:
            if (const auto* s = std::get_if<SeqIndex>(&x)) {
                if (s->index < 0) throw Error(ErrorCode::InvalidPosition, "negative sequence index");
            } else {
                mismatch(spec, "a non-sequence position");
            }
            break;
        case StructureKind::Tree:
            if (const auto* t = std::get_if<TreeNode>(&x)) {
                for (int b : t->branches) {
                    if (b < 1 || b > spec.branching) {
                        std::ostringstream os;
                        os << "branch " << b << " outside 1.." << spec.branching;
                        throw Error(ErrorCode::InvalidGenerator, os.str());
                    }
                }
            } else {
                mismatch(spec, "a non-tree position");
            }
            break;
        case StructureKind::Grid:
            if (const auto* g = std::get_if<GridCoord>(&x)) {
                if (static_cast<int>(g->coords.size()) != spec.axes) {
                    throw Error(ErrorCode::StructureMismatch, "grid coordinate has the wrong number of axes");
                }
                for (auto c : g->coords) {
                    if (c < 0) throw Error(ErrorCode::InvalidPosition, "negative grid coordinate");
                }
            } else {
                mismatch(spec, "a non-grid position");
            }
            break;
    }
}

PathWord identity_path(const StructureSpec& spec) {
    switch (spec.kind) {
        case StructureKind::Sequence: return SeqPath{0};
        case StructureKind::Tree: return TreePath{};
        case StructureKind::Grid: return GridPath{std::vector<std::int64_t>(spec.axes, 0)};
    }
    return SeqPath{0};
}

TreeWordLetters reduce_word(const TreeWordLetters& letters, int branching,
                            std::optional<std::int64_t> period) {
    for (TreeLetter letter : letters) check_letter(letter, branching);

    // Stack of (generator, exponent) runs; adjacent runs never share a generator.
    struct Run {
        int generator;
        std::int64_t exponent;
    };
    std::vector<Run> runs;
    for (TreeLetter letter : letters) {
        const int g = std::abs(letter);
        const std::int64_t step = letter > 0 ? 1 : -1;
        if (!runs.empty() && runs.back().generator == g) {
            runs.back().exponent += step;
        } else {
            runs.push_back({g, step});
        }
        if (period) runs.back().exponent = floor_mod(runs.back().exponent, *period);
        if (runs.back().exponent == 0) runs.pop_back();
    }

    TreeWordLetters reduced;
    for (const Run& run : runs) {
        const TreeLetter letter = run.exponent > 0 ? run.generator : -run.generator;
        reduced.insert(reduced.end(), static_cast<std::size_t>(std::abs(run.exponent)), letter);
    }
    return reduced;
}

PathWord normalize(const PathWord& p, const StructureSpec& spec) {
    check_conforms(p, spec);
    switch (spec.kind) {
        case StructureKind::Sequence: {
            const auto offset = std::get<SeqPath>(p).offset;
            return SeqPath{spec.period ? floor_mod(offset, *spec.period) : offset};
        }
        case StructureKind::Tree:
            return TreePath{reduce_word(std::get<TreePath>(p).letters, spec.branching, spec.period)};
        case StructureKind::Grid: {
            GridPath g = std::get<GridPath>(p);
            if (spec.period) {
                for (auto& o : g.offsets) o = floor_mod(o, *spec.period);
            }
            return g;
        }
    }
    return p;
}

bool equivalent(const PathWord& p, const PathWord& q, const StructureSpec& spec) {
    return normalize(p, spec) == normalize(q, spec);
}

PathWord compose(const PathWord& p, const PathWord& q, const StructureSpec& spec) {
    check_conforms(p, spec);
    check_conforms(q, spec);
    switch (spec.kind) {
        case StructureKind::Sequence:
            return normalize(SeqPath{std::get<SeqPath>(p).offset + std::get<SeqPath>(q).offset}, spec);
        case StructureKind::Tree: {
            TreeWordLetters joined = std::get<TreePath>(p).letters;
            const auto& tail = std::get<TreePath>(q).letters;
            joined.insert(joined.end(), tail.begin(), tail.end());
            return normalize(TreePath{std::move(joined)}, spec);
        }
        case StructureKind::Grid: {
            GridPath sum = std::get<GridPath>(p);
            const auto& other = std::get<GridPath>(q).offsets;
            for (std::size_t i = 0; i < sum.offsets.size(); ++i) sum.offsets[i] += other[i];
            return normalize(sum, spec);
        }
    }
    return p;
}

PathWord invert(const PathWord& p, const StructureSpec& spec) {
    check_conforms(p, spec);
    require_relative(spec);
    switch (spec.kind) {
        case StructureKind::Sequence: return normalize(SeqPath{-std::get<SeqPath>(p).offset}, spec);
        case StructureKind::Tree: {
            TreeWordLetters inverse = std::get<TreePath>(p).letters;
            std::reverse(inverse.begin(), inverse.end());
            for (auto& letter : inverse) letter = -letter;
            return normalize(TreePath{std::move(inverse)}, spec);
        }
        case StructureKind::Grid: {
            GridPath g = std::get<GridPath>(p);
            for (auto& o : g.offsets) o = -o;
            return normalize(g, spec);
        }
    }
    return p;
}

PathWord embed(const AbsolutePosition& x, const StructureSpec& spec) {
    check_conforms(x, spec);
    switch (spec.kind) {
        case StructureKind::Sequence: return normalize(SeqPath{std::get<SeqIndex>(x).index}, spec);
        case StructureKind::Tree: {
            const auto& branches = std::get<TreeNode>(x).branches;
            return normalize(TreePath{TreeWordLetters(branches.begin(), branches.end())}, spec);
        }
        case StructureKind::Grid: return normalize(GridPath{std::get<GridCoord>(x).coords}, spec);
    }
    return identity_path(spec);
}

PathWord relative_path(const AbsolutePosition& source, const AbsolutePosition& target,
                       const StructureSpec& spec) {
    require_relative(spec);
    return compose(invert(embed(source, spec), spec), embed(target, spec), spec);
}

std::int64_t path_length(const PathWord& p, const StructureSpec& spec) {
    const PathWord n = normalize(p, spec);
    switch (spec.kind) {
        case StructureKind::Sequence: {
            const auto offset = std::get<SeqPath>(n).offset;
            return spec.period ? std::min(offset, *spec.period - offset) : std::abs(offset);
        }
        case StructureKind::Tree: return static_cast<std::int64_t>(std::get<TreePath>(n).letters.size());
        case StructureKind::Grid: {
            std::int64_t total = 0;
            for (auto o : std::get<GridPath>(n).offsets) {
                total += spec.period ? std::min(o, *spec.period - o) : std::abs(o);
            }
            return total;
        }
    }
    return 0;
}

PathWord parse_path(std::string_view text, const StructureSpec& spec) {
    PathWord p;
    switch (spec.kind) {
        case StructureKind::Sequence: p = SeqPath{parse_int(trim(text))}; break;
        case StructureKind::Tree: {
            TreeWordLetters letters;
            for (auto v : parse_words(text)) letters.push_back(static_cast<TreeLetter>(v));
            p = TreePath{std::move(letters)};
            break;
        }
        case StructureKind::Grid: p = GridPath{parse_tuple(text)}; break;
    }
    return normalize(p, spec);
}

std::string format_path(const PathWord& p) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SeqPath>) {
                return std::to_string(v.offset);
            } else if constexpr (std::is_same_v<T, TreePath>) {
                std::string out;
                for (std::size_t i = 0; i < v.letters.size(); ++i) {
                    if (i) out += ' ';
                    out += std::to_string(v.letters[i]);
                }
                return out;
            } else {
                return format_tuple(v.offsets);
            }
        },
        p);
}

AbsolutePosition parse_position(std::string_view text, const StructureSpec& spec) {
    AbsolutePosition x;
    const std::string body = trim(text);
    switch (spec.kind) {
        case StructureKind::Sequence: x = SeqIndex{parse_int(body)}; break;
        case StructureKind::Tree: {
            TreeNode node;
            if (body.find(' ') != std::string::npos) {
                for (auto v : parse_words(body)) node.branches.push_back(static_cast<int>(v));
            } else {
                for (char c : body) {
                    if (!std::isdigit(static_cast<unsigned char>(c))) {
                        throw Error(ErrorCode::ParseError, "bad tree position '" + body + "'");
                    }
                    node.branches.push_back(c - '0');
                }
            }
            x = std::move(node);
            break;
        }
        case StructureKind::Grid: x = GridCoord{parse_tuple(body)}; break;
    }
    check_conforms(x, spec);
    return x;
}

std::string format_position(const AbsolutePosition& x) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SeqIndex>) {
                return std::to_string(v.index);
            } else if constexpr (std::is_same_v<T, TreeNode>) {
                const bool compact = std::all_of(v.branches.begin(), v.branches.end(),
                                                 [](int b) { return b >= 1 && b <= 9; });
                std::string out;
                for (std::size_t i = 0; i < v.branches.size(); ++i) {
                    if (i && !compact) out += ' ';
                    out += std::to_string(v.branches[i]);
                }
                return out;
            } else {
                return format_tuple(v.coords);
            }
        },
        x);
}

std::vector<AbsolutePosition> complete_tree(int branching, int depth) {
    std::vector<AbsolutePosition> nodes{TreeNode{}};
    std::size_t level_begin = 0;
    for (int t = 0; t < depth; ++t) {
        const std::size_t level_end = nodes.size();
        for (std::size_t i = level_begin; i < level_end; ++i) {
            for (int b = 1; b <= branching; ++b) {
                TreeNode child = std::get<TreeNode>(nodes[i]);
                child.branches.push_back(b);
                nodes.emplace_back(std::move(child));
            }
        }
        level_begin = level_end;
    }
    return nodes;
}

std::vector<AbsolutePosition> grid_coordinates(const std::vector<std::int64_t>& extents) {
    std::int64_t total = 1;
    for (auto e : extents) {
        if (e < 1) throw Error(ErrorCode::InvalidParameter, "grid extents must be positive");
        total *= e;
    }
    std::vector<AbsolutePosition> coords;
    coords.reserve(static_cast<std::size_t>(total));
    std::vector<std::int64_t> current(extents.size(), 0);
    for (std::int64_t n = 0; n < total; ++n) {
        coords.emplace_back(GridCoord{current});
        for (std::size_t axis = extents.size(); axis-- > 0;) {
            if (++current[axis] < extents[axis]) break;
            current[axis] = 0;
        }
    }
    return coords;
}

}  // namespace ape
