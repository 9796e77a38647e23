#include <gtest/gtest.h>

#include "ape/path.hpp"
#include "ape/random.hpp"
#include "ape/verify.hpp"

using namespace ape;

namespace {

// Single left-to-right cancellation pass, repeated until nothing changes.
TreeWordLetters fixpoint_reduce(TreeWordLetters w) {
    for (bool changed = true; changed;) {
        changed = false;
        TreeWordLetters next;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (i + 1 < w.size() && w[i] == -w[i + 1]) {
                ++i;
                changed = true;
                continue;
            }
            next.push_back(w[i]);
        }
        w = std::move(next);
    }
    return w;
}

template <class T>
const T& as(const PathWord& p) {
    return std::get<T>(p);
}

}  // namespace

TEST(Compose, Examples) {
    EXPECT_EQ(as<SeqPath>(compose(SeqPath{3}, SeqPath{-5}, StructureSpec::sequence())).offset, -2);
    EXPECT_EQ(as<TreePath>(compose(TreePath{{1}}, TreePath{{-1, 2}}, StructureSpec::tree(2))).letters,
              (TreeWordLetters{2}));
    EXPECT_EQ(as<GridPath>(compose(GridPath{{2, -1}}, GridPath{{-2, 4}}, StructureSpec::grid(2))).offsets,
              (std::vector<std::int64_t>{0, 3}));
}

TEST(Compose, StructureMismatch) {
    try {
        compose(SeqPath{1}, TreePath{{1}}, StructureSpec::sequence());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StructureMismatch);
    }
    EXPECT_THROW(compose(GridPath{{1}}, GridPath{{1, 2}}, StructureSpec::grid(2)), Error);
}

TEST(Invert, Examples) {
    EXPECT_EQ(as<SeqPath>(invert(SeqPath{7}, StructureSpec::sequence())).offset, -7);
    EXPECT_EQ(as<TreePath>(invert(TreePath{{1, 2}}, StructureSpec::tree(2))).letters, (TreeWordLetters{-2, -1}));
    EXPECT_EQ(as<GridPath>(invert(GridPath{{3, -2}}, StructureSpec::grid(2))).offsets,
              (std::vector<std::int64_t>{-3, 2}));
}

TEST(Invert, AbsoluteModeHasNoInverse) {
    try {
        invert(SeqPath{2}, StructureSpec::sequence().absolute());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InversionUnavailable);
    }
    EXPECT_THROW(relative_path(SeqIndex{1}, SeqIndex{4}, StructureSpec::sequence().absolute()), Error);
}

TEST(ReduceWord, Examples) {
    EXPECT_TRUE(reduce_word({1, -1}, 2).empty());
    EXPECT_EQ(reduce_word({2, 1, -1, -2, 2}, 2), (TreeWordLetters{2}));
}

TEST(ReduceWord, InvalidGenerator) {
    try {
        reduce_word({1, 3}, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidGenerator);
    }
    EXPECT_THROW(reduce_word({0}, 2), Error);
}

TEST(ReduceWord, MatchesFixpointOracle) {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        TreeWordLetters w;
        for (int i = 0; i < 40; ++i) {
            const int g = static_cast<int>(rng.integer(1, 3));
            w.push_back(rng.integer(0, 1) ? g : -g);
        }
        EXPECT_EQ(reduce_word(w, 3), fixpoint_reduce(w));
    }
}

TEST(ReduceWord, PeriodicRuns) {
    EXPECT_TRUE(reduce_word({1, 1, 1}, 2, 3).empty());
    EXPECT_EQ(reduce_word({-1}, 2, 3), (TreeWordLetters{1, 1}));
    EXPECT_EQ(reduce_word({2, 1, 1, 1, 2}, 2, 3), (TreeWordLetters{2, 2}));
}

TEST(RelativePath, AnchorExamples) {
    EXPECT_EQ(as<SeqPath>(relative_path(SeqIndex{1}, SeqIndex{4}, StructureSpec::sequence())).offset, 3);

    const auto tree = StructureSpec::tree(2);
    const auto t = relative_path(parse_position("21", tree), parse_position("12", tree), tree);
    EXPECT_EQ(as<TreePath>(t).letters, (TreeWordLetters{-1, -2, 1, 2}));

    const auto grid = StructureSpec::grid(2);
    EXPECT_EQ(as<GridPath>(relative_path(GridCoord{{3, 0}}, GridCoord{{1, 3}}, grid)).offsets,
              (std::vector<std::int64_t>{-2, 3}));
}

TEST(RelativePath, SharedPrefixCancels) {
    const auto tree = StructureSpec::tree(3);
    const auto t = relative_path(TreeNode{{1, 2, 3}}, TreeNode{{1, 2, 1, 1}}, tree);
    EXPECT_EQ(as<TreePath>(t).letters, (TreeWordLetters{-3, 1, 1}));
}

TEST(GroupLaws, RandomProperties) {
    Rng rng(102);
    const std::vector<StructureSpec> specs = {StructureSpec::sequence(), StructureSpec::tree(2),
                                              StructureSpec::tree(3), StructureSpec::grid(2),
                                              StructureSpec::sequence().with_period(7),
                                              StructureSpec::tree(2).with_period(4)};
    for (const auto& spec : specs) {
        const PathWord e = identity_path(spec);
        for (int trial = 0; trial < 100; ++trial) {
            const PathWord p = random_path(spec, rng);
            const PathWord q = random_path(spec, rng);
            const PathWord r = random_path(spec, rng);
            EXPECT_TRUE(equivalent(compose(compose(p, q, spec), r, spec), compose(p, compose(q, r, spec), spec), spec))
                << to_string(spec);
            EXPECT_TRUE(equivalent(compose(p, e, spec), p, spec));
            EXPECT_TRUE(equivalent(compose(e, p, spec), p, spec));
            EXPECT_TRUE(equivalent(compose(p, invert(p, spec), spec), e, spec));
            EXPECT_TRUE(equivalent(invert(invert(p, spec), spec), p, spec));
            EXPECT_TRUE(equivalent(invert(compose(p, q, spec), spec),
                                   compose(invert(q, spec), invert(p, spec), spec), spec));
        }
    }
}

TEST(RelativePath, Coherence) {
    Rng rng(103);
    for (const auto& spec : {StructureSpec::sequence(), StructureSpec::tree(2), StructureSpec::grid(2)}) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto xs = random_positions(spec, 3, rng);
            const PathWord xy = relative_path(xs[0], xs[1], spec);
            const PathWord yz = relative_path(xs[1], xs[2], spec);
            EXPECT_TRUE(equivalent(compose(xy, yz, spec), relative_path(xs[0], xs[2], spec), spec));
            EXPECT_TRUE(equivalent(relative_path(xs[0], xs[0], spec), identity_path(spec), spec));
        }
    }
}

TEST(Normalize, PeriodicOffsets) {
    const auto spec = StructureSpec::sequence().with_period(6);
    EXPECT_EQ(as<SeqPath>(normalize(SeqPath{-1}, spec)).offset, 5);
    EXPECT_EQ(as<SeqPath>(normalize(SeqPath{13}, spec)).offset, 1);
    EXPECT_TRUE(equivalent(SeqPath{6}, SeqPath{0}, spec));
    EXPECT_FALSE(equivalent(SeqPath{6}, SeqPath{0}, StructureSpec::sequence()));
}

TEST(PathLength, Examples) {
    EXPECT_EQ(path_length(SeqPath{-7}, StructureSpec::sequence()), 7);
    EXPECT_EQ(path_length(SeqPath{5}, StructureSpec::sequence().with_period(6)), 1);
    EXPECT_EQ(path_length(TreePath{{1, -1, 2}}, StructureSpec::tree(2)), 1);
    EXPECT_EQ(path_length(GridPath{{-2, 3}}, StructureSpec::grid(2)), 5);
}

TEST(Conformance, Errors) {
    EXPECT_THROW(check_conforms(TreeNode{{3}}, StructureSpec::tree(2)), Error);
    EXPECT_THROW(check_conforms(SeqIndex{-1}, StructureSpec::sequence()), Error);
    EXPECT_THROW(check_conforms(GridCoord{{1}}, StructureSpec::grid(2)), Error);
    EXPECT_NO_THROW(check_conforms(GridCoord{{1, 0}}, StructureSpec::grid(2)));
    EXPECT_THROW(StructureSpec::tree(0).validate(), Error);
    EXPECT_THROW(StructureSpec::sequence().with_period(0).validate(), Error);
}

TEST(Notation, RoundTrip) {
    const auto tree = StructureSpec::tree(2);
    EXPECT_EQ(format_path(parse_path("1 2 -1", tree)), "1 2 -1");
    EXPECT_EQ(as<TreePath>(parse_path("", tree)).letters, TreeWordLetters{});
    EXPECT_EQ(as<GridPath>(parse_path("(-2,3)", StructureSpec::grid(2))).offsets,
              (std::vector<std::int64_t>{-2, 3}));
    EXPECT_EQ(as<SeqPath>(parse_path("-7", StructureSpec::sequence())).offset, -7);
    EXPECT_EQ(std::get<TreeNode>(parse_position("21", tree)).branches, (std::vector<int>{2, 1}));
    EXPECT_EQ(std::get<TreeNode>(parse_position("2 1", tree)).branches, (std::vector<int>{2, 1}));
    EXPECT_THROW(parse_path("1 x", tree), Error);
    EXPECT_THROW(parse_path("(1,2", StructureSpec::grid(2)), Error);
}

TEST(Enumeration, CompleteTreeAndGrid) {
    const auto nodes = complete_tree(2, 3);
    ASSERT_EQ(nodes.size(), 15u);
    EXPECT_TRUE(std::get<TreeNode>(nodes[0]).branches.empty());
    EXPECT_EQ(std::get<TreeNode>(nodes[1]).branches, (std::vector<int>{1}));
    EXPECT_EQ(complete_tree(3, 2).size(), 13u);

    const auto coords = grid_coordinates({3, 4});
    ASSERT_EQ(coords.size(), 12u);
    EXPECT_EQ(std::get<GridCoord>(coords[1]).coords, (std::vector<std::int64_t>{0, 1}));
    EXPECT_EQ(std::get<GridCoord>(coords[11]).coords, (std::vector<std::int64_t>{2, 3}));
}
