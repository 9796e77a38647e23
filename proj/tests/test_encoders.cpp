#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "ape/encoders.hpp"
#include "ape/random.hpp"
#include "ape/verify.hpp"

using namespace ape;

namespace {

Matrix naive_power(const Matrix& w, std::int64_t k) {
    Matrix r = Matrix::Identity(w.rows(), w.cols());
    for (std::int64_t i = 0; i < k; ++i) r = (r * w).eval();
    return r;
}

Matrix naive_block_diag(const Matrix& a, const Matrix& b) {
    Matrix m = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) m(i, j) = a(i, j);
    for (Index i = 0; i < b.rows(); ++i)
        for (Index j = 0; j < b.cols(); ++j) m(a.rows() + i, a.cols() + j) = b(i, j);
    return m;
}

GroupInterpretation random_interpretation(const StructureSpec& spec, Index dim, std::uint64_t seed) {
    Rng rng(seed);
    return GroupInterpretation::from_params(spec, random_params(spec, dim, rng));
}

}  // namespace

TEST(Interpret, EmptyPathIsIdentity) {
    const auto g = random_interpretation(StructureSpec::tree(2), 4, 1);
    EXPECT_EQ(interpret(identity_path(g.spec()), g).entries(), Matrix::Identity(4, 4));
}

TEST(Interpret, CancellingTreeWord) {
    const auto g = random_interpretation(StructureSpec::tree(2), 4, 2);
    const Matrix m = interpret(TreePath{{-2, -1, 1, 2}}, g).entries();
    EXPECT_LE((m - Matrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(Interpret, OffsetMatchesNaiveProduct) {
    const auto g = random_interpretation(StructureSpec::sequence(), 6, 3);
    const Matrix& w = g.generator(0).entries();
    EXPECT_LE((interpret(SeqPath{13}, g).entries() - naive_power(w, 13)).norm(), 1e-12);
    EXPECT_LE((interpret(SeqPath{-13}, g).entries() - naive_power(w.transpose(), 13)).norm(), 1e-12);
}

TEST(Interpret, TreeWordMatchesLetterProduct) {
    Rng rng(4);
    const auto g = random_interpretation(StructureSpec::tree(3), 4, 4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto word = std::get<TreePath>(random_path(g.spec(), rng));
        EXPECT_LE((interpret(word, g).entries() - naive_word_product(word.letters, g)).norm(), 1e-10);
    }
}

TEST(Interpret, Homomorphism) {
    Rng rng(5);
    for (const auto& spec : {StructureSpec::sequence(), StructureSpec::tree(2), StructureSpec::grid(2)}) {
        const auto g = random_interpretation(spec, 8, 6);
        for (int trial = 0; trial < 30; ++trial) {
            const PathWord p = random_path(spec, rng);
            const PathWord q = random_path(spec, rng);
            const Matrix pq = interpret(compose(p, q, spec), g).entries();
            EXPECT_LE((pq - interpret(p, g).entries() * interpret(q, g).entries()).norm(), 1e-9);
            EXPECT_LE((interpret(invert(p, spec), g).entries() - interpret(p, g).entries().transpose()).norm(), 1e-9);
        }
    }
}

TEST(SeqPowers, IdentityGenerator) {
    const PositionTensor t = seq_powers(OrthogonalMatrix::identity(3), 5);
    ASSERT_EQ(t.count(), 6u);
    for (const auto& s : t.slices()) EXPECT_EQ(s, Matrix::Identity(3, 3));
}

TEST(SeqPowers, SixthPowerOfSixthTurn) {
    const PositionTensor t = seq_powers(OrthogonalMatrix(planar_rotation(std::numbers::pi / 3)), 6);
    EXPECT_LE((t.slice(6) - Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(SeqPowers, MatchesNaivePowers) {
    Rng rng(7);
    const OrthogonalMatrix w = random_special_orthogonal(8, rng);
    const PositionTensor t = seq_powers(w, 37);
    ASSERT_EQ(t.count(), 38u);
    for (std::int64_t k = 0; k <= 37; ++k) {
        EXPECT_LE((t.slice(static_cast<std::size_t>(k)) - naive_power(w.entries(), k)).norm(), 1e-10) << k;
        EXPECT_EQ(t.row_of(SeqIndex{k}), static_cast<std::size_t>(k));
    }
    EXPECT_LE(t.max_defect(), 1e-9 * 8);
}

TEST(SeqPowers, ProductCountWithinLogBound) {
    for (std::int64_t p : {0, 1, 2, 3, 10, 100, 1000, 1024, 10000}) {
        const PositionTensor t = seq_powers(OrthogonalMatrix::identity(2), p);
        EXPECT_LE(t.products(), ladder_product_bound(p)) << p;
    }
    EXPECT_EQ(ladder_product_bound(1024), 21u);
    EXPECT_EQ(ladder_product_bound(1), 1u);
}

TEST(Subsampled, Rows) {
    Rng rng(8);
    const auto g = random_interpretation(StructureSpec::sequence(), 4, 9);
    const Matrix& w = g.generator(0).entries();
    const PositionTensor only = subsampled_positions(g, {0});
    EXPECT_EQ(only.slice(0), Matrix::Identity(4, 4));

    const PositionTensor full = seq_powers(g.generator(0), 4);
    const PositionTensor even = subsampled_positions(g, {0, 2, 4});
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE((even.slice(i) - full.slice(2 * i)).norm(), 1e-13);

    const std::vector<std::int64_t> idx = {3, 17, 5};
    const PositionTensor sub = subsampled_positions(g, idx);
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_LE((sub.slice(i) - naive_power(w, idx[i])).norm(), 1e-10);
    EXPECT_THROW(subsampled_positions(g, {2, 2}), Error);
}

TEST(TreePositions, RootAndWord) {
    const auto g = random_interpretation(StructureSpec::tree(2), 4, 10);
    const PositionTensor t = tree_positions(g, {TreeNode{}, TreeNode{{1, 2}}});
    EXPECT_EQ(t.slice(0), Matrix::Identity(4, 4));
    EXPECT_LE((t.slice(1) - g.generator(0).entries() * g.generator(1).entries()).norm(), 1e-14);
}

TEST(TreePositions, CompleteBinaryTreeMatchesNaive) {
    const auto g = random_interpretation(StructureSpec::tree(2), 6, 11);
    const auto nodes = complete_tree(2, 3);
    const PositionTensor t = tree_positions(g, nodes);
    ASSERT_EQ(t.count(), 15u);
    for (std::size_t r = 0; r < nodes.size(); ++r) {
        Matrix naive = Matrix::Identity(6, 6);
        for (int b : std::get<TreeNode>(nodes[r]).branches) naive = (naive * g.generator(b - 1).entries()).eval();
        EXPECT_LE((t.slice(r) - naive).norm(), 1e-12);
    }
    EXPECT_LE(t.products(), 3u * 2u);
}

TEST(TreePositions, BatchedProductBound) {
    for (int k : {2, 3}) {
        for (int depth : {1, 2, 4}) {
            const auto g = random_interpretation(StructureSpec::tree(k), 2, 12);
            EXPECT_LE(tree_positions(g, complete_tree(k, depth)).products(), static_cast<std::size_t>(k * depth));
        }
    }
}

TEST(TreePositions, BranchOutOfRange) {
    const auto g = random_interpretation(StructureSpec::tree(2), 4, 13);
    try {
        tree_positions(g, {TreeNode{{1, 3}}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidGenerator);
    }
}

TEST(DirectSum, Examples) {
    EXPECT_EQ(direct_sum(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), Matrix::Identity(5, 5));
    const Matrix a = planar_rotation(0.3);
    const Matrix b = planar_rotation(1.7);
    EXPECT_EQ(direct_sum(a, b), naive_block_diag(a, b));
}

TEST(DirectSum, Properties) {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a1 = random_special_orthogonal(3, rng).entries();
        const Matrix a2 = random_special_orthogonal(3, rng).entries();
        const Matrix b1 = random_special_orthogonal(2, rng).entries();
        const Matrix b2 = random_special_orthogonal(2, rng).entries();
        EXPECT_LE((direct_sum(a1, b1) * direct_sum(a2, b2) - direct_sum(a1 * a2, b1 * b2)).norm(), 1e-14);
        EXPECT_LE((direct_sum(a1, b1).transpose() - direct_sum(a1.transpose(), b1.transpose())).norm(), 0.0);
        EXPECT_LE(orthogonality_defect(direct_sum(a1, b1)), 1e-10 * 5);
    }
}

TEST(GridPositions, SingleCell) {
    const auto g = random_interpretation(StructureSpec::grid(2), 4, 15);
    const PositionTensor t = grid_positions(g, {1, 1});
    ASSERT_EQ(t.count(), 1u);
    EXPECT_EQ(t.slice(0), Matrix::Identity(4, 4));
}

TEST(GridPositions, CoordinateIsDirectSumOfPowers) {
    const auto g = random_interpretation(StructureSpec::grid(2), 6, 16);
    const Matrix& h = g.generator(0).entries();
    const Matrix& w = g.generator(1).entries();
    const PositionTensor t = grid_positions_at(g, {GridCoord{{2, 3}}});
    EXPECT_LE((t.slice(0) - naive_block_diag(naive_power(h, 2), naive_power(w, 3))).norm(), 1e-12);
}

TEST(GridPositions, FullGridMatchesNaive) {
    const auto g = random_interpretation(StructureSpec::grid(2), 8, 17);
    const PositionTensor t = grid_positions(g, {3, 4});
    ASSERT_EQ(t.count(), 12u);
    for (std::int64_t x = 0; x < 3; ++x) {
        for (std::int64_t y = 0; y < 4; ++y) {
            const Matrix naive =
                naive_block_diag(naive_power(g.generator(0).entries(), x), naive_power(g.generator(1).entries(), y));
            EXPECT_LE((t.slice(t.row_of(GridCoord{{x, y}})) - naive).norm(), 1e-12);
            EXPECT_EQ(t.row_of(GridCoord{{x, y}}), static_cast<std::size_t>(x * 4 + y));
        }
    }
}

TEST(GridPositions, SplitErrors) {
    try {
        split_dimension(7, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionSplitError);
    }
    Rng rng(18);
    EXPECT_THROW(random_params(StructureSpec::grid(2), 5, rng), Error);
    EXPECT_EQ(split_dimension(8, 2), 4);
}

TEST(Periodic, Examples) {
    EXPECT_EQ(make_periodic_generator(1, 4).entries(), Matrix::Identity(4, 4));
    EXPECT_LE((make_periodic_generator(6, 2).entries() - planar_rotation(std::numbers::pi / 3)).norm(), 1e-15);
    const Matrix w = make_periodic_generator(5, 4).entries();
    EXPECT_LE((naive_power(w, 5) - Matrix::Identity(4, 4)).norm(), 1e-9);
    for (int k = 1; k < 5; ++k) EXPECT_GT((naive_power(w, k) - Matrix::Identity(4, 4)).norm(), 1e-3);
    EXPECT_THROW(make_periodic_generator(4, 3), Error);
    EXPECT_THROW(make_periodic_generator(0, 2), Error);
}

TEST(Periodic, InterpretationChecksPeriod) {
    const auto spec = StructureSpec::sequence().with_period(6);
    const GroupInterpretation g(spec, {make_periodic_generator(6, 4)});
    EXPECT_LE((interpret(SeqPath{-1}, g).entries() - interpret(SeqPath{5}, g).entries()).norm(), 1e-12);
    Rng rng(19);
    EXPECT_THROW(GroupInterpretation(spec, {random_special_orthogonal(4, rng)}), Error);
}

TEST(GroupInterpretation, Validation) {
    Rng rng(20);
    EXPECT_THROW(GroupInterpretation(StructureSpec::tree(2), {random_special_orthogonal(4, rng)}), Error);
    EXPECT_THROW(GroupInterpretation(StructureSpec::tree(2),
                                     {random_special_orthogonal(4, rng), random_special_orthogonal(3, rng)}),
                 Error);
}

TEST(PositionTensor, RejectsBadSlicesAndDuplicates) {
    try {
        PositionTensor({Matrix(1.1 * Matrix::Identity(2, 2))}, {SeqIndex{0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidPositionTensor);
    }
    try {
        PositionTensor({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, {SeqIndex{0}, SeqIndex{0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidPosition);
    }
}

TEST(PositionTensor, Gather) {
    Rng rng(21);
    const PositionTensor t = seq_powers(random_special_orthogonal(3, rng), 6);
    const PositionTensor sub = t.gather({SeqIndex{5}, SeqIndex{1}});
    EXPECT_EQ(sub.slice(0), t.slice(5));
    EXPECT_EQ(sub.slice(1), t.slice(1));
    EXPECT_THROW(t.gather({SeqIndex{7}}), Error);
}

TEST(Dump, RoundTripIsLossless) {
    Rng rng(22);
    const PositionTensor t = seq_powers(random_special_orthogonal(3, rng), 4);
    std::stringstream buffer;
    write_dump(buffer, t);
    const std::string bytes = buffer.str();
    EXPECT_EQ(bytes.substr(0, bytes.find('\n') + 1),
              "{\"nu\": 5, \"dim\": 3, \"order\": \"row-major\", \"dtype\": \"f64le\"}\n");
    const PositionTensor back = read_dump(buffer);
    ASSERT_EQ(back.count(), t.count());
    for (std::size_t i = 0; i < t.count(); ++i) EXPECT_EQ(back.slice(i), t.slice(i));

    std::stringstream again;
    write_dump(again, back);
    EXPECT_EQ(again.str(), bytes);
}

TEST(Dump, RejectsTruncatedPayload) {
    std::stringstream buffer;
    write_dump(buffer, seq_powers(OrthogonalMatrix::identity(2), 1));
    std::string bytes = buffer.str();
    bytes.resize(bytes.size() - 8);
    std::stringstream cut(bytes);
    EXPECT_THROW(read_dump(cut), Error);
}
