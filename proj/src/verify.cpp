#include "ape/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ape/rope.hpp"

namespace ape {

namespace {

using SuiteFn = double (*)(const VerifyOptions&, Rng&, std::int64_t&);

Index pick_dim(const VerifyOptions& options, const std::vector<Index>& defaults, Rng& rng) {
    const auto& pool = options.dims.empty() ? defaults : options.dims;
    return pool[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

std::vector<StructureSpec> law_structures() {
    return {StructureSpec::sequence(), StructureSpec::tree(2), StructureSpec::tree(3), StructureSpec::grid(2)};
}

double frob(const Matrix& a, const Matrix& b) { return (a - b).norm(); }

double loss(const AttentionBatch& batch, const StructureSpec& spec, const std::vector<GeneratorParam>& params,
            const std::vector<AbsolutePosition>& query_positions, const std::vector<AbsolutePosition>& key_positions,
            const Matrix& upstream) {
    const GroupInterpretation g = GroupInterpretation::from_params(spec, params);
    const PositionTensor ay = build_positions(g, key_positions);
    const Matrix scores = spec.mode == PositionMode::Absolute
                              ? ape_scores_absolute(batch, ay)
                              : ape_scores_fast(batch, build_positions(g, query_positions), ay);
    return (upstream.array() * scores.array()).sum();
}

double suite_orthogonality(const VerifyOptions& options, Rng& rng, std::int64_t& trials) {
    double worst = 0.0;
    for (std::int64_t t = 0; t < options.trials; ++t) {
        for (const auto& spec : law_structures()) {
            const Index d = pick_dim(options, {4, 8}, rng);
            const auto params = random_params(spec, d, rng);
            const GroupInterpretation g = GroupInterpretation::from_params(spec, params);
            for (const auto& w : g.generators()) {
                Matrix m = w.entries();
                if (options.inject_non_orthogonal && t == 0) m *= 1.01;
                worst = std::max(worst, orthogonality_defect(m) / static_cast<double>(m.rows()));
            }
            const PositionTensor tensor = build_positions(g, random_positions(spec, 6, rng));
            worst = std::max(worst, tensor.max_defect() / static_cast<double>(tensor.dim()));
            ++trials;
        }
    }
    return worst;
}

double suite_group_laws(const VerifyOptions& options, Rng& rng, std::int64_t& trials) {
    double worst = 0.0;
    for (std::int64_t t = 0; t < options.trials; ++t) {
        for (const auto& spec : law_structures()) {
            const Index d = pick_dim(options, {4, 8}, rng);
            const GroupInterpretation g = GroupInterpretation::from_params(spec, random_params(spec, d, rng));
            const PathWord p = random_path(spec, rng);
            const PathWord q = random_path(spec, rng);
            const Matrix ip = interpret(p, g).entries();
            const Matrix iq = interpret(q, g).entries();
            const Matrix id = Matrix::Identity(d, d);

            worst = std::max(worst, frob(interpret(compose(p, q, spec), g).entries(), ip * iq));
            worst = std::max(worst, frob(interpret(invert(p, spec), g).entries(), ip.transpose()));
            worst = std::max(worst, frob(interpret(identity_path(spec), g).entries(), id));
            worst = std::max(worst, frob(interpret(compose(p, invert(p, spec), spec), g).entries(), id));
            if (spec.kind == StructureKind::Tree) {
                const auto& word = std::get<TreePath>(p).letters;
                worst = std::max(worst, frob(naive_word_product(word, g), ip));
            }
            ++trials;
        }
    }
    return worst;
}

double suite_contraction(const VerifyOptions& options, Rng& rng, std::int64_t& trials) {
    double worst = 0.0;
    for (std::int64_t t = 0; t < options.trials; ++t) {
        for (const auto& spec : law_structures()) {
            const Index d = pick_dim(options, {4, 8}, rng);
            const Index m = rng.integer(1, 8);
            const Index n = rng.integer(1, 8);
            const GroupInterpretation g = GroupInterpretation::from_params(spec, random_params(spec, d, rng));
            const auto qpos = random_positions(spec, static_cast<std::size_t>(m), rng);
            const auto kpos = random_positions(spec, static_cast<std::size_t>(n), rng);
            const AttentionBatch batch = random_batch(m, n, d, rng);
            const Matrix naive = ape_scores_naive(batch, relative_tensor(g, qpos, kpos));
            const Matrix fast = ape_scores_fast(batch, build_positions(g, qpos), build_positions(g, kpos));
            worst = std::max(worst, (naive - fast).cwiseAbs().maxCoeff());
            ++trials;
        }
    }
    return worst;
}

double suite_rope_equivalence(const VerifyOptions& options, Rng& rng, std::int64_t& trials) {
    double worst = 0.0;
    for (std::int64_t t = 0; t < options.trials; ++t) {
        const Index d = pick_dim(options, {2, 4, 8}, rng);
        const Index m = rng.integer(1, 16);
        const Index n = rng.integer(1, 16);
        const OrthogonalMatrix w = random_special_orthogonal(d, rng);
        const AttentionBatch batch = random_batch(m, n, d, rng);
        worst = std::max(worst, verify_equivalence(batch, w, std::max(m, n) - 1));

        // Angle round trip through a generator and back.
        RotarySpec spec;
        spec.dim = d;
        for (Index i = 0; i < d / 2; ++i) spec.angles.push_back(rng.uniform(0.0, std::numbers::pi));
        const ApeToRope back = ape_to_rope(rope_to_ape(spec).generator);
        auto expected = spec.angles;
        auto recovered = back.rotary.angles;
        std::sort(expected.begin(), expected.end());
        std::sort(recovered.begin(), recovered.end());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const double diff = std::remainder(expected[i] - recovered[i], 2.0 * std::numbers::pi);
            worst = std::max(worst, std::abs(diff));
        }
        ++trials;
    }
    return worst;
}

double suite_gradient(const VerifyOptions& options, Rng& rng, std::int64_t& trials) {
    double worst = 0.0;
    const std::vector<StructureSpec> specs{StructureSpec::sequence(), StructureSpec::grid(2)};
    for (std::int64_t t = 0; t < options.trials; ++t) {
        const StructureSpec& spec = specs[static_cast<std::size_t>(t % 2)];
        const Index d = pick_dim(options, {4}, rng);
        const Index m = rng.integer(1, 4);
        const Index n = rng.integer(1, 4);
        const auto params = random_params(spec, d, rng, 0.5);
        const auto qpos = random_positions(spec, static_cast<std::size_t>(m), rng, 6);
        const auto kpos = random_positions(spec, static_cast<std::size_t>(n), rng, 6);
        const AttentionBatch batch = random_batch(m, n, d, rng);
        const Matrix upstream = rng.matrix(m, n);
        const auto analytic = score_gradient(batch, spec, params, qpos, kpos, upstream);
        const auto numeric = finite_difference_gradient(batch, spec, params, qpos, kpos, upstream);
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            const double scale = std::max(numeric[i].norm(), 1e-12);
            worst = std::max(worst, (analytic[i] - numeric[i]).norm() / scale);
        }
        ++trials;
    }
    return worst;
}

double suite_periodic(const VerifyOptions& options, Rng& /*rng*/, std::int64_t& trials) {
    double worst = 0.0;
    const std::vector<Index> dims = options.dims.empty() ? std::vector<Index>{2, 4, 8} : options.dims;
    for (std::int64_t n = 1; n <= 12; ++n) {
        for (Index d : dims) {
            if (d % 2 != 0) continue;
            const Matrix w = make_periodic_generator(n, d).entries();
            Matrix acc = Matrix::Identity(d, d);
            for (std::int64_t k = 1; k <= n; ++k) {
                acc = (acc * w).eval();
                const double distance = (acc - Matrix::Identity(d, d)).norm();
                if (k == n) {
                    worst = std::max(worst, distance);
                } else if (distance <= 1e-3) {
                    worst = std::max(worst, 1.0);  // premature return to the identity
                }
            }
            ++trials;
        }
    }
    return worst;
}

double suite_complexity(const VerifyOptions& options, Rng& rng, std::int64_t& trials) {
    double worst = 0.0;
    const Index d = pick_dim(options, {4}, rng);
    const OrthogonalMatrix w = random_special_orthogonal(d, rng);
    for (std::int64_t p : {1, 10, 100, 1000, 10000}) {
        const auto count = seq_powers(w, p).products();
        worst = std::max(worst, static_cast<double>(count) - static_cast<double>(ladder_product_bound(p)));
        ++trials;
    }
    for (int kappa : {2, 3}) {
        const StructureSpec spec = StructureSpec::tree(kappa);
        const GroupInterpretation g = GroupInterpretation::from_params(spec, random_params(spec, d, rng));
        for (int depth : {1, 3, 5}) {
            const auto count = tree_positions(g, complete_tree(kappa, depth)).products();
            worst = std::max(worst, static_cast<double>(count) - static_cast<double>(depth * kappa));
            ++trials;
        }
    }
    return std::max(worst, 0.0);
}

struct SuiteEntry {
    const char* name;
    SuiteFn fn;
    double tolerance;
};

const std::vector<SuiteEntry>& registry() {
    static const std::vector<SuiteEntry> entries{
        {"orthogonality", suite_orthogonality, 1e-9},  {"group-laws", suite_group_laws, 1e-9},
        {"contraction", suite_contraction, 1e-8},      {"rope-equiv", suite_rope_equivalence, 1e-8},
        {"gradient", suite_gradient, 1e-4},            {"periodic", suite_periodic, 1e-9},
        {"complexity", suite_complexity, 0.0},
    };
    return entries;
}

}  // namespace

std::vector<std::string> suite_names() {
    std::vector<std::string> names;
    for (const auto& e : registry()) names.emplace_back(e.name);
    return names;
}

SuiteReport run_suite(const std::string& name, const VerifyOptions& options) {
    for (const auto& entry : registry()) {
        if (name != entry.name) continue;
        Rng rng(options.seed);
        SuiteReport report;
        report.suite = name;
        report.tolerance = options.tolerance_override.value_or(entry.tolerance);
        report.max_deviation = entry.fn(options, rng, report.trials);
        report.pass = report.max_deviation <= report.tolerance;
        return report;
    }
    throw Error(ErrorCode::InvalidParameter, "unknown suite '" + name + "'");
}

std::string to_json(const std::vector<SuiteReport>& reports) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        out.push_back({{"suite", r.suite},
                       {"trials", r.trials},
                       {"max_deviation", r.max_deviation},
                       {"tolerance", r.tolerance},
                       {"pass", r.pass}});
    }
    return out.dump(2);
}

PathWord random_path(const StructureSpec& spec, Rng& rng, int max_length, std::int64_t max_offset) {
    switch (spec.kind) {
        case StructureKind::Sequence: return SeqPath{rng.integer(-max_offset, max_offset)};
        case StructureKind::Tree: {
            TreeWordLetters word;
            const auto length = rng.integer(0, max_length);
            for (std::int64_t i = 0; i < length; ++i) {
                const auto g = static_cast<TreeLetter>(rng.integer(1, spec.branching));
                word.push_back(rng.unit() < 0.5 ? g : -g);
            }
            return TreePath{std::move(word)};
        }
        case StructureKind::Grid: {
            GridPath path;
            for (int a = 0; a < spec.axes; ++a) path.offsets.push_back(rng.integer(-max_offset, max_offset));
            return path;
        }
    }
    return identity_path(spec);
}

std::vector<AbsolutePosition> random_positions(const StructureSpec& spec, std::size_t count, Rng& rng,
                                               std::int64_t max_index, int max_depth) {
    std::set<AbsolutePosition> seen;
    std::vector<AbsolutePosition> out;
    // Small spaces (e.g. a shallow binary tree) could run out of distinct values.
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > 100000) throw Error(ErrorCode::InvalidParameter, "position space too small");
        AbsolutePosition x;
        switch (spec.kind) {
            case StructureKind::Sequence: x = SeqIndex{rng.integer(0, max_index - 1)}; break;
            case StructureKind::Tree: {
                TreeNode node;
                const auto depth = rng.integer(0, max_depth);
                for (std::int64_t i = 0; i < depth; ++i) {
                    node.branches.push_back(static_cast<int>(rng.integer(1, spec.branching)));
                }
                x = std::move(node);
                break;
            }
            case StructureKind::Grid: {
                GridCoord c;
                for (int a = 0; a < spec.axes; ++a) c.coords.push_back(rng.integer(0, max_index - 1));
                x = std::move(c);
                break;
            }
        }
        if (seen.insert(x).second) out.push_back(std::move(x));
    }
    return out;
}

Matrix naive_word_product(const TreeWordLetters& word, const GroupInterpretation& g) {
    const Index d = g.dim();
    Matrix m = Matrix::Identity(d, d);
    for (TreeLetter letter : word) {
        const Matrix& w = g.generator(std::abs(letter) - 1).entries();
        m = letter > 0 ? Matrix(m * w) : Matrix(m * w.transpose());
    }
    return m;
}

std::vector<Matrix> finite_difference_gradient(const AttentionBatch& batch, const StructureSpec& spec,
                                               const std::vector<GeneratorParam>& params,
                                               const std::vector<AbsolutePosition>& query_positions,
                                               const std::vector<AbsolutePosition>& key_positions,
                                               const Matrix& upstream, double step) {
    std::vector<Matrix> grads;
    for (std::size_t g = 0; g < params.size(); ++g) {
        const Index b = params[g].dim();
        Matrix grad(b, b);
        for (Index i = 0; i < b; ++i) {
            for (Index j = 0; j < b; ++j) {
                auto plus = params;
                auto minus = params;
                Matrix up = params[g].entries();
                Matrix down = params[g].entries();
                up(i, j) += step;
                down(i, j) -= step;
                plus[g] = GeneratorParam(std::move(up));
                minus[g] = GeneratorParam(std::move(down));
                grad(i, j) = (loss(batch, spec, plus, query_positions, key_positions, upstream) -
                              loss(batch, spec, minus, query_positions, key_positions, upstream)) /
                             (2.0 * step);
            }
        }
        grads.push_back(std::move(grad));
    }
    return grads;
}

std::size_t ladder_product_bound(std::int64_t p) {
    if (p <= 1) return 1;
    const auto bits = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(p))));
    return 2 * bits + 1;
}

}  // namespace ape
