// Command-line front end: gen, verify, convert, bench.
//
// Exit codes: 0 success, 1 verification failure, 2 usage error,
// 3 mathematical precondition failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "ape/encoders.hpp"
#include "ape/rope.hpp"
#include "ape/verify.hpp"

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMath = 3;

struct GenConfig {
    std::string kind;
    ape::Index dim = 4;
    std::int64_t max_pos = 0;
    int branching = 2;
    int depth = 0;
    int axes = 2;
    std::vector<std::int64_t> extents;
    std::int64_t period = 0;
    std::uint64_t seed = 0;
    std::string init = "random";
    double scale = 1.0;
    std::string out = "positions.bin";
};

struct VerifyConfig {
    std::vector<std::string> suites;
    std::vector<ape::Index> dims;
    std::int64_t trials = 100;
    std::uint64_t seed = 0x5eed;
    std::optional<double> tolerance;
    bool inject_fault = false;
    std::string out;
};

struct ConvertConfig {
    std::string in;
    std::string out;
    std::size_t slice = 0;
};

struct BenchConfig {
    ape::Index dim = 64;
    bool large = false;
    std::uint64_t seed = 0;
};

// Errors that describe a bad request rather than a bad matrix.
bool is_usage_error(ape::ErrorCode code) {
    switch (code) {
        case ape::ErrorCode::StructureMismatch:
        case ape::ErrorCode::InvalidGenerator:
        case ape::ErrorCode::DimensionSplitError:
        case ape::ErrorCode::InvalidPosition:
        case ape::ErrorCode::ParseError:
        case ape::ErrorCode::InvalidParameter:
            return true;
        default:
            return false;
    }
}

ape::StructureSpec spec_from(const GenConfig& cfg) {
    ape::StructureSpec spec;
    if (cfg.kind == "seq") {
        spec = ape::StructureSpec::sequence();
    } else if (cfg.kind == "tree") {
        spec = ape::StructureSpec::tree(cfg.branching);
    } else if (cfg.kind == "grid") {
        spec = ape::StructureSpec::grid(cfg.axes);
    } else {
        throw ape::Error(ape::ErrorCode::InvalidParameter, "unknown kind '" + cfg.kind + "'");
    }
    if (cfg.period > 0) spec = spec.with_period(cfg.period);
    return spec;
}

std::vector<ape::OrthogonalMatrix> make_generators(const ape::StructureSpec& spec, const GenConfig& cfg) {
    const ape::Index block = spec.kind == ape::StructureKind::Grid ? ape::split_dimension(cfg.dim, spec.axes) : cfg.dim;
    std::vector<ape::OrthogonalMatrix> generators;
    ape::Rng rng(cfg.seed);
    for (int i = 0; i < spec.generator_count(); ++i) {
        if (spec.period) {
            generators.push_back(ape::make_periodic_generator(*spec.period, block));
        } else if (cfg.init == "random") {
            generators.push_back(ape::generator_from_param(ape::random_param(block, rng, cfg.scale)));
        } else if (cfg.init == "rope") {
            generators.push_back(ape::rope_to_ape(ape::RotarySpec::ladder(block)).generator);
        } else if (cfg.init == "near-identity") {
            generators.push_back(ape::generator_from_param(ape::near_identity_param(block, rng)));
        } else {
            throw ape::Error(ape::ErrorCode::InvalidParameter, "unknown init '" + cfg.init + "'");
        }
    }
    return generators;
}

int run_gen(const GenConfig& cfg) {
    const ape::StructureSpec spec = spec_from(cfg);
    const ape::GroupInterpretation g(spec, make_generators(spec, cfg));

    std::optional<ape::PositionTensor> tensor;
    switch (spec.kind) {
        case ape::StructureKind::Sequence:
            if (cfg.max_pos < 0) throw ape::Error(ape::ErrorCode::InvalidParameter, "--max-pos must be >= 0");
            tensor = ape::seq_powers(g.generator(0), cfg.max_pos);
            break;
        case ape::StructureKind::Tree:
            if (cfg.depth < 0) throw ape::Error(ape::ErrorCode::InvalidParameter, "--depth must be >= 0");
            tensor = ape::tree_positions(g, ape::complete_tree(cfg.branching, cfg.depth));
            break;
        case ape::StructureKind::Grid:
            tensor = ape::grid_positions(g, cfg.extents);
            break;
    }

    std::ofstream out(cfg.out, std::ios::binary);
    if (!out) {
        std::cerr << "cannot open " << cfg.out << " for writing\n";
        return kExitUsage;
    }
    ape::write_dump(out, *tensor);
    std::cout << "nu=" << tensor->count() << " dim=" << tensor->dim() << " products=" << tensor->products() << "\n";
    return 0;
}

int run_verify(const VerifyConfig& cfg) {
    ape::VerifyOptions options;
    options.seed = cfg.seed;
    options.trials = cfg.trials;
    options.dims = cfg.dims;
    options.tolerance_override = cfg.tolerance;
    options.inject_non_orthogonal = cfg.inject_fault;

    const auto names = cfg.suites.empty() ? ape::suite_names() : cfg.suites;
    std::vector<ape::SuiteReport> reports;
    bool all_pass = true;
    for (const auto& name : names) {
        reports.push_back(ape::run_suite(name, options));
        if (!reports.back().pass) {
            all_pass = false;
            std::cerr << "FAIL " << name << ": max deviation " << reports.back().max_deviation << " > tolerance "
                      << reports.back().tolerance << "\n";
        }
    }
    const std::string json = ape::to_json(reports);
    if (cfg.out.empty()) {
        std::cout << json << "\n";
    } else {
        std::ofstream(cfg.out) << json << "\n";
    }
    return all_pass ? 0 : kExitVerifyFailed;
}

nlohmann::json matrix_json(const ape::Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (ape::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (ape::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

int run_convert(const ConvertConfig& cfg) {
    std::ifstream in(cfg.in, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open " << cfg.in << "\n";
        return kExitUsage;
    }
    const int first = in.peek();
    nlohmann::ordered_json report;

    if (first == '[') {
        std::stringstream text;
        text << in.rdbuf();
        const auto angles = ape::angles_from_json(text.str());
        ape::RotarySpec rotary{static_cast<ape::Index>(angles.size() * 2), angles};
        const ape::RopeToApe converted = ape::rope_to_ape(rotary);
        report["direction"] = "rope-to-ape";
        report["dim"] = rotary.dim;
        report["param"] = matrix_json(converted.param.entries());
        report["residual"] = converted.residual;
        report["branch_ambiguous"] = converted.branch_ambiguous;
        if (!cfg.out.empty()) {
            std::ofstream out(cfg.out, std::ios::binary);
            ape::write_dump(out, ape::PositionTensor({converted.generator.entries()}, {ape::SeqIndex{0}}));
        }
    } else {
        const ape::PositionTensor tensor = ape::read_dump(in);
        if (cfg.slice >= tensor.count()) {
            std::cerr << "slice " << cfg.slice << " out of range (nu=" << tensor.count() << ")\n";
            return kExitUsage;
        }
        const ape::ApeToRope converted = ape::ape_to_rope(ape::OrthogonalMatrix(tensor.slice(cfg.slice)));
        report["direction"] = "ape-to-rope";
        report["dim"] = converted.rotary.dim;
        report["angles"] = converted.rotary.angles;
        report["basis"] = matrix_json(converted.basis.entries());
        report["residual"] = converted.residual;
        if (!cfg.out.empty()) std::ofstream(cfg.out) << report.dump(2) << "\n";
    }
    std::cout << report.dump(2) << "\n";
    return 0;
}

int run_bench(const BenchConfig& cfg) {
    using clock = std::chrono::steady_clock;
    ape::Rng rng(cfg.seed);
    bool ok = true;
    std::cout << std::left << std::setw(8) << "kind" << std::setw(16) << "size" << std::setw(8) << "nu"
              << std::setw(10) << "products" << std::setw(8) << "bound" << std::setw(6) << "ok"
              << "ms\n";
    auto row = [&](const std::string& kind, const std::string& size, const ape::PositionTensor& t, std::size_t bound,
                   double ms) {
        const bool within = t.products() <= bound;
        ok = ok && within;
        std::cout << std::left << std::setw(8) << kind << std::setw(16) << size << std::setw(8) << t.count()
                  << std::setw(10) << t.products() << std::setw(8) << bound << std::setw(6)
                  << (within ? "yes" : "NO") << std::fixed << std::setprecision(2) << ms << "\n";
    };
    auto elapsed_ms = [](clock::time_point start) {
        return std::chrono::duration<double, std::milli>(clock::now() - start).count();
    };

    const ape::OrthogonalMatrix w = ape::random_special_orthogonal(cfg.dim, rng);
    std::vector<std::int64_t> powers{1, 10, 100, 1000, 1024};
    if (cfg.large) powers.push_back(10000);
    for (auto p : powers) {
        const auto start = clock::now();
        const auto t = ape::seq_powers(w, p);
        row("seq", "p=" + std::to_string(p), t, ape::ladder_product_bound(p), elapsed_ms(start));
    }

    for (auto [kappa, depths] : std::vector<std::pair<int, std::vector<int>>>{{2, {2, 4, 6, 8}}, {3, {2, 4}}}) {
        const auto spec = ape::StructureSpec::tree(kappa);
        const ape::GroupInterpretation g = ape::GroupInterpretation::from_params(spec, ape::random_params(spec, cfg.dim, rng));
        for (int depth : depths) {
            const auto start = clock::now();
            const auto t = ape::tree_positions(g, ape::complete_tree(kappa, depth));
            row("tree", "k=" + std::to_string(kappa) + ",depth=" + std::to_string(depth), t,
                static_cast<std::size_t>(kappa * depth), elapsed_ms(start));
        }
    }

    const auto grid = ape::StructureSpec::grid(2);
    const ape::GroupInterpretation g = ape::GroupInterpretation::from_params(grid, ape::random_params(grid, cfg.dim, rng));
    for (std::int64_t side : {8, 32}) {
        const auto start = clock::now();
        const auto t = ape::grid_positions(g, {side, side});
        const std::size_t bound = 2 * ape::ladder_product_bound(side - 1);
        row("grid", std::to_string(side) + "x" + std::to_string(side), t, bound, elapsed_ms(start));
    }
    return ok ? 0 : kExitVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Algebraic positional encodings: generate, verify, convert and benchmark"};
    app.require_subcommand(1);

    GenConfig gen;
    auto* gen_cmd = app.add_subcommand("gen", "Build a position tensor and write it in the dump format");
    gen_cmd->add_option("--kind", gen.kind, "seq | tree | grid")->required()->check(CLI::IsMember({"seq", "tree", "grid"}));
    gen_cmd->add_option("--dim", gen.dim, "Matrix dimension d")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--max-pos", gen.max_pos, "Largest sequence position");
    gen_cmd->add_option("--k", gen.branching, "Tree branching factor");
    gen_cmd->add_option("--depth", gen.depth, "Complete tree depth");
    gen_cmd->add_option("--axes", gen.axes, "Grid axis count");
    gen_cmd->add_option("--extents", gen.extents, "Grid extents, e.g. 3,4")->delimiter(',');
    gen_cmd->add_option("--period", gen.period, "Finite cyclic order of every generator");
    gen_cmd->add_option("--seed", gen.seed, "PRNG seed (mt19937_64)");
    gen_cmd->add_option("--init", gen.init, "random | rope | near-identity")
        ->check(CLI::IsMember({"random", "rope", "near-identity"}));
    gen_cmd->add_option("--scale", gen.scale, "Random parameter range (-scale, scale)");
    gen_cmd->add_option("--out", gen.out, "Output path");

    VerifyConfig verify;
    auto* verify_cmd = app.add_subcommand("verify", "Run the invariant suites and print a JSON report");
    verify_cmd->add_option("--suite", verify.suites, "Suite name (repeatable); default all");
    verify_cmd->add_option("--dim", verify.dims, "Dimension(s) to draw from");
    verify_cmd->add_option("--trials", verify.trials, "Trials per suite")->check(CLI::PositiveNumber);
    verify_cmd->add_option("--seed", verify.seed, "PRNG seed");
    verify_cmd->add_option("--tolerance", verify.tolerance, "Override every suite tolerance");
    verify_cmd->add_flag("--inject-fault", verify.inject_fault, "Perturb a generator off the orthogonal group");
    verify_cmd->add_option("--out", verify.out, "Write the report here instead of stdout");

    ConvertConfig convert;
    auto* convert_cmd = app.add_subcommand("convert", "Convert an angle list to a generator or a dump to angles");
    convert_cmd->add_option("--in", convert.in, "Angle-list JSON or tensor dump")->required();
    convert_cmd->add_option("--out", convert.out, "Generator dump (from angles) or JSON (from a dump)");
    convert_cmd->add_option("--slice", convert.slice, "Slice of the dump to convert");

    BenchConfig bench;
    auto* bench_cmd = app.add_subcommand("bench", "Time the builders and check their product counts");
    bench_cmd->add_option("--dim", bench.dim, "Matrix dimension d")->check(CLI::PositiveNumber);
    bench_cmd->add_flag("--large", bench.large, "Include p = 10000");
    bench_cmd->add_option("--seed", bench.seed, "PRNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen_cmd) return run_gen(gen);
        if (*verify_cmd) return run_verify(verify);
        if (*convert_cmd) return run_convert(convert);
        if (*bench_cmd) return run_bench(bench);
    } catch (const ape::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_usage_error(e.code()) ? kExitUsage : kExitMath;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
