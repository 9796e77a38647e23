#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ape/encoders.hpp"
#include "ape/random.hpp"
#include "ape/rope.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

// stderr is folded into stdout so failures show up in the captured text.
CliResult run(const std::string& args) {
    const std::string cmd = std::string(APE_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    CliResult r;
    if (pipe == nullptr) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// Skips anything printed before the JSON document.
nlohmann::json json_of(const std::string& text) {
    return nlohmann::json::parse(text.substr(text.find_first_of("[{")));
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ape_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenSingleIdentitySlice) {
    const CliResult r = run("gen --kind seq --dim 4 --max-pos 0 --out " + path("a.bin"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("nu=1 dim=4"), std::string::npos);
    std::ifstream in(path("a.bin"), std::ios::binary);
    const ape::PositionTensor t = ape::read_dump(in);
    ASSERT_EQ(t.count(), 1u);
    EXPECT_EQ(t.slice(0), ape::Matrix::Identity(4, 4));
}

TEST_F(Cli, GenGridAndTreeCounts) {
    CliResult r = run("gen --kind grid --axes 2 --dim 8 --extents 3,4 --out " + path("g.bin"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("nu=12 "), std::string::npos);
    r = run("gen --kind tree --k 2 --dim 4 --depth 3 --out " + path("t.bin"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("nu=15 "), std::string::npos);
}

TEST_F(Cli, GenIsDeterministic) {
    ASSERT_EQ(run("gen --kind tree --k 3 --dim 6 --depth 2 --seed 9 --out " + path("a.bin")).code, 0);
    ASSERT_EQ(run("gen --kind tree --k 3 --dim 6 --depth 2 --seed 9 --out " + path("b.bin")).code, 0);
    ASSERT_EQ(run("gen --kind tree --k 3 --dim 6 --depth 2 --seed 10 --out " + path("c.bin")).code, 0);
    EXPECT_EQ(slurp(path("a.bin")), slurp(path("b.bin")));
    EXPECT_NE(slurp(path("a.bin")), slurp(path("c.bin")));
}

TEST_F(Cli, GenDumpRoundTrips) {
    ASSERT_EQ(run("gen --kind seq --dim 4 --max-pos 9 --period 5 --out " + path("p.bin")).code, 0);
    const std::string bytes = slurp(path("p.bin"));
    std::stringstream in(bytes);
    const ape::PositionTensor t = ape::read_dump(in);
    EXPECT_EQ(t.count(), 10u);
    EXPECT_LE((t.slice(5) - ape::Matrix::Identity(4, 4)).norm(), 1e-9);
    std::stringstream out;
    ape::write_dump(out, t);
    EXPECT_EQ(out.str(), bytes);
}

TEST_F(Cli, GenUsageErrors) {
    EXPECT_EQ(run("gen --kind cube --out " + path("x.bin")).code, 2);
    EXPECT_EQ(run("gen --kind grid --axes 2 --dim 7 --extents 2,2 --out " + path("x.bin")).code, 2);
    EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, VerifyDefaultPasses) {
    const CliResult r = run("verify --trials 20");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto report = json_of(r.out);
    ASSERT_TRUE(report.is_array());
    EXPECT_EQ(report.size(), 7u);
    for (const auto& s : report) {
        EXPECT_TRUE(s["pass"].get<bool>()) << s.dump();
        for (const char* field : {"suite", "trials", "max_deviation", "tolerance", "pass"})
            EXPECT_TRUE(s.contains(field)) << field;
    }
}

TEST_F(Cli, VerifyZeroToleranceFailsOrthogonality) {
    const CliResult r = run("verify --suite orthogonality --tolerance 0 --trials 5");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("FAIL orthogonality"), std::string::npos) << r.out;
    const CliResult injected = run("verify --suite orthogonality --inject-fault --trials 5");
    EXPECT_EQ(injected.code, 1);
    EXPECT_NE(injected.out.find("orthogonality"), std::string::npos);
}

TEST_F(Cli, VerifyRopeEquivalence) {
    const CliResult r = run("verify --suite rope-equiv --dim 8 --trials 100");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto report = json_of(r.out);
    const auto& s = report.at(0);
    EXPECT_EQ(s["suite"], "rope-equiv");
    EXPECT_LE(s["max_deviation"].get<double>(), 1e-8);
}

TEST_F(Cli, VerifyUnknownSuite) { EXPECT_EQ(run("verify --suite nope").code, 2); }

TEST_F(Cli, ConvertZeroAngles) {
    std::ofstream(path("z.json")) << "[0, 0]";
    const CliResult r = run("convert --in " + path("z.json") + " --out " + path("z.bin"));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(json_of(r.out)["residual"].get<double>(), 0.0);
    std::ifstream in(path("z.bin"), std::ios::binary);
    EXPECT_EQ(ape::read_dump(in).slice(0), ape::Matrix::Identity(4, 4));
}

TEST_F(Cli, ConvertRoundTripSixthTurn) {
    std::ofstream(path("a.json")) << ape::angles_to_json({std::numbers::pi / 3});
    ASSERT_EQ(run("convert --in " + path("a.json") + " --out " + path("g.bin")).code, 0);
    const CliResult r = run("convert --in " + path("g.bin"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto report = json_of(r.out);
    EXPECT_NEAR(report["angles"][0].get<double>(), std::numbers::pi / 3, 1e-9);
}

TEST_F(Cli, ConvertRandomDump) {
    ape::Rng rng(3);
    {
        std::ofstream out(path("w.bin"), std::ios::binary);
        ape::write_dump(out, ape::PositionTensor({ape::random_special_orthogonal(6, rng).entries()}, {ape::SeqIndex{0}}));
    }
    const CliResult r = run("convert --in " + path("w.bin"));
    ASSERT_EQ(r.code, 0) << r.out;
    const auto report = json_of(r.out);
    EXPECT_EQ(report["angles"].size(), 3u);
    EXPECT_LE(report["residual"].get<double>(), 1e-8);
}

TEST_F(Cli, ConvertReflectionIsMathError) {
    ape::Rng rng(4);
    {
        std::ofstream out(path("r.bin"), std::ios::binary);
        ape::write_dump(out, ape::PositionTensor({ape::random_reflection(4, rng).entries()}, {ape::SeqIndex{0}}));
    }
    EXPECT_EQ(run("convert --in " + path("r.bin")).code, 3);
}

TEST_F(Cli, BenchCountsWithinBounds) {
    const CliResult r = run("bench --dim 8");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("1024"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
