// test_cli.cpp
//
// Argument parsing, manifest serialization, report emission and exit codes.
// Process-level checks run the built binary named by $BOOT2LAB_CLI.

#include "catch_amalgamated.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "boot2lab/cli.hpp"

using namespace boot2lab;
namespace fs = std::filesystem;

namespace {

ParsedArgs parse(std::initializer_list<std::string> args) {
    std::vector<std::string> argv{"boot2lab"};
    argv.insert(argv.end(), args);
    return parse_args(argv);
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::initializer_list<std::string> args) {
    std::vector<std::string> argv{"boot2lab"};
    argv.insert(argv.end(), args);
    std::ostringstream out, err;
    const int code = run_cli(argv, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("boot2lab_test_" + name); }

}  // namespace

TEST_CASE("analytic with no flags uses the paper configuration", "[cli][parse]") {
    const auto p = parse({"analytic"});
    CHECK(p.manifest.subcommand == Subcommand::analytic);
    CHECK(p.manifest.config == ToyConfig::paper_full());
    CHECK(p.manifest.config.theta == 5.0);
    CHECK(p.manifest.config.sigma_x == 100.0);
    CHECK(p.manifest.config.sigma_eps == 0.01);
    CHECK(p.manifest.config.n == 1'000'000);
    CHECK(p.manifest.config.m == 1'000);
    CHECK(p.manifest.config.k == 10'000);
    CHECK(p.manifest.output_format == OutputFormat::json);
    CHECK_FALSE(p.manifest.output_path);
}

TEST_CASE("flags override presets and defaults", "[cli][parse]") {
    const auto p = parse({"single", "--seed", "42", "--format", "json"});
    CHECK(p.manifest.seed == 42);
    CHECK(p.manifest.output_format == OutputFormat::json);

    const auto q = parse({"replicate", "--preset", "desk-reduced", "--m", "7", "--mode", "poisson", "--merge",
                          "geometric", "--bias-correct", "--r", "30", "--out", "x.json"});
    CHECK(q.manifest.config.n == 10'000);
    CHECK(q.manifest.config.m == 7);
    CHECK(q.manifest.config.k == 500);
    CHECK(q.manifest.config.resample == ResampleMode::poisson);
    CHECK(q.manifest.config.merge == MergeMode::geometric);
    CHECK(q.manifest.bias_correct);
    CHECK(q.manifest.r == 30);
    CHECK(q.manifest.preset == std::optional<std::string>("desk-reduced"));
    CHECK(q.manifest.output_path == std::optional<std::string>("x.json"));

    CHECK(parse({"scaling", "--m-values", "25,100,400"}).manifest.m_values == std::vector<std::size_t>{25, 100, 400});
    CHECK(parse({"replicate"}).manifest.r == 2000);
    CHECK(parse({"dependence"}).manifest.r == 5000);
}

TEST_CASE("invalid arguments name the parameter", "[cli][parse]") {
    CHECK_THROWS_WITH(parse({"replicate", "--n", "0"}), "n must be ≥ 2");
    CHECK_THROWS_WITH(parse({"single", "--k", "1"}), "k must be ≥ 2");
    CHECK_THROWS_WITH(parse({"single", "--sigma-x", "-3"}), Catch::Matchers::ContainsSubstring("sigma_x"));
    CHECK_THROWS_WITH(parse({"single", "--n", "abc"}), Catch::Matchers::ContainsSubstring("--n"));
    CHECK_THROWS_WITH(parse({"single", "--bogus", "1"}), Catch::Matchers::ContainsSubstring("bogus"));
    CHECK_THROWS_WITH(parse({"frobnicate"}), Catch::Matchers::ContainsSubstring("frobnicate"));
    CHECK_THROWS_WITH(parse({"single", "--mode", "stratified"}), Catch::Matchers::ContainsSubstring("mode"));
    CHECK_THROWS_WITH(parse({"single", "--preset", "huge"}), Catch::Matchers::ContainsSubstring("preset"));
    CHECK_THROWS_WITH(parse({"scaling", "--m-values", "25,x"}), Catch::Matchers::ContainsSubstring("m-values"));
    CHECK_THROWS_WITH(parse({"scaling", "--m-values", "1,4"}), Catch::Matchers::ContainsSubstring("m-values"));
    CHECK_THROWS_WITH(parse({"fixes", "--b", "1"}), Catch::Matchers::ContainsSubstring("b must"));
    CHECK_THROWS_WITH(parse({"replicate", "--r", "1"}), Catch::Matchers::ContainsSubstring("r must"));
    CHECK_THROWS_AS(parse({}), ArgumentError);

    const auto r = run({"replicate", "--n", "0"});
    CHECK(r.code == kExitArgument);
    CHECK(r.err.find("n must be ≥ 2") != std::string::npos);
}

TEST_CASE("manifest round-trips through JSON", "[cli][manifest][property]") {
    Rng gen = derive_rng(SeedSpec(55));
    for (int trial = 0; trial < 200; ++trial) {
        RunManifest m;
        m.config.theta = 10 * gen.uniform() - 3;
        m.config.sigma_x = 1e3 * gen.uniform();
        m.config.sigma_eps = gen.uniform() / 3;
        m.config.n = 2 + gen.below(1'000'000);
        m.config.m = 1 + gen.below(5000);
        m.config.k = 2 + gen.below(100'000);
        m.config.merge = gen.below(2) ? MergeMode::geometric : MergeMode::arithmetic;
        m.config.resample = gen.below(2) ? ResampleMode::poisson : ResampleMode::multinomial;
        m.seed = gen();
        m.subcommand = static_cast<Subcommand>(gen.below(7));
        m.output_format = gen.below(2) ? OutputFormat::csv : OutputFormat::json;
        if (gen.below(2)) m.output_path = "out_" + std::to_string(gen.below(100)) + ".json";
        if (gen.below(2)) m.preset = "desk-reduced";
        m.r = gen.below(10'000);
        m.b = gen.below(500);
        m.datasets = gen.below(50);
        m.m_values.assign(gen.below(6), 0);
        for (auto& v : m.m_values) v = 2 + gen.below(3000);
        m.bias_correct = gen.below(2);
        const auto text = to_json(m).dump();
        REQUIRE(manifest_from_json(json::parse(text)) == m);
    }
}

TEST_CASE("analytic report carries the reference values", "[cli][execute]") {
    const auto r = run({"analytic"});
    REQUIRE(r.code == kExitOk);
    const auto j = json::parse(r.out);
    CHECK(j["manifest"]["subcommand"] == "analytic");
    CHECK(j["manifest"]["rng_algorithm"] == std::string(kRngAlgorithm));
    CHECK(j["result"]["sqrt_var_boot_avg"].get<double>() == Catch::Approx(0.10005).epsilon(1e-4));
    CHECK(j["result"]["sqrt_expected_delta2_boot_boot"].get<double>() == Catch::Approx(3.18e-3).epsilon(2e-3));
    CHECK(j["result"]["mcstat_fraction_missed"].get<double>() == Catch::Approx(0.99899).epsilon(1e-5));
}

TEST_CASE("same manifest gives byte-identical reports", "[cli][execute][determinism]") {
    const std::initializer_list<std::string> args{"single", "--preset", "desk-reduced", "--seed", "17"};
    const auto a = run(args);
    const auto b = run(args);
    REQUIRE(a.code == kExitOk);
    CHECK(a.out == b.out);

    const auto csv1 = run({"replicate", "--preset", "desk-reduced", "--n", "500", "--r", "20", "--format", "csv"});
    const auto csv2 = run({"replicate", "--preset", "desk-reduced", "--n", "500", "--r", "20", "--format", "csv"});
    REQUIRE(csv1.code == kExitOk);
    CHECK(csv1.out == csv2.out);

    // Worker count is not part of the manifest and must not change output.
    auto mf = parse({"replicate", "--preset", "desk-reduced", "--n", "500", "--r", "12"}).manifest;
    CHECK(render_report(mf, false, 1) == render_report(mf, false, 3));
}

TEST_CASE("scaling CSV has one row per M and a slope column", "[cli][execute][csv]") {
    const auto r = run({"scaling", "--preset", "desk-reduced", "--n", "500", "--r", "5", "--m-values", "25,100,400",
                        "--format", "csv"});
    REQUIRE(r.code == kExitOk);
    std::istringstream in(r.out);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') rows.push_back(line);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].rfind("m,", 0) == 0);
    CHECK(rows[0].find("slope") != std::string::npos);
    CHECK(rows[1].rfind("25,", 0) == 0);
    CHECK(rows[3].rfind("400,", 0) == 0);
}

TEST_CASE("every report reruns from its embedded manifest", "[cli][execute][rerun]") {
    for (auto sub : {"analytic", "single", "replicate", "conditional", "dependence", "scaling", "fixes"}) {
        const auto path = temp_path(std::string(sub) + ".json");
        const auto first = run({sub, "--preset", "desk-reduced", "--n", "200", "--m", "4", "--k", "20", "--r", "6",
                                "--b", "5", "--datasets", "3", "--m-values", "2,4", "--seed", "8", "--out",
                                path.string()});
        INFO(sub << ": " << first.err);
        REQUIRE(first.code == kExitOk);
        const auto again = run({"rerun", "--manifest", path.string()});
        REQUIRE(again.code == kExitOk);
        CHECK(again.out == slurp(path));
        fs::remove(path);
    }
    CHECK(run({"rerun"}).code == kExitArgument);
    CHECK(run({"rerun", "--manifest", "/nonexistent/report.json"}).code == kExitIo);
}

TEST_CASE("I/O failures exit with 4", "[cli][execute]") {
    const auto r = run({"analytic", "--out", "/nonexistent/dir/report.json"});
    CHECK(r.code == kExitIo);
    CHECK(r.err.find("/nonexistent/dir/report.json") != std::string::npos);
}

TEST_CASE("study failures exit with 3", "[cli][execute]") {
    // A geometric merge with members that can go negative fails inside the study.
    const auto r = run({"single", "--preset", "desk-reduced", "--merge", "geometric", "--theta", "0.1"});
    CHECK(r.code == kExitStudy);
    CHECK(r.err.find("single failed") != std::string::npos);
}

TEST_CASE("the built binary honours exit codes and worker settings", "[cli][process]") {
    const char* bin = std::getenv("BOOT2LAB_CLI");
    if (!bin) SKIP("BOOT2LAB_CLI not set");
    auto status_of = [&](const std::string& args) {
        const int st = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    };
    CHECK(status_of("analytic") == 0);
    CHECK(status_of("replicate --n 0") == 2);
    CHECK(status_of("single --n abc") == 2);
    CHECK(status_of("analytic --out /nonexistent/dir/x.json") == 4);

    const auto a = temp_path("w1.json"), b = temp_path("w3.json");
    const std::string args = " replicate --preset desk-reduced --n 300 --r 16 --seed 4";
    REQUIRE(std::system(("BOOT2LAB_WORKERS=1 " + std::string(bin) + args + " --out " + a.string()).c_str()) == 0);
    REQUIRE(std::system(("BOOT2LAB_WORKERS=3 " + std::string(bin) + args + " --out " + b.string()).c_str()) == 0);
    CHECK(slurp(a) == slurp(b));
    fs::remove(a);
    fs::remove(b);
}
