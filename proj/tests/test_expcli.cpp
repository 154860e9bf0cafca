#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "multcorr/config.hpp"
#include "multcorr/errors.hpp"
#include "multcorr/experiment.hpp"

using namespace multcorr;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    static fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("multcorr_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
    auto p = scratch() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(const std::string& args) {
    std::string cmd = std::string(MULTCORR_BIN) + " " + args + " > " + (scratch() / "stdout.txt").string() + " 2> " +
                      (scratch() / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kCorrelate = R"(kind: correlate
multfunc:
  functions: [two_squares, delta_omega:0.5, two_squares]
linsys:
  forms:
    - [1, 0, 1]
    - [0, 1, 1]
    - [1, 1, 1]
  body:
    - [-1, 0, 0]
    - [0, -1, 0]
    - [1, 1, 1]
  T: [100, 2000]
assert:
  - {metric: lattice_count_last, min: 1}
)";

}  // namespace

TEST_CASE("config errors carry the file and line") {
    CHECK_THROWS_WITH_AS(parse_config("kind: correlate\nmultfunc:\n  functons: [all_one]\n", "a.yaml"),
                         doctest::Contains("a.yaml:3"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("kind: correlate\nbogus: {}\n", "b.yaml"), doctest::Contains("b.yaml:2"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("kind: correlate\nmultfunc:\n  functions: [no_such]\n", "c.yaml"),
                         doctest::Contains("c.yaml:3"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("kind: nonsense\n", "d.yaml"), doctest::Contains("d.yaml:1"), ConfigError);
    CHECK_THROWS_AS(parse_config("kind: correlate\nlinsys:\n  forms: [[1, 0], [2, 0]]\n", "e.yaml"), ConfigError);
    CHECK_THROWS_AS(parse_config("kind: correlate\nlinsys:\n  T: [100, 10]\n", "f.yaml"), ConfigError);
}

TEST_CASE("config parsing fills the experiment") {
    auto cfg = parse_config(kCorrelate, "corr.yaml");
    CHECK(cfg.kind == "correlate");
    CHECK(cfg.name == "corr");
    REQUIRE(cfg.system.has_value());
    CHECK(cfg.system->r() == 3);
    CHECK(cfg.system->s() == 2);
    CHECK(cfg.T_grid == std::vector<uint64_t>{100, 2000});
    CHECK(cfg.functions.size() == 3);
    CHECK(cfg.assertions.size() == 1);
    CHECK(cfg.sha256 == sha256_hex(kCorrelate));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("constant function correlation equals the lattice count") {
    auto cfg = parse_config(R"(kind: correlate
multfunc:
  functions: [all_one]
linsys:
  forms:
    - [1, 0, 1]
    - [2, 1, 3]
  body:
    - [-1, 0, 0]
    - [0, -1, 0]
    - [1, 0, 1]
    - [0, 1, 1]
  T: [10, 500]
)",
                            "ones.yaml");
    auto res = run_experiment(cfg, {.out_dir = "", .threads = 3, .seed = std::nullopt});
    CHECK(res.metric("max_abs_raw_minus_count") == 0.0);
    CHECK(res.metric("lattice_count_last") == 501.0 * 501.0);
    CHECK(res.passed());
}

TEST_CASE("CLI exit codes and byte-identical CSVs across thread counts") {
    auto cfg = write_file("corr.yaml", kCorrelate);
    const auto out1 = scratch() / "out1", out4 = scratch() / "out4";
    REQUIRE(cli("correlate --config " + cfg.string() + " --out " + out1.string() + " --threads 1") == 0);
    REQUIRE(cli("correlate --config " + cfg.string() + " --out " + out4.string() + " -j 4") == 0);
    const auto a = slurp(out1 / "corr" / "correlate.csv"), b = slurp(out4 / "corr" / "correlate.csv");
    CHECK(!a.empty());
    CHECK(a == b);
    CHECK(a.rfind("# config=corr.yaml sha256=" + sha256_hex(kCorrelate), 0) == 0);
    CHECK(fs::exists(out1 / "corr" / "summary.txt"));
    CHECK(fs::exists(out1 / "corr" / "timings.csv"));
    // rerun into the same directory: same bytes
    REQUIRE(cli("correlate --config " + cfg.string() + " --out " + out1.string() + " -j 2") == 0);
    CHECK(slurp(out1 / "corr" / "correlate.csv") == a);

    std::string failing = kCorrelate;
    failing.replace(failing.find("min: 1"), 6, "max: 1");
    auto bad = write_file("failing.yaml", failing);
    CHECK(cli("correlate --config " + bad.string()) == 1);
    CHECK(slurp(scratch() / "stdout.txt").find("FAIL") != std::string::npos);

    auto broken = write_file("broken.yaml", "kind: correlate\nlinsys:\n  forms: [[1, x]]\n");
    CHECK(cli("correlate --config " + broken.string()) == 2);
    CHECK(slurp(scratch() / "stderr.txt").find("broken.yaml:3") != std::string::npos);

    CHECK(cli("no-such-kind --config " + cfg.string()) == 2);
    CHECK(cli("partition --config " + cfg.string()) == 2);  // kind mismatch
    CHECK(cli("correlate") == 2);
    CHECK(cli("correlate --config " + cfg.string() + " --threads 0") == 2);
    CHECK(cli("list") == 0);
    CHECK(slurp(scratch() / "stdout.txt").find("two_squares") != std::string::npos);
}

TEST_CASE("suite runs every config in a directory") {
    fs::create_directories(scratch() / "suite");
    std::ofstream(scratch() / "suite" / "a.yaml") << kCorrelate;
    std::ofstream(scratch() / "suite" / "b.yaml") << "kind: tau\nparams:\n  n_max: 100\nassert:\n  - {metric: tau_2, equals: -24}\n";
    CHECK(cli("suite --config " + (scratch() / "suite").string()) == 0);
    auto out = slurp(scratch() / "stdout.txt");
    CHECK(out.find("[PASS] a.yaml") != std::string::npos);
    CHECK(out.find("suite PASS (2 experiments)") != std::string::npos);
    std::ofstream(scratch() / "suite" / "c.yaml") << "kind: tau\nparams:\n  n_max: 100\nassert:\n  - {metric: tau_2, equals: 24}\n";
    CHECK(cli("suite --config " + (scratch() / "suite").string()) == 1);
    CHECK(cli("suite --config " + (scratch() / "nope").string()) == 2);
}
