#include <CLI11.hpp>

#include <iostream>

#include "multcorr/config.hpp"
#include "multcorr/experiment.hpp"
#include "multcorr/multfunc.hpp"

int main(int argc, char** argv) {
    CLI::App app{"multcorr: correlation experiments for multiplicative functions"};
    std::string kind, config, out;
    unsigned threads = 0;
    uint64_t seed = 0;
    std::string kinds_help = "suite";
    for (const auto& k : multcorr::experiment_kinds()) kinds_help += " | " + k;
    app.add_option("kind", kind, kinds_help + " | list")->required();
    auto* cfg_opt = app.add_option("--config,-c", config, "YAML config (a directory for suite)");
    app.add_option("--out,-o", out, "output directory for CSV artifacts");
    auto* thr = app.add_option("--threads,-j", threads, "thread budget (overrides the config)")->check(CLI::PositiveNumber);
    auto* sd = app.add_option("--seed,-s", seed, "seed for randomized experiments (overrides the config)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (kind == "list") {
        std::cout << "kinds: " << kinds_help << "\nfunctions:";
        for (const auto& f : multcorr::registered_functions()) std::cout << " " << f;
        std::cout << "\n";
        return 0;
    }
    if (!*cfg_opt) {
        std::cerr << "config error: --config is required\n";
        return 2;
    }
    multcorr::RunOptions opt;
    opt.out_dir = out;
    if (*thr) opt.threads = threads;
    if (*sd) opt.seed = seed;
    return multcorr::run_command(kind, config, opt, std::cout, std::cerr);
}
