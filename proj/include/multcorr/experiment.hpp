#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "multcorr/config.hpp"
#include "multcorr/csv.hpp"

namespace multcorr {

struct RunOptions {
    std::string out_dir;  // empty: nothing written
    std::optional<unsigned> threads;
    std::optional<uint64_t> seed;
};

struct AssertionResult {
    std::string label;
    double value = 0.0;
    bool pass = false;
};

struct RunResult {
    std::string name;
    std::string kind;
    std::map<std::string, double> metrics;
    std::deque<CsvTable> tables;  // stable references while tables are added
    std::vector<std::string> notes;
    std::vector<AssertionResult> assertions;
    std::vector<std::pair<std::string, double>> timings_ms;

    double metric(const std::string& key) const;
    bool passed() const;
};

// Runs the experiment, evaluates the config's assertions and, when
// opt.out_dir is set, writes <out_dir>/<name>/{*.csv, summary.txt, timings.csv}.
// Throws on config or runtime errors.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});

std::string render_summary(const RunResult& r);

// CLI entry: kind is an experiment kind or "suite" (config is then a
// directory of *.yaml files). Returns 0 all passed, 1 assertion failure,
// 2 config/runtime error.
int run_command(const std::string& kind, const std::string& config_path, const RunOptions& opt, std::ostream& out,
                std::ostream& err);

}  // namespace multcorr
