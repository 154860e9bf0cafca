#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "multcorr/linsys.hpp"
#include "multcorr/wtrick.hpp"

namespace multcorr {

struct AssertionSpec {
    std::string metric;
    std::optional<double> min, max, equals;
    std::string where;  // "file:line" for diagnostics
};

// One experiment, read from a YAML file whose sections mirror the modules:
//
//   kind: correlate
//   multfunc:     {functions: [two_squares, two_squares]}
//   linsys:       {forms: [[1, 0], [1, 2]], body: [["-1", "0"], ["1", "1"]], T: [1000, 10000]}
//   wtrick:       {w_of_x: 2, q_star: 1, C: 2, B1: 6, B2: 10, A: [1, 1]}
//   majorant:     {gamma: 0.25, C1: 20}
//   localdensity: {A_max: 4, P_max: 1000}
//   charsum:      {q0: 3, W_tilde: [2, 4, 6], A: 1, theta: 1}
//   params:       {...}  experiment knobs (trials, grid sizes, scan points)
//   assert:       [{metric: max_residual, max: 1e-9}]
//
// Forms are rows "coefficients..., constant"; body rows are
// "normal..., offset[, slack]" with rationals as strings or numbers.
struct ExperimentConfig {
    std::string path;
    std::string sha256;
    std::string kind;
    std::string name;  // output subdirectory; defaults to the file stem
    uint64_t seed = 0;
    unsigned threads = 1;

    std::vector<std::string> functions;
    std::optional<LinearSystem> system;
    std::optional<ConvexBody> body;
    std::vector<uint64_t> T_grid;

    WOverrides w;
    std::vector<int64_t> w_A;  // per-form residues for W-tricked experiments

    double gamma = 0.25;
    double C1 = 20.0;
    int A_max = 4;
    std::optional<uint64_t> P_max;  // unset: P_max = T

    YAML::Node root;
    std::vector<AssertionSpec> assertions;

    // Typed lookups of "section.key" with file:line diagnostics.
    bool has(const std::string& section, const std::string& key) const;
    double real(const std::string& section, const std::string& key, double def) const;
    int64_t integer(const std::string& section, const std::string& key, int64_t def) const;
    std::vector<int64_t> integers(const std::string& section, const std::string& key,
                                  std::vector<int64_t> def = {}) const;
    std::vector<std::string> strings(const std::string& section, const std::string& key,
                                     std::vector<std::string> def = {}) const;
    std::string where(const YAML::Node& n) const;
};

std::vector<std::string> experiment_kinds();

ExperimentConfig load_config(const std::string& path);
// source_name stands in for the path in diagnostics and hashing.
ExperimentConfig parse_config(const std::string& text, const std::string& source_name);

std::string sha256_hex(const std::string& bytes);

}  // namespace multcorr
