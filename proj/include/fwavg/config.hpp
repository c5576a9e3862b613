#pragma once

// Experiment configuration: one JSON file of record, flat documented keys,
// CLI key=value overrides, canonical serialization for the run manifest.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fwavg/geometry.hpp"

namespace fwavg {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    // model
    std::string model;  // required: "harmonic" or "duffing"
    double epsilon = 0.05;
    std::vector<double> epsilons = {0.2, 0.1, 0.05, 0.02};  // descending ladder
    double perturbation_scale = 0.0;
    double h_max = 0.0;  // 0: model default
    Box box{0.0, 0.0, 0.0, 0.0};

    // discretization
    int grid_n = 96;
    int levels_per_edge = 64;
    int cycle_samples = 256;
    double dt = 1e-3;

    // execution
    std::uint64_t seed = 12345;
    int threads = 0;  // 0: library default; 1: serial
    double paths_multiplier = 1.0;
    std::string output_dir = "out";

    // simulate / limit-process demo runs
    int paths = 1000;
    double horizon = 1.0;
    int start_edge = 0;
    double x0 = 1.0;

    // edge resolvent test
    std::vector<double> edge_epsilons = {0.2, 0.1, 0.05};
    double band_lo = 0.5, band_hi = 2.0;
    double lambda = 1.0;
    int edge_paths = 20000;
    double resolvent_horizon = 12.0;
    double tol_edge = 0.05;
    std::string test_function = "square";  // "square" | "identity" | "constant"

    // gluing test
    int gluing_vertex = -1;  // -1: first interior vertex
    double delta = 0.05;
    double delta_prime = 0.001;
    int gluing_paths = 10000;
    std::vector<double> gluing_epsilons = {0.02, 0.01};
    double gluing_horizon = 50.0;
    double kappa = 0.03;
    double bias_budget = 0.02;

    // a-priori ceiling test
    std::vector<double> ceiling_ladder = {4.0, 8.0, 16.0};
    double eta = 0.05;
    int apriori_paths = 10000;
    double apriori_epsilon = 0.05;
    double apriori_horizon = 1.0;

    // coupling decay test
    int coupling_paths = 1000;
    double coupling_band_lo = 0.25, coupling_band_hi = 4.0;
    double coupling_x0 = 1.0;
    double coupling_horizon = 1.0;
    double min_slope = 1.5;
};

// Parse from JSON text; `overrides` are "key=value" pairs applied on top.
// Unknown keys and malformed values raise ConfigError with the key path.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

// Full resolved configuration, sorted keys; basis of the manifest hash.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace fwavg
