#include "fwavg/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fwavg {

namespace {

using nlohmann::json;

void apply_model_defaults(ExperimentConfig& cfg, const json& j) {
    if (cfg.model == "harmonic") {
        if (cfg.h_max <= 0.0) cfg.h_max = 20.0;
        if (!j.contains("box")) cfg.box = Box{-6.5, 6.5, -6.5, 6.5};
    } else if (cfg.model == "duffing") {
        if (cfg.h_max <= 0.0) cfg.h_max = 2.0;
        if (!j.contains("box")) cfg.box = Box{-2.5, 2.5, -2.5, 2.5};
    }
}

void require_descending(const std::vector<double>& v, const std::string& key) {
    if (v.empty()) throw ConfigError(key + ": must be a non-empty descending list");
    for (std::size_t k = 0; k + 1 < v.size(); ++k)
        if (!(v[k] > v[k + 1]))
            throw ConfigError(key + ": must be strictly decreasing");
    for (double e : v)
        if (!(e > 0.0)) throw ConfigError(key + ": entries must be positive");
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.model.empty()) throw ConfigError("model: required");
    if (cfg.model != "harmonic" && cfg.model != "duffing")
        throw ConfigError("model: unknown model '" + cfg.model +
                          "' (expected harmonic or duffing)");
    if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon: must be positive");
    require_descending(cfg.epsilons, "epsilons");
    require_descending(cfg.edge_epsilons, "edge_epsilons");
    require_descending(cfg.gluing_epsilons, "gluing_epsilons");
    if (!(cfg.h_max > 0.0)) throw ConfigError("h_max: must be positive");
    if (cfg.box.x_hi <= cfg.box.x_lo || cfg.box.y_hi <= cfg.box.y_lo)
        throw ConfigError("box: must be [x_lo, x_hi, y_lo, y_hi] with positive extent");
    if (cfg.grid_n < 16) throw ConfigError("grid_n: must be at least 16");
    if (cfg.levels_per_edge < 4) throw ConfigError("levels_per_edge: must be at least 4");
    if (cfg.cycle_samples < 16) throw ConfigError("cycle_samples: must be at least 16");
    if (!(cfg.dt > 0.0)) throw ConfigError("dt: must be positive");
    if (cfg.threads < 0) throw ConfigError("threads: must be >= 0");
    if (!(cfg.paths_multiplier > 0.0)) throw ConfigError("paths_multiplier: must be positive");
    for (const auto& [key, value] :
         std::initializer_list<std::pair<const char*, int>>{{"paths", cfg.paths},
                                                            {"edge_paths", cfg.edge_paths},
                                                            {"gluing_paths", cfg.gluing_paths},
                                                            {"apriori_paths", cfg.apriori_paths},
                                                            {"coupling_paths", cfg.coupling_paths}})
        if (value <= 0) throw ConfigError(std::string(key) + ": must be positive");
    if (!(cfg.band_lo < cfg.band_hi)) throw ConfigError("band: band_lo must be below band_hi");
    if (!(cfg.band_lo < cfg.x0 && cfg.x0 < cfg.band_hi))
        throw ConfigError("x0: must lie strictly inside [band_lo, band_hi]");
    if (!(cfg.lambda > 0.0)) throw ConfigError("lambda: must be positive");
    if (cfg.test_function != "square" && cfg.test_function != "identity" &&
        cfg.test_function != "constant")
        throw ConfigError("test_function: expected square, identity, or constant");
    if (!(cfg.delta > 0.0 && cfg.delta_prime > 0.0 && cfg.delta_prime < cfg.delta))
        throw ConfigError("delta/delta_prime: need 0 < delta_prime < delta");
    if (!(cfg.kappa > 0.0)) throw ConfigError("kappa: must be positive");
    if (!(cfg.bias_budget >= 0.0)) throw ConfigError("bias_budget: must be non-negative");
    if (cfg.ceiling_ladder.empty())
        throw ConfigError("ceiling_ladder: must be a non-empty ascending list");
    for (std::size_t k = 0; k + 1 < cfg.ceiling_ladder.size(); ++k)
        if (!(cfg.ceiling_ladder[k] < cfg.ceiling_ladder[k + 1]))
            throw ConfigError("ceiling_ladder: must be strictly increasing");
    for (double c : cfg.ceiling_ladder)
        if (!(c > 0.0)) throw ConfigError("ceiling_ladder: entries must be positive");
    if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) throw ConfigError("eta: must be in (0,1)");
    if (!(cfg.apriori_epsilon > 0.0)) throw ConfigError("apriori_epsilon: must be positive");
    if (!(cfg.apriori_horizon > 0.0)) throw ConfigError("apriori_horizon: must be positive");
    if (!(cfg.coupling_band_lo < cfg.coupling_x0 && cfg.coupling_x0 < cfg.coupling_band_hi))
        throw ConfigError("coupling_x0: must lie inside [coupling_band_lo, coupling_band_hi]");
    if (!(cfg.coupling_horizon > 0.0)) throw ConfigError("coupling_horizon: must be positive");
    if (!(cfg.min_slope > 0.0)) throw ConfigError("min_slope: must be positive");
    if (!(cfg.horizon > 0.0)) throw ConfigError("horizon: must be positive");
    if (!(cfg.resolvent_horizon > 0.0)) throw ConfigError("resolvent_horizon: must be positive");
    if (!(cfg.gluing_horizon > 0.0)) throw ConfigError("gluing_horizon: must be positive");
    if (cfg.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "model",           "epsilon",          "epsilons",        "perturbation_scale",
        "h_max",           "box",              "grid_n",          "levels_per_edge",
        "cycle_samples",   "dt",               "seed",            "threads",
        "paths_multiplier","output_dir",       "paths",           "horizon",
        "start_edge",      "x0",               "edge_epsilons",   "band_lo",
        "band_hi",         "lambda",           "edge_paths",      "resolvent_horizon",
        "tol_edge",        "test_function",    "gluing_vertex",   "delta",
        "delta_prime",     "gluing_paths",     "gluing_epsilons", "gluing_horizon",
        "kappa",           "bias_budget",      "ceiling_ladder",  "eta",
        "apriori_paths",   "apriori_epsilon",  "apriori_horizon", "coupling_paths",
        "coupling_band_lo","coupling_band_hi", "coupling_x0",     "coupling_horizon",
        "min_slope"};
    return keys;
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text,
                              const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root: must be a JSON object");

    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + kv + "': expected key=value");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        const json parsed = json::parse(value, nullptr, false);
        j[key] = parsed.is_discarded() ? json(value) : parsed;
    }

    for (const auto& item : j.items())
        if (known_keys().count(item.key()) == 0)
            throw ConfigError(item.key() + ": unknown configuration key");

    ExperimentConfig cfg;
    read(j, "model", cfg.model);
    read(j, "epsilon", cfg.epsilon);
    read(j, "epsilons", cfg.epsilons);
    read(j, "perturbation_scale", cfg.perturbation_scale);
    read(j, "h_max", cfg.h_max);
    if (j.contains("box")) {
        std::vector<double> b;
        read(j, "box", b);
        if (b.size() != 4) throw ConfigError("box: expected [x_lo, x_hi, y_lo, y_hi]");
        cfg.box = Box{b[0], b[1], b[2], b[3]};
    }
    read(j, "grid_n", cfg.grid_n);
    read(j, "levels_per_edge", cfg.levels_per_edge);
    read(j, "cycle_samples", cfg.cycle_samples);
    read(j, "dt", cfg.dt);
    read(j, "seed", cfg.seed);
    read(j, "threads", cfg.threads);
    read(j, "paths_multiplier", cfg.paths_multiplier);
    read(j, "output_dir", cfg.output_dir);
    read(j, "paths", cfg.paths);
    read(j, "horizon", cfg.horizon);
    read(j, "start_edge", cfg.start_edge);
    read(j, "x0", cfg.x0);
    read(j, "edge_epsilons", cfg.edge_epsilons);
    read(j, "band_lo", cfg.band_lo);
    read(j, "band_hi", cfg.band_hi);
    read(j, "lambda", cfg.lambda);
    read(j, "edge_paths", cfg.edge_paths);
    read(j, "resolvent_horizon", cfg.resolvent_horizon);
    read(j, "tol_edge", cfg.tol_edge);
    read(j, "test_function", cfg.test_function);
    read(j, "gluing_vertex", cfg.gluing_vertex);
    read(j, "delta", cfg.delta);
    read(j, "delta_prime", cfg.delta_prime);
    read(j, "gluing_paths", cfg.gluing_paths);
    read(j, "gluing_epsilons", cfg.gluing_epsilons);
    read(j, "gluing_horizon", cfg.gluing_horizon);
    read(j, "kappa", cfg.kappa);
    read(j, "bias_budget", cfg.bias_budget);
    read(j, "ceiling_ladder", cfg.ceiling_ladder);
    read(j, "eta", cfg.eta);
    read(j, "apriori_paths", cfg.apriori_paths);
    read(j, "apriori_epsilon", cfg.apriori_epsilon);
    read(j, "apriori_horizon", cfg.apriori_horizon);
    read(j, "coupling_paths", cfg.coupling_paths);
    read(j, "coupling_band_lo", cfg.coupling_band_lo);
    read(j, "coupling_band_hi", cfg.coupling_band_hi);
    read(j, "coupling_x0", cfg.coupling_x0);
    read(j, "coupling_horizon", cfg.coupling_horizon);
    read(j, "min_slope", cfg.min_slope);

    apply_model_defaults(cfg, j);
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), overrides);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    return json{{"model", cfg.model},
                {"epsilon", cfg.epsilon},
                {"epsilons", cfg.epsilons},
                {"perturbation_scale", cfg.perturbation_scale},
                {"h_max", cfg.h_max},
                {"box", {cfg.box.x_lo, cfg.box.x_hi, cfg.box.y_lo, cfg.box.y_hi}},
                {"grid_n", cfg.grid_n},
                {"levels_per_edge", cfg.levels_per_edge},
                {"cycle_samples", cfg.cycle_samples},
                {"dt", cfg.dt},
                {"seed", cfg.seed},
                {"threads", cfg.threads},
                {"paths_multiplier", cfg.paths_multiplier},
                {"output_dir", cfg.output_dir},
                {"paths", cfg.paths},
                {"horizon", cfg.horizon},
                {"start_edge", cfg.start_edge},
                {"x0", cfg.x0},
                {"edge_epsilons", cfg.edge_epsilons},
                {"band_lo", cfg.band_lo},
                {"band_hi", cfg.band_hi},
                {"lambda", cfg.lambda},
                {"edge_paths", cfg.edge_paths},
                {"resolvent_horizon", cfg.resolvent_horizon},
                {"tol_edge", cfg.tol_edge},
                {"test_function", cfg.test_function},
                {"gluing_vertex", cfg.gluing_vertex},
                {"delta", cfg.delta},
                {"delta_prime", cfg.delta_prime},
                {"gluing_paths", cfg.gluing_paths},
                {"gluing_epsilons", cfg.gluing_epsilons},
                {"gluing_horizon", cfg.gluing_horizon},
                {"kappa", cfg.kappa},
                {"bias_budget", cfg.bias_budget},
                {"ceiling_ladder", cfg.ceiling_ladder},
                {"eta", cfg.eta},
                {"apriori_paths", cfg.apriori_paths},
                {"apriori_epsilon", cfg.apriori_epsilon},
                {"apriori_horizon", cfg.apriori_horizon},
                {"coupling_paths", cfg.coupling_paths},
                {"coupling_band_lo", cfg.coupling_band_lo},
                {"coupling_band_hi", cfg.coupling_band_hi},
                {"coupling_x0", cfg.coupling_x0},
                {"coupling_horizon", cfg.coupling_horizon},
                {"min_slope", cfg.min_slope}};
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string dump = config_to_json(cfg).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : dump) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fwavg
