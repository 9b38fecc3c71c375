#pragma once

// Run configuration for the command-line driver. One JSON document drives
// every subcommand; unknown keys are rejected with their dotted path so a
// typo cannot silently fall back to a default. Schema (all keys optional,
// defaults in RunConfig):
//
//   {
//     "model":      {"r", "delta", "lambda", "c", "eps"},
//     "grid":       {"k_max", "n", "l_max", "m", "np"},
//     "solver":     {"tol", "max_iters", "cfl"},
//     "price":      {"drift", "a", "b", "nu", "reward", "cap_a",
//                    "p_min", "p_max", "lam2_adjust"},
//     "two_pop":    {"r1", "r2", "lam1", "lam2", "c1", "c2", "delta", "eps"},
//     "trajectory": {"k0", "l0", "p0", "horizon", "dt"},
//     "obstacle":   {"etas"},
//     "sweep":      {"param", "values", "pde_check"},
//     "ingest":     {"path", "delta"},
//     "seed":       unsigned integer,
//     "output_dir": string
//   }
//
// Sentinels: grid.k_max = 0 derives the domain from the model, grid.l_max = 0
// copies k_max, grid.m = 0 and grid.np = 0 pick per-command resolutions,
// ingest.delta < 0 falls back to model.delta. Overrides use dotted paths
// ("model.delta=0.3"); the value is parsed as JSON when possible and treated
// as a string otherwise.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfgpow/common_noise.hpp"
#include "mfgpow/errors.hpp"
#include "mfgpow/model.hpp"
#include "mfgpow/solver1d.hpp"
#include "mfgpow/two_pop.hpp"

namespace mfgpow {

struct RunConfig {
    ModelParams model{};
    TwoPopParams two_pop{};
    PriceProcess price{};
    Lam2Adjust lam2_adjust = Lam2Adjust::multiply;

    double k_max = 0.0;    // 0 = derive from the model
    std::size_t n = 2001;  // K nodes for the 1D solvers
    double l_max = 0.0;    // 0 = same as k_max
    std::size_t m = 0;     // pair-axis nodes, 0 = per-command default
    std::size_t np = 0;    // price nodes, 0 = per-command default

    SolverOptions solver{};

    double k0 = 0.0;
    double l0 = 0.0;
    double p0 = 0.0;
    double horizon = 50.0;
    double dt = 0.0;  // 0 = solver default

    std::vector<double> etas = {1e-2, 1e-4, 1e-6};

    std::string sweep_param = "delta";
    std::vector<double> sweep_values;  // empty = default range for the param
    bool sweep_pde_check = false;

    std::string input_path;
    double ingest_delta = -1.0;  // < 0 = model.delta

    std::uint64_t seed = 1;
    std::string output_dir;
};

namespace detail {

using nlohmann::json;

inline double as_num(const json& v, const std::string& path) {
    if (!v.is_number()) {
        throw ConfigError("config: \"" + path + "\" must be a number");
    }
    return v.get<double>();
}

inline std::size_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<double>() < 0) {
        throw ConfigError("config: \"" + path +
                          "\" must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

inline std::uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() &&
        !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError("config: \"" + path +
                          "\" must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) {
        throw ConfigError("config: \"" + path + "\" must be a boolean");
    }
    return v.get<bool>();
}

inline std::string as_str(const json& v, const std::string& path) {
    if (!v.is_string()) {
        throw ConfigError("config: \"" + path + "\" must be a string");
    }
    return v.get<std::string>();
}

inline std::vector<double> as_num_array(const json& v, const std::string& path) {
    if (!v.is_array()) {
        throw ConfigError("config: \"" + path + "\" must be an array of numbers");
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) {
            throw ConfigError("config: \"" + path +
                              "\" must be an array of numbers");
        }
        out.push_back(e.get<double>());
    }
    return out;
}

[[noreturn]] inline void unknown_key(const std::string& path) {
    throw ConfigError("config: unknown key \"" + path + "\"");
}

inline DriftKind drift_from(const std::string& s, const std::string& path) {
    if (s == "constant") return DriftKind::constant;
    if (s == "affine") return DriftKind::affine;
    throw ConfigError("config: \"" + path +
                      "\" must be \"constant\" or \"affine\"");
}

inline RewardKind reward_from(const std::string& s, const std::string& path) {
    if (s == "identity") return RewardKind::identity;
    if (s == "exponential_capped") return RewardKind::exponential_capped;
    throw ConfigError("config: \"" + path +
                      "\" must be \"identity\" or \"exponential_capped\"");
}

inline Lam2Adjust adjust_from(const std::string& s, const std::string& path) {
    if (s == "multiply") return Lam2Adjust::multiply;
    if (s == "divide") return Lam2Adjust::divide;
    throw ConfigError("config: \"" + path +
                      "\" must be \"multiply\" or \"divide\"");
}

inline void parse_model(const json& j, ModelParams& m) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "model." + key;
        if (key == "r") m.r = as_num(v, path);
        else if (key == "delta") m.delta = as_num(v, path);
        else if (key == "lambda") m.lambda = as_num(v, path);
        else if (key == "c") m.c = as_num(v, path);
        else if (key == "eps") m.eps = as_num(v, path);
        else unknown_key(path);
    }
}

inline void parse_grid(const json& j, RunConfig& cfg) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "grid." + key;
        if (key == "k_max") cfg.k_max = as_num(v, path);
        else if (key == "n") cfg.n = as_count(v, path);
        else if (key == "l_max") cfg.l_max = as_num(v, path);
        else if (key == "m") cfg.m = as_count(v, path);
        else if (key == "np") cfg.np = as_count(v, path);
        else unknown_key(path);
    }
}

inline void parse_solver(const json& j, SolverOptions& s) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "solver." + key;
        if (key == "tol") s.tol = as_num(v, path);
        else if (key == "max_iters") s.max_iters = as_count(v, path);
        else if (key == "cfl") s.cfl = as_num(v, path);
        else unknown_key(path);
    }
}

inline void parse_price(const json& j, RunConfig& cfg) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "price." + key;
        if (key == "drift") cfg.price.drift_kind = drift_from(as_str(v, path), path);
        else if (key == "a") cfg.price.a = as_num(v, path);
        else if (key == "b") cfg.price.b = as_num(v, path);
        else if (key == "nu") cfg.price.nu = as_num(v, path);
        else if (key == "reward") cfg.price.reward_kind = reward_from(as_str(v, path), path);
        else if (key == "cap_a") cfg.price.cap_a = as_num(v, path);
        else if (key == "p_min") cfg.price.p_min = as_num(v, path);
        else if (key == "p_max") cfg.price.p_max = as_num(v, path);
        else if (key == "lam2_adjust") cfg.lam2_adjust = adjust_from(as_str(v, path), path);
        else unknown_key(path);
    }
}

inline void parse_two_pop(const json& j, TwoPopParams& tp) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "two_pop." + key;
        if (key == "r1") tp.r1 = as_num(v, path);
        else if (key == "r2") tp.r2 = as_num(v, path);
        else if (key == "lam1") tp.lam1 = as_num(v, path);
        else if (key == "lam2") tp.lam2 = as_num(v, path);
        else if (key == "c1") tp.c1 = as_num(v, path);
        else if (key == "c2") tp.c2 = as_num(v, path);
        else if (key == "delta") tp.delta = as_num(v, path);
        else if (key == "eps") tp.eps = as_num(v, path);
        else unknown_key(path);
    }
}

inline void parse_trajectory(const json& j, RunConfig& cfg) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "trajectory." + key;
        if (key == "k0") cfg.k0 = as_num(v, path);
        else if (key == "l0") cfg.l0 = as_num(v, path);
        else if (key == "p0") cfg.p0 = as_num(v, path);
        else if (key == "horizon") cfg.horizon = as_num(v, path);
        else if (key == "dt") cfg.dt = as_num(v, path);
        else unknown_key(path);
    }
}

inline void parse_obstacle(const json& j, RunConfig& cfg) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "obstacle." + key;
        if (key == "etas") cfg.etas = as_num_array(v, path);
        else unknown_key(path);
    }
}

inline void parse_sweep(const json& j, RunConfig& cfg) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "sweep." + key;
        if (key == "param") cfg.sweep_param = as_str(v, path);
        else if (key == "values") cfg.sweep_values = as_num_array(v, path);
        else if (key == "pde_check") cfg.sweep_pde_check = as_bool(v, path);
        else unknown_key(path);
    }
}

inline void parse_ingest(const json& j, RunConfig& cfg) {
    for (const auto& [key, v] : j.items()) {
        const std::string path = "ingest." + key;
        if (key == "path") cfg.input_path = as_str(v, path);
        else if (key == "delta") cfg.ingest_delta = as_num(v, path);
        else unknown_key(path);
    }
}

inline void require_object(const json& v, const std::string& path) {
    if (!v.is_object()) {
        throw ConfigError("config: \"" + path + "\" must be an object");
    }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    RunConfig cfg;
    for (const auto& [key, v] : j.items()) {
        if (key == "model") {
            detail::require_object(v, key);
            detail::parse_model(v, cfg.model);
        } else if (key == "grid") {
            detail::require_object(v, key);
            detail::parse_grid(v, cfg);
        } else if (key == "solver") {
            detail::require_object(v, key);
            detail::parse_solver(v, cfg.solver);
        } else if (key == "price") {
            detail::require_object(v, key);
            detail::parse_price(v, cfg);
        } else if (key == "two_pop") {
            detail::require_object(v, key);
            detail::parse_two_pop(v, cfg.two_pop);
        } else if (key == "trajectory") {
            detail::require_object(v, key);
            detail::parse_trajectory(v, cfg);
        } else if (key == "obstacle") {
            detail::require_object(v, key);
            detail::parse_obstacle(v, cfg);
        } else if (key == "sweep") {
            detail::require_object(v, key);
            detail::parse_sweep(v, cfg);
        } else if (key == "ingest") {
            detail::require_object(v, key);
            detail::parse_ingest(v, cfg);
        } else if (key == "seed") {
            cfg.seed = detail::as_u64(v, key);
        } else if (key == "output_dir") {
            cfg.output_dir = detail::as_str(v, key);
        } else {
            detail::unknown_key(key);
        }
    }
    return cfg;
}

// Full effective configuration, every key explicit. Feeding this back through
// config_from_json reproduces the RunConfig exactly, which is what makes run
// manifests replayable.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["model"] = {{"r", cfg.model.r},
                  {"delta", cfg.model.delta},
                  {"lambda", cfg.model.lambda},
                  {"c", cfg.model.c},
                  {"eps", cfg.model.eps}};
    j["grid"] = {{"k_max", cfg.k_max},
                 {"n", cfg.n},
                 {"l_max", cfg.l_max},
                 {"m", cfg.m},
                 {"np", cfg.np}};
    j["solver"] = {{"tol", cfg.solver.tol},
                   {"max_iters", cfg.solver.max_iters},
                   {"cfl", cfg.solver.cfl}};
    j["price"] = {
        {"drift", cfg.price.drift_kind == DriftKind::constant ? "constant" : "affine"},
        {"a", cfg.price.a},
        {"b", cfg.price.b},
        {"nu", cfg.price.nu},
        {"reward",
         cfg.price.reward_kind == RewardKind::identity ? "identity"
                                                       : "exponential_capped"},
        {"cap_a", cfg.price.cap_a},
        {"p_min", cfg.price.p_min},
        {"p_max", cfg.price.p_max},
        {"lam2_adjust",
         cfg.lam2_adjust == Lam2Adjust::multiply ? "multiply" : "divide"}};
    j["two_pop"] = {{"r1", cfg.two_pop.r1},   {"r2", cfg.two_pop.r2},
                    {"lam1", cfg.two_pop.lam1}, {"lam2", cfg.two_pop.lam2},
                    {"c1", cfg.two_pop.c1},   {"c2", cfg.two_pop.c2},
                    {"delta", cfg.two_pop.delta}, {"eps", cfg.two_pop.eps}};
    j["trajectory"] = {{"k0", cfg.k0},
                       {"l0", cfg.l0},
                       {"p0", cfg.p0},
                       {"horizon", cfg.horizon},
                       {"dt", cfg.dt}};
    j["obstacle"] = {{"etas", cfg.etas}};
    j["sweep"] = {{"param", cfg.sweep_param},
                  {"values", cfg.sweep_values},
                  {"pde_check", cfg.sweep_pde_check}};
    j["ingest"] = {{"path", cfg.input_path}, {"delta", cfg.ingest_delta}};
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    return j;
}

namespace detail {

// "a.b.c=VALUE": VALUE parsed as JSON when possible, else taken verbatim.
inline void apply_override(nlohmann::json& root, const std::string& kv) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("config: override must look like key.path=value, got \"" +
                          kv + "\"");
    }
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw;
    }
    nlohmann::json* cur = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string seg = key.substr(start, dot - start);
        if (seg.empty()) {
            throw ConfigError("config: override path \"" + key +
                              "\" has an empty segment");
        }
        if (!cur->is_object() && !cur->is_null()) {
            throw ConfigError("config: override path \"" + key +
                              "\" crosses a non-object value");
        }
        if (dot == std::string::npos) {
            (*cur)[seg] = value;
            return;
        }
        cur = &(*cur)[seg];
        start = dot + 1;
    }
}

}  // namespace detail

inline nlohmann::json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config: " + path);
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

// Empty path starts from an all-defaults document; overrides then config file
// keys both funnel through the same strict parser.
inline RunConfig load_run_config(const std::string& config_path,
                                 const std::vector<std::string>& overrides) {
    nlohmann::json j = config_path.empty() ? nlohmann::json::object()
                                           : read_config_file(config_path);
    if (!j.is_object()) {
        throw ConfigError("config: top level must be an object");
    }
    for (const std::string& kv : overrides) {
        detail::apply_override(j, kv);
    }
    return config_from_json(j);
}

// Grid materialisation. The sentinel k_max = 0 derives the truncation from
// the model; pair grids cover the widest profitable box of the two costs.
inline Grid1D grid_k_of(const RunConfig& cfg) {
    const double k_max =
        cfg.k_max > 0.0 ? cfg.k_max : default_k_max(cfg.model);
    return Grid1D{k_max, cfg.n};
}

inline std::pair<Grid1D, Grid1D> pair_grids_of(const RunConfig& cfg,
                                               std::size_t default_m) {
    const std::size_t m = cfg.m > 0 ? cfg.m : default_m;
    const double k_max = cfg.k_max > 0.0
                             ? cfg.k_max
                             : 1.2 / std::min(cfg.two_pop.c1, cfg.two_pop.c2);
    const double l_max = cfg.l_max > 0.0 ? cfg.l_max : k_max;
    return {Grid1D{k_max, m}, Grid1D{l_max, m}};
}

}  // namespace mfgpow
