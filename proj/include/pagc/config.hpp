#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "pagc/training.hpp"

namespace pagc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kConfigSchemaVersion = 1;

// Full run configuration. Every field has the stock default, so an
// empty object (plus schema_version) is a valid config; unknown keys
// are rejected by name.
struct RunConfig {
    int schema_version = kConfigSchemaVersion;
    uint64_t world_seed = 0;
    uint64_t probe_seed = 1234;
    std::string out_dir = "out";
    int stage1_seeds = 5;
    int stage2_seeds = 6;
    Stage1Config stage1;
    Stage2Config stage2;

    bool operator==(const RunConfig& o) const {
        auto lw = [](const LossWeights& a, const LossWeights& b) {
            return a.pred == b.pred && a.smooth == b.smooth && a.actor == b.actor &&
                   a.entropy == b.entropy;
        };
        return schema_version == o.schema_version && world_seed == o.world_seed &&
               probe_seed == o.probe_seed && out_dir == o.out_dir &&
               stage1_seeds == o.stage1_seeds && stage2_seeds == o.stage2_seeds &&
               stage1.sigma_left == o.stage1.sigma_left &&
               stage1.sigma_right == o.stage1.sigma_right &&
               stage1.total_steps == o.stage1.total_steps &&
               stage1.steps_per_episode == o.stage1.steps_per_episode &&
               stage1.learning_rate == o.stage1.learning_rate &&
               stage1.fixed_alpha == o.stage1.fixed_alpha && lw(stage1.weights, o.stage1.weights) &&
               stage1.actor_period == o.stage1.actor_period &&
               stage2.sigma_left == o.stage2.sigma_left &&
               stage2.sigma_right == o.stage2.sigma_right && stage2.episodes == o.stage2.episodes &&
               stage2.block_len == o.stage2.block_len &&
               stage2.steps_per_episode == o.stage2.steps_per_episode &&
               stage2.alpha_lo == o.stage2.alpha_lo && stage2.alpha_hi == o.stage2.alpha_hi &&
               stage2.learning_rate == o.stage2.learning_rate &&
               stage2.lambda_pred == o.stage2.lambda_pred &&
               stage2.lambda_smooth == o.stage2.lambda_smooth &&
               stage2.perturb_window_len == o.stage2.perturb_window_len;
    }
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                           const std::string& scope) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key '" +
                              (scope.empty() ? it.key() : scope + "." + it.key()) + "'");
    }
}

template <class T>
void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    using detail::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");
    detail::reject_unknown(j,
                           {"schema_version", "world_seed", "probe_seed", "out_dir", "seed_grid",
                            "stage1", "stage2"},
                           "");
    if (!j.contains("schema_version")) throw ConfigError("missing required key 'schema_version'");

    RunConfig cfg;
    cfg.schema_version = j.at("schema_version").get<int>();
    if (cfg.schema_version != kConfigSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version));
    detail::get_if(j, "world_seed", cfg.world_seed);
    detail::get_if(j, "probe_seed", cfg.probe_seed);
    detail::get_if(j, "out_dir", cfg.out_dir);

    if (j.contains("seed_grid")) {
        const auto& g = j.at("seed_grid");
        detail::reject_unknown(g, {"stage1", "stage2"}, "seed_grid");
        detail::get_if(g, "stage1", cfg.stage1_seeds);
        detail::get_if(g, "stage2", cfg.stage2_seeds);
    }
    if (j.contains("stage1")) {
        const auto& s = j.at("stage1");
        detail::reject_unknown(s,
                               {"sigma_left", "sigma_right", "total_steps", "steps_per_episode",
                                "learning_rate", "fixed_alpha", "lambda_pred", "lambda_smooth",
                                "lambda_actor", "lambda_entropy", "actor_period"},
                               "stage1");
        detail::get_if(s, "sigma_left", cfg.stage1.sigma_left);
        detail::get_if(s, "sigma_right", cfg.stage1.sigma_right);
        detail::get_if(s, "total_steps", cfg.stage1.total_steps);
        detail::get_if(s, "steps_per_episode", cfg.stage1.steps_per_episode);
        detail::get_if(s, "learning_rate", cfg.stage1.learning_rate);
        detail::get_if(s, "fixed_alpha", cfg.stage1.fixed_alpha);
        detail::get_if(s, "lambda_pred", cfg.stage1.weights.pred);
        detail::get_if(s, "lambda_smooth", cfg.stage1.weights.smooth);
        detail::get_if(s, "lambda_actor", cfg.stage1.weights.actor);
        detail::get_if(s, "lambda_entropy", cfg.stage1.weights.entropy);
        detail::get_if(s, "actor_period", cfg.stage1.actor_period);
    }
    if (j.contains("stage2")) {
        const auto& s = j.at("stage2");
        detail::reject_unknown(s,
                               {"sigma_left", "sigma_right", "episodes", "block_len",
                                "steps_per_episode", "alpha_lo", "alpha_hi", "learning_rate",
                                "lambda_pred", "lambda_smooth", "perturb_window_len"},
                               "stage2");
        detail::get_if(s, "sigma_left", cfg.stage2.sigma_left);
        detail::get_if(s, "sigma_right", cfg.stage2.sigma_right);
        detail::get_if(s, "episodes", cfg.stage2.episodes);
        detail::get_if(s, "block_len", cfg.stage2.block_len);
        detail::get_if(s, "steps_per_episode", cfg.stage2.steps_per_episode);
        detail::get_if(s, "alpha_lo", cfg.stage2.alpha_lo);
        detail::get_if(s, "alpha_hi", cfg.stage2.alpha_hi);
        detail::get_if(s, "learning_rate", cfg.stage2.learning_rate);
        detail::get_if(s, "lambda_pred", cfg.stage2.lambda_pred);
        detail::get_if(s, "lambda_smooth", cfg.stage2.lambda_smooth);
        detail::get_if(s, "perturb_window_len", cfg.stage2.perturb_window_len);
    }

    if (cfg.stage1_seeds <= 0 || cfg.stage2_seeds <= 0)
        throw ConfigError("seed_grid entries must be positive");
    try {
        cfg.stage1.validate();
        cfg.stage2.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline std::string serialize_config(const RunConfig& cfg) {
    using detail::json;
    json j;
    j["schema_version"] = cfg.schema_version;
    j["world_seed"] = cfg.world_seed;
    j["probe_seed"] = cfg.probe_seed;
    j["out_dir"] = cfg.out_dir;
    j["seed_grid"] = {{"stage1", cfg.stage1_seeds}, {"stage2", cfg.stage2_seeds}};
    j["stage1"] = {{"sigma_left", cfg.stage1.sigma_left},
                   {"sigma_right", cfg.stage1.sigma_right},
                   {"total_steps", cfg.stage1.total_steps},
                   {"steps_per_episode", cfg.stage1.steps_per_episode},
                   {"learning_rate", cfg.stage1.learning_rate},
                   {"fixed_alpha", cfg.stage1.fixed_alpha},
                   {"lambda_pred", cfg.stage1.weights.pred},
                   {"lambda_smooth", cfg.stage1.weights.smooth},
                   {"lambda_actor", cfg.stage1.weights.actor},
                   {"lambda_entropy", cfg.stage1.weights.entropy},
                   {"actor_period", cfg.stage1.actor_period}};
    j["stage2"] = {{"sigma_left", cfg.stage2.sigma_left},
                   {"sigma_right", cfg.stage2.sigma_right},
                   {"episodes", cfg.stage2.episodes},
                   {"block_len", cfg.stage2.block_len},
                   {"steps_per_episode", cfg.stage2.steps_per_episode},
                   {"alpha_lo", cfg.stage2.alpha_lo},
                   {"alpha_hi", cfg.stage2.alpha_hi},
                   {"learning_rate", cfg.stage2.learning_rate},
                   {"lambda_pred", cfg.stage2.lambda_pred},
                   {"lambda_smooth", cfg.stage2.lambda_smooth},
                   {"perturb_window_len", cfg.stage2.perturb_window_len}};
    return j.dump(2) + "\n";
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

}  // namespace pagc
