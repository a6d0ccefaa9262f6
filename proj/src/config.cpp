#include "plcql/config.hpp"

#include <algorithm>

#include "plcql/errors.hpp"

namespace plcql {

ConfigMap ConfigMap::from_file(const std::string& path) {
    ConfigMap cfg;
    const TextDoc doc = TextDoc::parse(read_file(path));
    for (const auto& [k, v] : doc.entries()) cfg.values_[k] = v;
    return cfg;
}

ConfigMap ConfigMap::from_entries(const std::vector<std::pair<std::string, std::string>>& entries) {
    ConfigMap cfg;
    for (const auto& [k, v] : entries) cfg.values_[k] = v;
    return cfg;
}

void ConfigMap::overlay(const std::string& key, const std::string& value) { values_[key] = value; }

std::string ConfigMap::raw(const std::string& key) {
    consumed_.insert(key);
    return values_.at(key);
}

std::string ConfigMap::get_string(const std::string& key, const std::string& def) {
    const std::string v = has(key) ? raw(key) : def;
    effective_.set(key, v);
    return v;
}

std::string ConfigMap::require_string(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required key: " + key);
    const std::string v = raw(key);
    effective_.set(key, v);
    return v;
}

double ConfigMap::get_double(const std::string& key, double def) {
    double v = def;
    if (has(key)) {
        try {
            v = parse_double(raw(key));
        } catch (const IoError&) {
            throw ConfigError("key '" + key + "' is not a number");
        }
    }
    effective_.set_double(key, v);
    return v;
}

long long ConfigMap::get_int(const std::string& key, long long def) {
    long long v = def;
    if (has(key)) {
        try {
            v = parse_int(raw(key));
        } catch (const IoError&) {
            throw ConfigError("key '" + key + "' is not an integer");
        }
    }
    effective_.set_int(key, v);
    return v;
}

long long ConfigMap::require_int(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required key: " + key);
    return get_int(key, 0);
}

bool ConfigMap::get_bool(const std::string& key, bool def) {
    bool v = def;
    if (has(key)) {
        const std::string s = raw(key);
        if (s == "true" || s == "1" || s == "on")
            v = true;
        else if (s == "false" || s == "0" || s == "off")
            v = false;
        else
            throw ConfigError("key '" + key + "' must be a boolean (true/false)");
    }
    effective_.set(key, v ? "true" : "false");
    return v;
}

std::vector<double> ConfigMap::get_doubles(const std::string& key, const std::vector<double>& def) {
    std::vector<double> v = def;
    if (has(key)) {
        try {
            v = split_doubles(raw(key));
        } catch (const IoError&) {
            throw ConfigError("key '" + key + "' must be a space-separated list of numbers");
        }
    }
    effective_.set_doubles(key, v);
    return v;
}

std::vector<int> ConfigMap::get_ints(const std::string& key, const std::vector<int>& def) {
    std::vector<int> v = def;
    if (has(key)) {
        try {
            v = split_ints(raw(key));
        } catch (const IoError&) {
            throw ConfigError("key '" + key + "' must be a space-separated list of integers");
        }
    }
    effective_.set_ints(key, v);
    return v;
}

void ConfigMap::require_present(const std::vector<std::string>& keys) const {
    std::string missing;
    for (const auto& key : keys) {
        if (!has(key)) {
            if (!missing.empty()) missing += ", ";
            missing += key;
        }
    }
    if (!missing.empty()) throw ConfigError("missing required keys: " + missing);
}

void ConfigMap::finish() const {
    std::string unknown;
    for (const auto& [k, v] : values_) {
        if (consumed_.count(k) == 0) {
            if (!unknown.empty()) unknown += ", ";
            unknown += k;
        }
    }
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

std::unique_ptr<Env> build_env(ConfigMap& cfg) {
    const std::string kind = cfg.require_string("env.kind");
    if (kind == "matrix") {
        const int n = static_cast<int>(cfg.require_int("env.n"));
        const int actions = static_cast<int>(cfg.require_int("env.actions_per_agent"));
        if (n < 1) throw ConfigError("key 'env.n' must be >= 1");
        if (actions < 1) throw ConfigError("key 'env.actions_per_agent' must be >= 1");
        std::vector<double> payoff;
        const std::string preset = cfg.get_string("env.matrix_preset", "");
        if (!preset.empty()) {
            if (preset != "coordination") throw ConfigError("key 'env.matrix_preset' has unknown value '" + preset + "'");
            payoff = MatrixGameEnv::coordination_payoff(n, actions);
            // A payoff list may still be supplied; the preset wins if both exist.
            cfg.get_doubles("env.payoff", payoff);
        } else {
            payoff = cfg.get_doubles("env.payoff", {});
            if (payoff.empty()) throw ConfigError("matrix env needs 'env.payoff' or 'env.matrix_preset'");
        }
        return std::make_unique<MatrixGameEnv>(n, actions, std::move(payoff));
    }
    if (kind == "grid_spread") {
        const int n = static_cast<int>(cfg.require_int("env.n"));
        const int side = static_cast<int>(cfg.require_int("env.grid_side"));
        const int horizon = static_cast<int>(cfg.require_int("env.horizon"));
        const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("env.seed", 0));
        const double penalty = cfg.get_double("env.collision_penalty", 1.0);
        if (penalty < 0.0) throw ConfigError("key 'env.collision_penalty' must be >= 0");
        return std::make_unique<GridSpreadEnv>(n, side, horizon, seed, penalty);
    }
    if (kind == "tabular_random") {
        const std::uint64_t seed = static_cast<std::uint64_t>(cfg.require_int("env.seed"));
        const int n = static_cast<int>(cfg.require_int("env.n"));
        const int states = static_cast<int>(cfg.require_int("env.states"));
        const int actions = static_cast<int>(cfg.require_int("env.actions_per_agent"));
        const double scale = cfg.get_double("env.reward_scale", 1.0);
        const int horizon = static_cast<int>(cfg.get_int("env.horizon", 10));
        const double gamma = cfg.get_double("env.gamma", 0.99);
        return std::make_unique<TabularEnv>(random_decmdp(seed, n, states, actions, scale), horizon, seed, gamma);
    }
    throw ConfigError("key 'env.kind' has unknown value '" + kind + "'");
}

TrainConfig build_train_config(ConfigMap& cfg, int n) {
    TrainConfig tc;
    tc.gamma = cfg.get_double("train.gamma", tc.gamma);
    tc.tau = cfg.get_double("train.tau", tc.tau);
    tc.alpha = cfg.get_double("train.alpha", tc.alpha);
    tc.lambda = cfg.get_doubles("train.lambda", {});
    tc.temperature = cfg.get_double("train.temperature", tc.temperature);
    tc.clip_eps = cfg.get_double("train.clip_eps", tc.clip_eps);
    tc.ppo_epochs = static_cast<int>(cfg.get_int("train.ppo_epochs", tc.ppo_epochs));
    tc.ensemble_size = static_cast<int>(cfg.get_int("train.ensemble_size", tc.ensemble_size));
    tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", tc.batch_size));
    tc.iterations = static_cast<int>(cfg.get_int("train.iterations", tc.iterations));
    tc.lr_q = cfg.get_double("train.lr_q", tc.lr_q);
    tc.lr_pi = cfg.get_double("train.lr_pi", tc.lr_pi);
    tc.lr_par = cfg.get_double("train.lr_par", tc.lr_par);
    tc.lr_v = cfg.get_double("train.lr_v", tc.lr_v);
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
    tc.variant = parse_variant(cfg.get_string("train.variant", "plcql"));
    tc.fixed_k = static_cast<int>(cfg.get_int("train.fixed_k", tc.fixed_k));
    tc.advantage_norm = cfg.get_bool("train.advantage_norm", tc.advantage_norm);
    tc.use_target_policy_replacements =
        cfg.get_bool("train.use_target_policy_replacements", tc.use_target_policy_replacements);
    tc.hidden_sizes = cfg.get_ints("train.hidden_sizes", tc.hidden_sizes);
    tc.eval_every = static_cast<int>(cfg.get_int("train.eval_every", tc.eval_every));
    tc.eval_episodes = static_cast<int>(cfg.get_int("train.eval_episodes", tc.eval_episodes));
    tc.checkpoint_every = static_cast<int>(cfg.get_int("train.checkpoint_every", tc.checkpoint_every));
    tc.validate(n);
    return tc;
}

} // namespace plcql
