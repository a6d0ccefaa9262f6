#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "plcql/env.hpp"
#include "plcql/text_io.hpp"
#include "plcql/trainer.hpp"

namespace plcql {

/// Flat dotted-key configuration: values from an optional structured-text
/// file with command-line flags layered on top. Every getter records the
/// effective value (default or provided) so run summaries can echo the full
/// configuration; unclaimed keys are fatal at finish().
class ConfigMap {
  public:
    static ConfigMap from_file(const std::string& path);
    static ConfigMap from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
    void overlay(const std::string& key, const std::string& value);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def);
    std::string require_string(const std::string& key);
    double get_double(const std::string& key, double def);
    long long get_int(const std::string& key, long long def);
    long long require_int(const std::string& key);
    bool get_bool(const std::string& key, bool def);
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def);
    std::vector<int> get_ints(const std::string& key, const std::vector<int>& def);

    /// Throws one ConfigError listing every missing required key.
    void require_present(const std::vector<std::string>& keys) const;
    /// Unknown (never consumed) keys are configuration errors, not noise.
    void finish() const;

    /// Effective configuration (defaults included), in consumption order.
    const TextDoc& effective() const { return effective_; }

  private:
    std::string raw(const std::string& key);

    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
    TextDoc effective_;
};

/// Consumes the env.* block and builds the configured environment.
std::unique_ptr<Env> build_env(ConfigMap& cfg);

/// Consumes the train.* block; validates ranges against the agent count.
TrainConfig build_train_config(ConfigMap& cfg, int n);

} // namespace plcql
