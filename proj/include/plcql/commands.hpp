#pragma once

#include <string>

#include "plcql/config.hpp"

namespace plcql {

/// Dispatches one subcommand with a fully-assembled config; throws on
/// failure (ConfigError for bad configuration, other exceptions for runtime
/// problems). A nonzero return means the command ran but its checks failed.
int run_command(const std::string& command, ConfigMap cfg);

/// Full CLI entry: `plcql <command> [--config file] [--key value ...]`.
/// Exit codes: 0 success, 2 configuration error, 3 runtime error.
int run_cli(int argc, const char* const* argv);

void cmd_gen_data(ConfigMap& cfg);
void cmd_train(ConfigMap& cfg);
void cmd_eval(ConfigMap& cfg);
void cmd_ablate(ConfigMap& cfg);
int cmd_verify(ConfigMap& cfg);
void cmd_bench(ConfigMap& cfg);

} // namespace plcql
