#pragma once

#include <cstdint>
#include <string>

#include "plcql/mlp.hpp"
#include "plcql/text_io.hpp"

namespace plcql {

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes one network (plus optimizer state) into a TextDoc under a key
/// prefix, so multi-network components can share a single document.
void write_net(TextDoc& doc, const std::string& prefix, const Mlp& net);
Mlp read_net(const TextDoc& doc, const std::string& prefix);

void write_optimizer(TextDoc& doc, const std::string& prefix, const Optimizer& opt, const Mlp& owner);
Optimizer read_optimizer(const TextDoc& doc, const std::string& prefix, const Mlp& owner);

/// Checkpoint header: format_version, module tag, rng seed, step counter.
TextDoc make_checkpoint(const std::string& module_tag, std::uint64_t rng_seed, long long step);
/// Validates format_version and module tag on load.
TextDoc open_checkpoint(const std::string& path, const std::string& expected_module);

} // namespace plcql
