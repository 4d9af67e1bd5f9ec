#pragma once

#include <string>

#include "reschunk/training.hpp"

namespace reschunk {

/// Everything a run needs, settable from one flat key-value file.
struct RunConfig {
  ModelConfig model;
  OptimizerConfig opt;
  HorizonSpec horizons;
};

/// Applies `key = value` to the matching field. Keys are exactly the field
/// names of ModelConfig, OptimizerConfig and HorizonSpec; unknown keys and
/// unparsable values raise ConfigError. List-valued fields (horizons_ms,
/// fixed_partition) take comma-separated integers.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Reads a config file: one `key = value` per line, `#` comments, blank
/// lines ignored.
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Full key dump in file syntax; every load/set round-trips through this.
std::string render_config(const RunConfig& cfg);

}  // namespace reschunk
