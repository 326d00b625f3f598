#pragma once

#include <string>

#include "crossloc/evaluation.hpp"
#include "crossloc/training.hpp"

namespace crossloc {

// Everything the pipeline commands consume, assembled from defaults, an
// optional JSON config file, and command-line overrides (in that order of
// increasing precedence).
struct AppConfig {
  TrainConfig train;  // carries the encoder and augmentation settings
  EvalOptions eval;
  std::string runs_dir;
  std::string regions_path;
};

// Strict JSON config: optional top-level keys "seed", "paths", "encoder",
// "train", "augment", "eval", each section an object of scalar settings.
// Unknown keys anywhere raise ConfigError naming the offending key; missing
// keys keep their defaults. The result is fully validated.
AppConfig parse_app_config(const std::string& json_text);
AppConfig load_app_config(const std::string& path);

void validate_app_config(const AppConfig& cfg);

}  // namespace crossloc
