#include "crossloc/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "crossloc/errors.hpp"

namespace crossloc {

namespace {

using nlohmann::json;

[[noreturn]] void bad_value(const std::string& key, const char* want) {
  throw ConfigError("config key '" + key + "' must be " + want);
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) bad_value(key, "a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_value(key, "an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    bad_value(key, "a non-negative integer");
  }
  if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
    bad_value(key, "a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_value(key, "a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) bad_value(key, "a boolean");
  return v.get<bool>();
}

void apply_paths(const json& section, AppConfig& cfg) {
  for (const auto& [key, value] : section.items()) {
    if (key == "runs_dir") {
      cfg.runs_dir = as_string(value, "paths.runs_dir");
    } else if (key == "regions") {
      cfg.regions_path = as_string(value, "paths.regions");
    } else {
      throw ConfigError("unknown config key 'paths." + key + "'");
    }
  }
}

void apply_encoder(const json& section, EncoderConfig& cfg) {
  for (const auto& [key, value] : section.items()) {
    const std::string full = "encoder." + key;
    if (key == "image_width") {
      cfg.image_width = as_int(value, full);
    } else if (key == "image_height") {
      cfg.image_height = as_int(value, full);
    } else if (key == "conv_channels") {
      cfg.conv_channels = as_int(value, full);
    } else if (key == "feature_dim") {
      cfg.feature_dim = as_int(value, full);
    } else if (key == "clusters") {
      cfg.clusters = as_int(value, full);
    } else if (key == "head") {
      cfg.head = as_string(value, full);
    } else if (key == "mlp_hidden") {
      cfg.mlp_hidden = as_int(value, full);
    } else if (key == "mlp_ev_dim") {
      cfg.mlp_ev_dim = as_int(value, full);
    } else if (key == "n_pts") {
      cfg.n_pts = as_int(value, full);
    } else if (key == "init_seed") {
      cfg.init_seed = as_u64(value, full);
    } else {
      throw ConfigError("unknown config key '" + full + "'");
    }
  }
}

void apply_train(const json& section, TrainConfig& cfg) {
  for (const auto& [key, value] : section.items()) {
    const std::string full = "train." + key;
    if (key == "paradigm") {
      cfg.paradigm = as_string(value, full);
    } else if (key == "places_per_batch") {
      cfg.places_per_batch = as_int(value, full);
    } else if (key == "samples_per_place") {
      cfg.samples_per_place = as_int(value, full);
    } else if (key == "epochs") {
      cfg.epochs = as_int(value, full);
    } else if (key == "learning_rate") {
      cfg.learning_rate = as_double(value, full);
    } else if (key == "beta1") {
      cfg.beta1 = as_double(value, full);
    } else if (key == "beta2") {
      cfg.beta2 = as_double(value, full);
    } else if (key == "adam_eps") {
      cfg.adam_eps = as_double(value, full);
    } else if (key == "loss_preset") {
      cfg.loss_preset = as_string(value, full);
    } else if (key == "distance") {
      cfg.distance = parse_distance_kind(as_string(value, full));
    } else if (key == "student_distance") {
      cfg.student_distance = parse_distance_kind(as_string(value, full));
    } else if (key == "margin") {
      cfg.margin = as_double(value, full);
    } else if (key == "augment_enabled") {
      cfg.augment_enabled = as_bool(value, full);
    } else {
      throw ConfigError("unknown config key '" + full + "'");
    }
  }
}

void apply_augment(const json& section, AugmentConfig& cfg) {
  for (const auto& [key, value] : section.items()) {
    const std::string full = "augment." + key;
    if (key == "brightness_jitter") {
      cfg.brightness_jitter = as_double(value, full);
    } else if (key == "contrast_jitter") {
      cfg.contrast_jitter = as_double(value, full);
    } else if (key == "saturation_jitter") {
      cfg.saturation_jitter = as_double(value, full);
    } else if (key == "hue_shift") {
      cfg.hue_shift = as_double(value, full);
    } else if (key == "image_rotation_deg") {
      cfg.image_rotation_deg = as_double(value, full);
    } else if (key == "image_shift_frac") {
      cfg.image_shift_frac = as_double(value, full);
    } else if (key == "cloud_translation_m") {
      cfg.cloud_translation_m = as_double(value, full);
    } else if (key == "cloud_yaw_deg") {
      cfg.cloud_yaw_deg = as_double(value, full);
    } else if (key == "cloud_pitch_roll_deg") {
      cfg.cloud_pitch_roll_deg = as_double(value, full);
    } else if (key == "mirror_probability") {
      cfg.mirror_probability = as_double(value, full);
    } else if (key == "seed") {
      cfg.seed = as_u64(value, full);
    } else {
      throw ConfigError("unknown config key '" + full + "'");
    }
  }
}

void apply_eval(const json& section, EvalOptions& cfg) {
  for (const auto& [key, value] : section.items()) {
    const std::string full = "eval." + key;
    if (key == "k_max") {
      cfg.k_max = as_int(value, full);
    } else if (key == "threshold_m") {
      cfg.threshold_m = as_double(value, full);
    } else if (key == "db_spacing_m") {
      cfg.db_spacing_m = as_double(value, full);
    } else if (key == "query_spacing_m") {
      cfg.query_spacing_m = as_double(value, full);
    } else {
      throw ConfigError("unknown config key '" + full + "'");
    }
  }
}

}  // namespace

AppConfig parse_app_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  AppConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed") {
      cfg.train.seed = as_u64(value, "seed");
    } else if (key == "paths") {
      if (!value.is_object()) bad_value("paths", "an object");
      apply_paths(value, cfg);
    } else if (key == "encoder") {
      if (!value.is_object()) bad_value("encoder", "an object");
      apply_encoder(value, cfg.train.encoder);
    } else if (key == "train") {
      if (!value.is_object()) bad_value("train", "an object");
      apply_train(value, cfg.train);
    } else if (key == "augment") {
      if (!value.is_object()) bad_value("augment", "an object");
      apply_augment(value, cfg.train.augment);
    } else if (key == "eval") {
      if (!value.is_object()) bad_value("eval", "an object");
      apply_eval(value, cfg.eval);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  validate_app_config(cfg);
  return cfg;
}

AppConfig load_app_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_app_config(buf.str());
}

void validate_app_config(const AppConfig& cfg) {
  validate_train_config(cfg.train);
  if (cfg.eval.k_max < 1) throw ConfigError("eval.k_max must be at least 1");
  if (cfg.eval.threshold_m <= 0.0) {
    throw ConfigError("eval.threshold_m must be positive");
  }
  if (cfg.eval.db_spacing_m < 0.0 || cfg.eval.query_spacing_m < 0.0) {
    throw ConfigError("eval spacings must be non-negative");
  }
}

}  // namespace crossloc
