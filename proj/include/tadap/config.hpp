#pragma once

// Run configuration from a TOML-style file:
//
//   # comment
//   [section]
//   key = value        strings may be bare or "quoted"
//
// Every key must be known; anything else is a config error.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "tadap/crf.hpp"
#include "tadap/error.hpp"
#include "tadap/head.hpp"
#include "tadap/labeler.hpp"

namespace tadap {

enum class LogLevel { error, warn, info, debug };

struct PathConfig {
  std::string images, features, gnss, boxes, calibration, frames, output, ground_truth;
};

struct TrajectoryConfig {
  double horizon_m = 50.0;
  double min_length_m = 5.0;
  double time_tolerance = 0.1;  // seconds between a frame and its GNSS pose
  double min_box_confidence = 0.5;
};

struct EvalConfig {
  std::size_t hood_rows = 0;
  bool strict = false;
  bool strict_masks = false;  // reject ground-truth values other than 0/255
};

struct RunConfig {
  PathConfig paths;
  LabelConfig label;
  TrainConfig train;
  TrajectoryConfig trajectory;
  EvalConfig eval;
  unsigned workers = 0;  // 0 = hardware concurrency
  LogLevel log_level = LogLevel::info;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  require(!v.empty() && end == v.c_str() + v.size() && std::isfinite(d), Errc::config,
          key + ": expected a number, got '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  require(!v.empty() && end == v.c_str() + v.size(), Errc::config, key + ": expected an integer, got '" + v + "'");
  return i;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const long long i = parse_int(key, v);
  require(i >= 0, Errc::config, key + " must be >= 0");
  return static_cast<std::size_t>(i);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw Error(Errc::config, key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

/// Raw `section.key -> value` pairs.
inline std::map<std::string, std::string> parse_config_pairs(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      require(t.back() == ']' && t.size() > 2, Errc::config, where + "malformed section header");
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    require(eq != std::string::npos, Errc::config, where + "expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    if (!value.empty() && value.front() == '"') {
      const auto close = value.find('"', 1);
      require(close != std::string::npos, Errc::config, where + "unterminated string");
      require(detail::trim(value.substr(close + 1)).empty() || detail::trim(value.substr(close + 1))[0] == '#',
              Errc::config, where + "trailing characters after string");
      value = value.substr(1, close - 1);
    } else if (const auto hash = value.find('#'); hash != std::string::npos) {
      value = detail::trim(value.substr(0, hash));
    }
    require(!key.empty(), Errc::config, where + "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    require(!out.contains(full), Errc::config, where + "duplicate key " + full);
    out[full] = value;
  }
  return out;
}

inline void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& pairs) {
  using namespace detail;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const auto str = [](std::string& dst) -> Setter { return [&dst](const std::string&, const std::string& v) { dst = v; }; };
  const auto num = [](double& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_double(k, v); };
  };
  const auto count = [](std::size_t& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_count(k, v); };
  };
  const auto flag = [](bool& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = parse_bool(k, v); };
  };
  std::map<std::string, Setter> setters{
      {"paths.images", str(cfg.paths.images)},
      {"paths.features", str(cfg.paths.features)},
      {"paths.gnss", str(cfg.paths.gnss)},
      {"paths.boxes", str(cfg.paths.boxes)},
      {"paths.calibration", str(cfg.paths.calibration)},
      {"paths.frames", str(cfg.paths.frames)},
      {"paths.output", str(cfg.paths.output)},
      {"paths.ground_truth", str(cfg.paths.ground_truth)},
      {"label.threshold", num(cfg.label.threshold)},
      {"label.iterations", [&](const std::string& k, const std::string& v) { cfg.label.iterations = static_cast<int>(parse_int(k, v)); }},
      {"label.use_crf", flag(cfg.label.use_crf)},
      {"label.horizon_row", [&](const std::string& k, const std::string& v) { cfg.label.horizon_row = parse_count(k, v); }},
      {"label.patch_size", count(cfg.label.patch_size)},
      {"label.coverage", num(cfg.label.coverage)},
      {"label.second_sample",
       [&](const std::string& k, const std::string& v) {
         if (v == "threshold") cfg.label.second_sample = SecondSample::threshold;
         else if (v == "crf") cfg.label.second_sample = SecondSample::crf;
         else throw Error(Errc::config, k + ": expected threshold or crf");
       }},
      {"label.fmax_below_horizon", flag(cfg.label.fmax_below_horizon)},
      {"crf.a", num(cfg.label.crf.appearance_weight)},
      {"crf.b", num(cfg.label.crf.smoothness_weight)},
      {"crf.theta_alpha", num(cfg.label.crf.theta_alpha)},
      {"crf.theta_beta", num(cfg.label.crf.theta_beta)},
      {"crf.theta_gamma", num(cfg.label.crf.theta_gamma)},
      {"crf.iterations", [&](const std::string& k, const std::string& v) { cfg.label.crf.iterations = static_cast<int>(parse_int(k, v)); }},
      {"crf.epsilon", num(cfg.label.crf.epsilon)},
      {"crf.max_colour_layers", count(cfg.label.crf.max_colour_layers)},
      {"trajectory.horizon_m", num(cfg.trajectory.horizon_m)},
      {"trajectory.min_length_m", num(cfg.trajectory.min_length_m)},
      {"trajectory.time_tolerance", num(cfg.trajectory.time_tolerance)},
      {"trajectory.min_box_confidence", num(cfg.trajectory.min_box_confidence)},
      {"train.learning_rate", num(cfg.train.learning_rate)},
      {"train.batch_size", count(cfg.train.batch_size)},
      {"train.batch_unit",
       [&](const std::string& k, const std::string& v) {
         if (v == "frames") cfg.train.batch_unit = BatchUnit::frames;
         else if (v == "patches") cfg.train.batch_unit = BatchUnit::patches;
         else throw Error(Errc::config, k + ": expected frames or patches");
       }},
      {"train.epochs", [&](const std::string& k, const std::string& v) { cfg.train.epochs = static_cast<int>(parse_int(k, v)); }},
      {"train.seed", [&](const std::string& k, const std::string& v) { cfg.train.seed = static_cast<std::uint64_t>(parse_count(k, v)); }},
      {"eval.hood_rows", count(cfg.eval.hood_rows)},
      {"eval.strict", flag(cfg.eval.strict)},
      {"eval.strict_masks", flag(cfg.eval.strict_masks)},
      {"run.workers", [&](const std::string& k, const std::string& v) { cfg.workers = static_cast<unsigned>(parse_count(k, v)); }},
      {"run.log_level",
       [&](const std::string& k, const std::string& v) {
         if (v == "error") cfg.log_level = LogLevel::error;
         else if (v == "warn") cfg.log_level = LogLevel::warn;
         else if (v == "info") cfg.log_level = LogLevel::info;
         else if (v == "debug") cfg.log_level = LogLevel::debug;
         else throw Error(Errc::config, k + ": expected error, warn, info or debug");
       }},
  };
  for (const auto& [key, value] : pairs) {
    const auto it = setters.find(key);
    require(it != setters.end(), Errc::config, "unknown config key '" + key + "'");
    it->second(key, value);
  }
  cfg.label.validate();
  cfg.train.validate();
  require(cfg.trajectory.horizon_m > 0 && cfg.trajectory.time_tolerance >= 0 && cfg.trajectory.min_length_m >= 0,
          Errc::config, "bad trajectory settings");
}

inline RunConfig load_config(std::istream& in) {
  RunConfig cfg;
  apply_config(cfg, parse_config_pairs(in));
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::config, "cannot open config file " + path);
  return load_config(in);
}

}  // namespace tadap
