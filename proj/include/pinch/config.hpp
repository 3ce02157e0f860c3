// Flat key=value experiment configuration.
//
//   # comment
//   exp = fig7
//   power_dbm = 30,35,40,45
//   region_m = 10,20
//
// A value list on the sweep or series variable replaces that axis; any other
// variable key takes a single value and sets the base parameters.

#pragma once

#include "pinch/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace pinch {

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline ConfigEntries parse_config_text(const std::string& text) {
  ConfigEntries out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ValidationError("config line " + std::to_string(line_no) + ": empty key or value");
    out.emplace_back(key, value);
  }
  return out;
}

inline ConfigEntries load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

inline double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError(key + ": '" + text + "' is not a number");
  }
  if (used != text.size() || !std::isfinite(v)) throw ValidationError(key + ": '" + text + "' is not a number");
  return v;
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number(key, item));
  if (out.empty()) throw ValidationError(key + ": empty list");
  return out;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (v != std::floor(v) || std::abs(v) > 2e9) throw ValidationError(key + ": '" + text + "' is not an integer");
  return static_cast<int>(v);
}

inline std::uint64_t parse_seed(const std::string& text) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    throw ValidationError("seed: '" + text + "' is not an unsigned integer");
  }
  if (used != text.size() || text.front() == '-') throw ValidationError("seed: '" + text + "' is not an unsigned integer");
  return v;
}

inline bool is_variable(const std::string& key) {
  return std::find(known_variables().begin(), known_variables().end(), key) != known_variables().end();
}

// Later entries win, so passing file entries followed by command-line entries
// gives flags precedence.
inline ExperimentSpec build_spec(const ConfigEntries& entries) {
  std::string exp = "custom";
  for (const auto& [k, v] : entries)
    if (k == "exp") exp = v;
  ExperimentSpec spec = default_spec(parse_experiment_id(exp));

  for (const auto& [k, v] : entries) {
    if (k == "sweep") {
      spec.sweep.variable = v;
    } else if (k == "series") {
      if (v == "none")
        spec.series.reset();
      else if (spec.series)
        spec.series->variable = v;
      else
        spec.series = Axis{v, {}};
    }
  }

  for (const auto& [k, v] : entries) {
    if (k == "exp" || k == "sweep" || k == "series") continue;
    if (k == "seed") {
      spec.seed = parse_seed(v);
    } else if (k == "drops") {
      spec.drops = parse_int(k, v);
    } else if (k == "threads") {
      spec.threads = parse_int(k, v);
    } else if (k == "schemes") {
      spec.schemes = split_list(v);
    } else if (k == "grid_step_m") {
      spec.wmmse.grid_step_m = parse_number(k, v);
    } else if (k == "profile_antenna") {
      spec.profile_antenna = parse_int(k, v);
    } else if (k == "wmmse_max_iter") {
      spec.wmmse.max_iterations = parse_int(k, v);
    } else if (k == "wmmse_tol") {
      spec.wmmse.tolerance = parse_number(k, v);
    } else if (k == "mrc_max_iter") {
      spec.mrc.max_iterations = parse_int(k, v);
    } else if (k == "mrc_tol") {
      spec.mrc.tolerance = parse_number(k, v);
    } else if (k == "sweep_values") {
      spec.sweep.values = parse_number_list(k, v);
    } else if (k == "series_values") {
      if (!spec.series) throw ValidationError("series_values given without a series variable");
      spec.series->values = parse_number_list(k, v);
    } else if (is_variable(k)) {
      const std::vector<double> values = parse_number_list(k, v);
      if (k == spec.sweep.variable) {
        spec.sweep.values = values;
      } else if (spec.series && k == spec.series->variable) {
        spec.series->values = values;
      } else {
        if (values.size() != 1) throw ValidationError(k + " is not swept here and takes a single value");
        apply_variable(spec.params, k, values.front());
      }
    } else {
      throw ValidationError("unknown config key '" + k + "'");
    }
  }
  if (spec.mrc.max_iterations < 1 || spec.wmmse.max_iterations < 1)
    throw ValidationError("iteration caps must be >= 1");
  // Keep the base parameters on the first grid point so derived quantities
  // (profile length, timing geometry) match what is swept.
  if (!spec.sweep.values.empty() && is_variable(spec.sweep.variable))
    apply_variable(spec.params, spec.sweep.variable, spec.sweep.values.front());
  validate_spec(spec);
  return spec;
}

}  // namespace pinch
