// Aggregated experiment results and their CSV serialization.

#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pinch {

struct ResultRow {
  double sweep = 0.0;
  std::string scheme;
  double mean_rate = 0.0;
  double std_rate = 0.0;
  double mean_runtime_s = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& scheme, double sweep) const {
    for (const auto& r : rows)
      if (r.scheme == scheme && r.sweep == sweep) return &r;
    return nullptr;
  }
};

inline constexpr const char* kCsvHeader = "sweep,scheme,mean_rate_bps_hz,std_rate,mean_runtime_s";

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string to_csv(const ResultTable& table) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : table.rows) {
    out += format_number(r.sweep);
    out += ',';
    out += r.scheme;
    out += ',';
    out += format_number(r.mean_rate);
    out += ',';
    out += format_number(r.std_rate);
    out += ',';
    out += format_number(r.mean_runtime_s);
    out += '\n';
  }
  return out;
}

inline void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << to_csv(table);
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace pinch
