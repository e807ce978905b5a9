#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gibbs_lines/config.hpp"
#include "gibbs_lines/io.hpp"

namespace gibbs_lines {

using ReportJson = nlohmann::ordered_json;

// One pass/fail row of an experiment report. The comparison string is the
// operator applied as `value <comparison> threshold`.
struct Criterion {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string comparison;
};

inline bool evaluate_comparison(double value, const std::string& comparison,
                                double threshold) {
  if (comparison == "<=") return value <= threshold;
  if (comparison == "<") return value < threshold;
  if (comparison == "==") return value == threshold;
  if (comparison == ">=") return value >= threshold;
  if (comparison == ">") return value > threshold;
  throw std::invalid_argument("unknown comparison '" + comparison + "'");
}

inline Criterion make_criterion(std::string name, double value, std::string comparison,
                                double threshold) {
  Criterion c;
  c.name = std::move(name);
  c.value = value;
  c.threshold = threshold;
  c.comparison = std::move(comparison);
  c.pass = evaluate_comparison(value, c.comparison, threshold);
  return c;
}

inline std::string format_criterion_line(const Criterion& c) {
  return std::string(c.pass ? "[PASS] " : "[FAIL] ") + c.name + ": " +
         format_value(c.value) + " " + c.comparison + " " + format_value(c.threshold);
}

inline ReportJson config_value_to_json(const ConfigValue& v) {
  switch (v.kind) {
    case ConfigValue::Kind::boolean: return v.bool_value;
    case ConfigValue::Kind::integer: return v.int_value;
    case ConfigValue::Kind::floating: return v.float_value;
    case ConfigValue::Kind::string: return v.string_value;
    case ConfigValue::Kind::array: {
      auto arr = ReportJson::array();
      for (const auto& item : v.items) arr.push_back(config_value_to_json(item));
      return arr;
    }
  }
  return nullptr;
}

// Sorted-key echo of the resolved configuration, defaults included.
inline ReportJson config_to_json(const Config& cfg) {
  auto out = ReportJson::object();
  for (const auto& [key, value] : cfg.entries()) out[key] = config_value_to_json(value);
  return out;
}

// Full result of one experiment. The canonical JSON is a pure function of
// the resolved config; wall_seconds is deliberately excluded from it and
// lands in a run_meta.json sidecar plus the console instead.
struct ExperimentReport {
  std::string experiment;
  std::uint64_t seed = 0;
  ReportJson config = ReportJson::object();
  std::vector<Criterion> criteria;
  ReportJson metrics = ReportJson::object();
  double wall_seconds = 0.0;

  bool pass() const {
    for (const auto& c : criteria) {
      if (!c.pass) return false;
    }
    return true;
  }

  ReportJson to_json() const {
    auto out = ReportJson::object();
    out["experiment"] = experiment;
    out["seed"] = seed;
    out["config"] = config;
    auto rows = ReportJson::array();
    for (const auto& c : criteria) {
      auto row = ReportJson::object();
      row["name"] = c.name;
      row["pass"] = c.pass;
      row["value"] = c.value;
      row["threshold"] = c.threshold;
      row["comparison"] = c.comparison;
      rows.push_back(std::move(row));
    }
    out["criteria"] = std::move(rows);
    out["metrics"] = metrics;
    out["pass"] = pass();
    return out;
  }

  std::string to_json_string() const { return to_json().dump(2) + "\n"; }
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// report.json (deterministic) + run_meta.json (timing sidecar).
inline void write_report_files(const ExperimentReport& report,
                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", report.to_json_string());
  auto meta = ReportJson::object();
  meta["experiment"] = report.experiment;
  meta["wall_clock_seconds"] = report.wall_seconds;
  write_text_file(dir / "run_meta.json", meta.dump(2) + "\n");
}

}  // namespace gibbs_lines
