#pragma once

#include "llb/config.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace llb {

inline constexpr int report_schema = 1;

/// Experiment output. `rows` is the flat (time, statistic, value) table used
/// for CSV; `results` carries the full structured payload for JSON.
struct Report {
  struct Row {
    double t = 0;
    std::string statistic;
    double value = 0;
  };

  std::string kind;
  std::string status = "ok";  // "ok" or "blowup"
  bool experimental = false;
  std::vector<std::string> messages;
  nlohmann::ordered_json config;  // every key except output.*
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  std::vector<Row> rows;

  void add(double t, std::string statistic, double value) { rows.push_back({t, std::move(statistic), value}); }
  bool blew_up() const { return status == "blowup"; }
};

/// Report skeleton for a configuration: kind, experimental flag, echoed
/// config.
Report make_report(const ExperimentConfig& cfg);

std::string to_json(const Report& r);
std::string to_csv(const Report& r);

/// Writes `<dir>/<kind>.<csv|json>` and returns its path.
std::string write_report(const Report& r, const std::string& dir, ReportFormat format);

/// Shortest round-trip decimal form; non-finite values print as nan/inf.
std::string format_number(double v);

}  // namespace llb
