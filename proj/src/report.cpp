#include "llb/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace llb {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Report make_report(const ExperimentConfig& cfg) {
  Report r;
  r.kind = to_string(cfg.kind);
  r.experimental = cfg.sim.dim == 2;
  std::istringstream in(serialize(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    const std::string key = line.substr(0, eq);
    if (key.rfind("output.", 0) == 0) continue;
    r.config[key] = line.substr(eq + 3);
  }
  return r;
}

std::string to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["schema"] = report_schema;
  j["kind"] = r.kind;
  j["status"] = r.status;
  j["experimental"] = r.experimental;
  j["messages"] = r.messages;
  j["config"] = r.config;
  j["results"] = r.results;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) rows.push_back({{"time", row.t}, {"statistic", row.statistic}, {"value", row.value}});
  return j.dump(2) + "\n";
}

std::string to_csv(const Report& r) {
  std::string out = "# schema=" + std::to_string(report_schema) + "\n";
  out += "# kind=" + r.kind + "\n";
  out += "# status=" + r.status + "\n";
  out += std::string("# experimental=") + (r.experimental ? "true" : "false") + "\n";
  for (const auto& m : r.messages) out += "# message=" + m + "\n";
  out += "time,statistic,value\n";
  for (const auto& row : r.rows) out += format_number(row.t) + "," + row.statistic + "," + format_number(row.value) + "\n";
  return out;
}

std::string write_report(const Report& r, const std::string& dir, ReportFormat format) {
  std::filesystem::create_directories(dir);
  const auto path = (std::filesystem::path(dir) / (r.kind + "." + to_string(format))).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report to '" + path + "'");
  out << (format == ReportFormat::csv ? to_csv(r) : to_json(r));
  if (!out) throw std::runtime_error("failed writing report to '" + path + "'");
  return path;
}

}  // namespace llb
