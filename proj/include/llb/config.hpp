#pragma once

#include "llb/integrator.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace llb {

enum class ExperimentKind { simulate, expand, measure, eps_sweep, oracle_check, identity_suite };

const char* to_string(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

enum class ReportFormat { csv, json };

const char* to_string(ReportFormat f);
ReportFormat parse_format(const std::string& s);

enum class InitialShape { zero, gaussian, bump, eigenmode };

const char* to_string(InitialShape s);
InitialShape parse_shape(const std::string& s);

/// Initial magnetisation: amplitude * profile(|x| / width) * direction,
/// normalised direction. `eigenmode` is the first Dirichlet sine mode.
struct InitialData {
  InitialShape shape = InitialShape::bump;
  double amplitude = 0.5;
  double width = 1.5;
  Vec3<double> direction{0.6, 0.2, -0.3};
};

VectorField<double> make_initial(const Grid<double>& grid, const InitialData& init);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  SimConfig<double> sim;
  InitialData init;

  int ensemble = 16;
  std::vector<double> radii{4, 8, 16};
  std::vector<double> eps_list{0.5, 0.525, 0.55, 0.6};
  std::vector<double> m_ladder{1, 2, 3};
  double burn_in = 2;
  double average = 10;
  std::vector<int> modes{1, 2, 3};
  double perturbation = 1e-2;
  double tail_target = 1e-2;
  int samples = 10000;  // identity-suite fuzz samples

  std::string out_dir = ".";
  ReportFormat format = ReportFormat::json;

  /// Configuration used for the time stepping (m ladder installed as the
  /// tail ladder).
  SimConfig<double> stepping() const;

  bool operator==(const ExperimentConfig&) const;
};

/// Field-level configuration errors, one message per offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Command-line values that take precedence over the document.
struct Overrides {
  std::optional<ExperimentKind> kind;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<ReportFormat> format;
};

/// Parses the flat `section.key = value` format (`#` starts a comment).
/// Unknown keys, duplicates and invalid values are collected and thrown
/// together as a ConfigError; overrides apply before validation.
ExperimentConfig parse_config(const std::string& text, const Overrides& overrides = {});
ExperimentConfig load_config(const std::string& path, const Overrides& overrides = {});

/// Every key, in a fixed order, with round-trip precision.
std::string serialize(const ExperimentConfig& cfg);

/// Throws ConfigError listing every violated constraint.
void validate(const ExperimentConfig& cfg);

}  // namespace llb
