#include "llb/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <type_traits>
#include <utility>

namespace llb {

const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::expand: return "expand";
    case ExperimentKind::measure: return "measure";
    case ExperimentKind::eps_sweep: return "eps-sweep";
    case ExperimentKind::oracle_check: return "oracle-check";
    case ExperimentKind::identity_suite: return "identity-suite";
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::simulate, ExperimentKind::expand, ExperimentKind::measure, ExperimentKind::eps_sweep,
                 ExperimentKind::oracle_check, ExperimentKind::identity_suite})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

const char* to_string(ReportFormat f) { return f == ReportFormat::csv ? "csv" : "json"; }

ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw std::invalid_argument("unknown report format '" + s + "'");
}

const char* to_string(InitialShape s) {
  switch (s) {
    case InitialShape::zero: return "zero";
    case InitialShape::gaussian: return "gaussian";
    case InitialShape::bump: return "bump";
    case InitialShape::eigenmode: return "eigenmode";
  }
  return "?";
}

InitialShape parse_shape(const std::string& s) {
  for (auto v : {InitialShape::zero, InitialShape::gaussian, InitialShape::bump, InitialShape::eigenmode})
    if (s == to_string(v)) return v;
  throw std::invalid_argument("unknown initial shape '" + s + "'");
}

VectorField<double> make_initial(const Grid<double>& grid, const InitialData& init) {
  const double len = init.direction.norm();
  if (!(len > 0)) throw std::invalid_argument("init.direction must be non-zero");
  const Vec3<double> dir = init.direction / len;
  const double n = grid.radius();
  return VectorField<double>::sample(grid, [&](const Point<double>& x) -> Vec3<double> {
    double p = 0;
    switch (init.shape) {
      case InitialShape::zero: break;
      case InitialShape::gaussian: p = std::exp(-x.squaredNorm() / (init.width * init.width)); break;
      case InitialShape::bump: {
        const double s = x.norm() / init.width;
        p = s < 1 ? (1 - s * s) * (1 - s * s) : 0;
        break;
      }
      case InitialShape::eigenmode: {
        const double k = std::numbers::pi / (2 * n);
        p = std::sin(k * (x(0) + n));
        if (grid.dim() == 2) p *= std::sin(k * (x(1) + n));
        break;
      }
    }
    return init.amplitude * p * dir;
  });
}

SimConfig<double> ExperimentConfig::stepping() const {
  SimConfig<double> s = sim;
  s.tail_ladder = m_ladder;
  switch (kind) {
    case ExperimentKind::measure:
    case ExperimentKind::eps_sweep:
    case ExperimentKind::oracle_check: s.horizon = burn_in + average; break;
    default: break;
  }
  if (kind == ExperimentKind::oracle_check) s.model = ModelSwitches::linear();
  return s;
}

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(errors.empty() ? "invalid configuration" : errors.front()), errors_(std::move(errors)) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw std::invalid_argument("expected a finite number, got '" + s + "'");
  return v;
}

template <typename Int>
Int to_int(const std::string& s) {
  Int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "on" || s == "1") return true;
  if (s == "false" || s == "off" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(std::string s) {
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> to_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& t : split_list(s)) out.push_back(to_double(t));
  return out;
}

std::vector<int> to_ints(const std::string& s) {
  std::vector<int> out;
  for (const auto& t : split_list(s)) out.push_back(to_int<int>(t));
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s;
}

struct Key {
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// `field` is a generic lambda returning a reference to the member, so it
// serves both the setter and the getter.
template <typename F>
Key number(const char* name, F field) {
  return {name, [field](ExperimentConfig& c, const std::string& v) { field(c) = to_double(v); },
          [field](const ExperimentConfig& c) { return format_double(field(c)); }};
}

template <typename F>
Key integer(const char* name, F field) {
  using Int = std::remove_reference_t<decltype(field(std::declval<ExperimentConfig&>()))>;
  return {name, [field](ExperimentConfig& c, const std::string& v) { field(c) = to_int<Int>(v); },
          [field](const ExperimentConfig& c) { return std::to_string(field(c)); }};
}

template <typename F>
Key flag(const char* name, F field) {
  return {name, [field](ExperimentConfig& c, const std::string& v) { field(c) = to_bool(v); },
          [field](const ExperimentConfig& c) { return std::string(field(c) ? "true" : "false"); }};
}

template <typename F>
Key numbers(const char* name, F field) {
  return {name, [field](ExperimentConfig& c, const std::string& v) { field(c) = to_doubles(v); },
          [field](const ExperimentConfig& c) { return join(field(c), format_double); }};
}

#define LLB_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"experiment.kind", [](ExperimentConfig& c, const std::string& v) { c.kind = parse_kind(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.kind)); }},
      integer("experiment.ensemble", LLB_FIELD(ensemble)),
      numbers("experiment.radii", LLB_FIELD(radii)),
      numbers("experiment.eps_list", LLB_FIELD(eps_list)),
      numbers("experiment.m_ladder", LLB_FIELD(m_ladder)),
      number("experiment.burn_in", LLB_FIELD(burn_in)),
      number("experiment.average", LLB_FIELD(average)),
      {"experiment.modes", [](ExperimentConfig& c, const std::string& v) { c.modes = to_ints(v); },
       [](const ExperimentConfig& c) { return join(c.modes, [](int m) { return std::to_string(m); }); }},
      number("experiment.perturbation", LLB_FIELD(perturbation)),
      number("experiment.tail_target", LLB_FIELD(tail_target)),
      integer("experiment.samples", LLB_FIELD(samples)),
      integer("grid.dim", LLB_FIELD(sim.dim)),
      number("grid.radius", LLB_FIELD(sim.radius)),
      number("grid.spacing", LLB_FIELD(sim.spacing)),
      number("time.dt", LLB_FIELD(sim.dt)),
      number("time.horizon", LLB_FIELD(sim.horizon)),
      integer("time.stride", LLB_FIELD(sim.stride)),
      {"time.scheme", [](ExperimentConfig& c, const std::string& v) { c.sim.scheme = parse_scheme(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.sim.scheme)); }},
      number("time.safety", LLB_FIELD(sim.safety)),
      number("time.linf_ceiling", LLB_FIELD(sim.linf_ceiling)),
      integer("time.max_halvings", LLB_FIELD(sim.max_halvings)),
      integer("time.wiener_substeps", LLB_FIELD(sim.wiener_substeps)),
      {"noise.preset", [](ExperimentConfig& c, const std::string& v) { c.sim.noise.preset = parse_preset(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.sim.noise.preset)); }},
      integer("noise.modes", LLB_FIELD(sim.noise.modes)),
      number("noise.eps", LLB_FIELD(sim.noise.eps)),
      number("noise.amplitude", LLB_FIELD(sim.noise.amplitude)),
      number("noise.support", LLB_FIELD(sim.noise.support)),
      integer("noise.seed", LLB_FIELD(sim.seed)),
      flag("model.gyro", LLB_FIELD(sim.model.gyro)),
      flag("model.cubic", LLB_FIELD(sim.model.cubic)),
      flag("model.ito_correction", LLB_FIELD(sim.model.ito_correction)),
      flag("model.multiplicative", LLB_FIELD(sim.model.multiplicative)),
      {"init.shape", [](ExperimentConfig& c, const std::string& v) { c.init.shape = parse_shape(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.init.shape)); }},
      number("init.amplitude", LLB_FIELD(init.amplitude)),
      number("init.width", LLB_FIELD(init.width)),
      {"init.direction",
       [](ExperimentConfig& c, const std::string& v) {
         const auto d = to_doubles(v);
         if (d.size() != 3) throw std::invalid_argument("expected three components");
         c.init.direction = Vec3<double>(d[0], d[1], d[2]);
       },
       [](const ExperimentConfig& c) {
         const auto& d = c.init.direction;
         return join(std::vector<double>{d(0), d(1), d(2)}, format_double);
       }},
      {"output.format", [](ExperimentConfig& c, const std::string& v) { c.format = parse_format(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.format)); }},
      {"output.dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
       [](const ExperimentConfig& c) { return c.out_dir; }},
  };
  return table;
}

#undef LLB_FIELD

template <typename T>
bool strictly_increasing(const std::vector<T>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](T a, T b) { return !(a < b); }) == v.end();
}

bool divides(double dt, double span) {
  const double q = span / dt;
  return std::abs(q - std::round(q)) <= 1e-9 * (1 + q);
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const { return serialize(*this) == serialize(o); }

ExperimentConfig parse_config(const std::string& text, const Overrides& overrides) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) {
      errors.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return key == k.name; });
    if (it == table.end()) {
      errors.push_back(where + key + ": unknown key");
      continue;
    }
    if (seen[key]++) {
      errors.push_back(where + key + ": duplicate key");
      continue;
    }
    try {
      it->set(cfg, value);
    } catch (const std::exception& e) {
      errors.push_back(where + key + ": " + e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  if (overrides.kind) cfg.kind = *overrides.kind;
  if (overrides.seed) cfg.sim.seed = *overrides.seed;
  if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
  if (overrides.format) cfg.format = *overrides.format;
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file '" + path + "'"});
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string serialize(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  return out;
}

void validate(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  const auto& s = cfg.sim;
  check(s.noise.eps >= 0 && s.noise.eps <= 1, "noise.eps: intensity must lie in [0, 1]");
  check(s.dim == 1 || s.dim == 2, "grid.dim: must be 1 or 2");
  check(cfg.ensemble >= 1, "experiment.ensemble: must be at least 1");
  check(!cfg.radii.empty() && std::is_sorted(cfg.radii.begin(), cfg.radii.end()),
        "experiment.radii: must be non-empty and sorted");
  check(!cfg.eps_list.empty() && strictly_increasing(cfg.eps_list), "experiment.eps_list: must be non-empty and increasing");
  for (double e : cfg.eps_list) check(e >= 0 && e <= 1, "experiment.eps_list: intensities must lie in [0, 1]");
  check(!cfg.m_ladder.empty() && strictly_increasing(cfg.m_ladder), "experiment.m_ladder: must be non-empty and increasing");
  check(cfg.m_ladder.empty() || cfg.m_ladder.front() >= 0, "experiment.m_ladder: radii must be non-negative");
  check(!cfg.modes.empty() && strictly_increasing(cfg.modes) && cfg.modes.front() >= 1,
        "experiment.modes: must be non-empty, increasing and start at 1 or above");
  check(cfg.burn_in >= 0, "experiment.burn_in: must be non-negative");
  check(cfg.average > 0, "experiment.average: must be positive");
  check(cfg.perturbation > 0, "experiment.perturbation: must be positive");
  check(cfg.tail_target > 0, "experiment.tail_target: must be positive");
  check(cfg.samples >= 1, "experiment.samples: must be at least 1");
  check(cfg.init.width > 0, "init.width: must be positive");
  check(cfg.init.direction.norm() > 0, "init.direction: must be non-zero");
  check(cfg.kind != ExperimentKind::eps_sweep || cfg.eps_list.size() >= 2,
        "experiment.eps_list: eps-sweep needs at least two intensities");
  check(cfg.kind != ExperimentKind::expand || cfg.radii.size() >= 2, "experiment.radii: expand needs at least two radii");
  if (cfg.kind == ExperimentKind::measure || cfg.kind == ExperimentKind::eps_sweep ||
      cfg.kind == ExperimentKind::oracle_check)
    check(divides(s.dt, cfg.burn_in + cfg.average), "time.dt: must divide burn_in + average");
  if (errors.empty()) {
    try {
      if (cfg.kind == ExperimentKind::expand) {
        for (double n : cfg.radii) {
          SimConfig<double> c = cfg.stepping();
          c.radius = n;
          c.validate();
        }
      } else {
        cfg.stepping().validate();
      }
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

}  // namespace llb
