// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include "llb/config.hpp"
#include "llb/expansion.hpp"
#include "llb/measure.hpp"
#include "llb/oracle.hpp"
#include "llb/runner.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

using namespace llb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ", ") + fmt("%.3g", x);
  return "[" + s + "]";
}

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

// Shared desk-scale setup: d = 1, h = 0.05, 16 compact bump modes at full
// intensity, compact bump initial data.
SimConfig<double> base(double radius = 4) {
  SimConfig<double> cfg;
  cfg.radius = radius;
  cfg.spacing = 0.05;
  cfg.dt = 5e-3;
  cfg.stride = 10;
  cfg.noise.modes = 16;
  cfg.noise.eps = 1;
  cfg.noise.support = 1;
  cfg.seed = 2024;
  return cfg;
}

VectorField<double> bump(const Grid<double>& g) { return make_initial(g, InitialData{}); }

Outcome identities() {
  const auto r = identity_suite(10000, 1);
  return {r.cross_samples >= 10000 && r.max_cross <= 1e-12 && r.max_qv <= 1e-10,
          fmt("%d cross samples, max |<a x b, a>|/(|a||b|) = %.2e (<= 1e-12); %d qv samples, max residual %.2e (<= 1e-10)",
              r.cross_samples, r.max_cross, r.qv_samples, r.max_qv)};
}

Outcome laplacian_order() {
  std::vector<double> hs{0.2, 0.1, 0.05}, errs;
  const double n = 4, k = std::numbers::pi / (2 * n);
  for (double h : hs) {
    const auto g = make_grid(1, n, h);
    const auto e = VectorField<double>::sample(
        g, [&](const Point<double>& x) { return Vec3<double>(std::sin(k * (x(0) + n)), 0, 0); });
    const auto lap = laplacian(e);
    double err = 0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (!g.is_boundary(i)) err = std::max(err, std::abs(lap.row(i)(0) + k * k * e.row(i)(0)));
    errs.push_back(err);
  }
  const double slope = loglog_slope(hs, errs);
  return {std::abs(slope - 2) <= 0.2, fmt("max errors %s, slope %.3f (2 +- 0.2)", join(errs).c_str(), slope)};
}

Outcome linear_oracle() {
  auto cfg = base();
  cfg.dt = 0.01;
  cfg.model = ModelSwitches::linear();
  const auto res = oracle_compare(cfg, {1, 2, 3}, 5.0, 50.0, 64, 0);
  bool ok = true;
  std::string d;
  for (const auto& r : res) {
    ok = ok && r.relative_error <= 0.10;
    d += fmt("mode %d: %.4g vs %.4g (rel %.3f); ", r.mode, r.empirical, r.analytic, r.relative_error);
  }
  return {ok, d + "tolerance 0.10"};
}

Outcome energy_balance() {
  auto cfg = base();
  cfg.dt = 1e-3;
  cfg.horizon = 5;
  cfg.stride = 50;
  const auto stepper = make_stepper(cfg);
  const auto ens = run_ensemble(cfg, stepper, bump(cfg.grid()), 256, 0);
  const auto eb = energy_balance_residual(ens, stepper.basis(), cfg.dt);
  const auto ok = std::count(eb.within.begin(), eb.within.end(), true);
  const double frac = double(ok) / double(eb.within.size());
  return {frac >= 0.95, fmt("%ld of %zu sampled times within 3 (sigma + budget), fraction %.3f (>= 0.95)", long(ok),
                            eb.within.size(), frac)};
}

Outcome noise_free_dissipation() {
  auto cfg = base();
  cfg.dt = 1e-3;
  cfg.horizon = 1;
  cfg.noise.eps = 0;
  const auto stepper = make_stepper(cfg);
  const auto g = cfg.grid();
  const auto path = make_path(cfg, 0);
  testing::Gen gen(5);
  int violations = 0;
  long steps = 0;
  for (int f = 0; f < 100; ++f) {
    const double amp = std::pow(10.0, gen.uniform(-2, 1));
    TrajectoryState<double> s;
    s.u = cut_initial_data(f % 2 ? gen.smooth_field(g, amp, 6) : gen.rough_field(g, amp));
    double prev = l2_squared(s.u);
    while (s.step < cfg.steps()) {
      step(s, cfg, stepper, path);
      const double now = l2_squared(s.u);
      if (s.failed || !(now <= prev)) ++violations;
      prev = now;
      ++steps;
    }
  }
  return {violations == 0, fmt("100 fields, %ld steps, %d increases of |u|_L2^2", steps, violations)};
}

Outcome expansion(Outcome& tails) {
  auto cfg = base();
  cfg.horizon = 4;
  const std::vector<double> radii{4, 8, 16}, ladder{1, 2, 3};
  const auto g = make_grid(1, 16.0, cfg.spacing);
  const auto rep = run_expansion(cfg, radii, bump(g), 16, ladder, 0);
  const bool decreasing = rep.failed == 0 && rep.median_diff[1] < rep.median_diff[0];
  const auto tu = tail_uniformity(rep, 1e-2);
  std::string t;
  for (std::size_t r = 0; r < radii.size(); ++r) t += fmt("n=%g %s; ", radii[r], join(rep.tails[r]).c_str());
  tails = {tu.uniform, t + (tu.m_star ? fmt("m* = %g", *tu.m_star) : std::string("no uniform m* on the ladder")) +
                           " (tails < 1e-2)"};
  return {decreasing, fmt("median sup_t L2 differences %s over 16 seeds, %d failed", join(rep.median_diff).c_str(),
                          rep.failed)};
}

Outcome eps_tightness() {
  auto cfg = base();
  cfg.tail_ladder = {1, 2, 3};
  const auto u0 = bump(cfg.grid());
  std::vector<std::vector<double>> prof;
  std::string d;
  for (double eps : {0.0, 0.5, 1.0}) {
    auto c = cfg;
    c.noise.eps = eps;
    const auto mu = kb_measure(c, u0, 2.0, 10.0, 8, 0);
    prof.push_back(tightness_profile(mu, cfg.tail_ladder));
    d += fmt("eps=%g %s; ", eps, join(prof.back()).c_str());
  }
  std::optional<double> m;
  for (std::size_t k = 0; k < cfg.tail_ladder.size() && !m; ++k) {
    bool all = true;
    for (const auto& p : prof) all = all && p[k] < 1e-2;
    if (all) m = cfg.tail_ladder[k];
  }
  return {m.has_value(), d + (m ? fmt("m = %g", *m) : std::string("no common m")) + " (95% tails < 1e-2)"};
}

Outcome eps_continuity() {
  auto cfg = base();
  cfg.horizon = 2;
  const auto stepper = make_stepper(cfg);
  const auto u0 = bump(cfg.grid());
  const std::vector<double> eps{0.5, 0.6, 0.55, 0.525}, deltas{0.1, 0.05, 0.025};
  const auto runs = parallel_map(32, 0, [&](std::size_t id) { return simulate_coupled(cfg, stepper, u0, eps, id); });
  std::vector<double> med;
  for (std::size_t k = 1; k < eps.size(); ++k) {
    std::vector<double> col;
    for (const auto& r : runs) col.push_back(r.sup_h1_difference(0, Eigen::Index(k)));
    med.push_back(median(col));
  }
  const double slope = loglog_slope(deltas, med);
  return {std::abs(slope - 1) <= 0.3,
          fmt("median sup_t H1 differences %s for delta %s, slope %.3f (1 +- 0.3)", join(med).c_str(),
              join(deltas).c_str(), slope)};
}

Outcome data_continuity() {
  auto cfg = base();
  cfg.horizon = 2;
  const auto g = cfg.grid();
  const auto u0 = bump(g);
  const auto dir = VectorField<double>::sample(g, [](const Point<double>& x) {
    const double w = std::exp(-x.squaredNorm());
    return Vec3<double>(w, 0, w);
  });
  std::vector<double> med;
  bool finite = true;
  for (double delta : {1e-2, 1e-3}) {
    const auto st = initial_data_continuity(cfg, u0, u0 + delta * dir, 32, 0);
    finite = finite && std::isfinite(st.max_ratio);
    med.push_back(st.median_ratio);
  }
  const double spread = std::max(med[0], med[1]) / std::min(med[0], med[1]);
  return {finite && spread < 3, fmt("median ratios %s for delta [0.01, 0.001], spread %.3f (< 3), finite %s",
                                    join(med).c_str(), spread, finite ? "yes" : "no")};
}

Outcome determinism() {
  ::setenv("LLB_DETERMINISTIC", "1", 1);
  const char* text = R"(
grid.spacing = 0.05
time.dt = 0.005
time.horizon = 1
time.stride = 10
experiment.ensemble = 8
experiment.radii = 4, 8
experiment.burn_in = 0.5
experiment.average = 0.5
)";
  bool ok = true;
  std::string d;
  for (auto kind : {ExperimentKind::simulate, ExperimentKind::expand, ExperimentKind::measure,
                    ExperimentKind::eps_sweep, ExperimentKind::oracle_check}) {
    Overrides ov;
    ov.kind = kind;
    ov.seed = 99;
    const auto cfg = parse_config(text, ov);
    const auto serial = run_experiment(cfg, 1), parallel = run_experiment(cfg, 4);
    const bool same = to_json(serial) == to_json(parallel) && to_csv(serial) == to_csv(parallel);
    ok = ok && same;
    d += fmt("%s %s; ", to_string(kind), same ? "identical" : "DIFFER");
  }
  return {ok, d + "serial vs 4 threads"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  Outcome tails;
  const std::vector<Criterion> criteria{
      {"C1 algebraic identities", identities},
      {"C2 laplacian convergence", laplacian_order},
      {"C3 linear oracle", linear_oracle},
      {"C4 energy balance", energy_balance},
      {"C5 noise-free dissipation", noise_free_dissipation},
      {"C6 domain-expansion convergence", [&] { return expansion(tails); }},
      {"C7 radius-uniform tail bound", [&] { return tails; }},
      {"C8 intensity-uniform H1 tails", eps_tightness},
      {"C9 intensity continuity", eps_continuity},
      {"C10 initial-data continuity", data_continuity},
      {"C11 determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %-32s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
