#include "llb/runner.hpp"

#include "llb/expansion.hpp"
#include "llb/measure.hpp"
#include "llb/oracle.hpp"
#include "llb/random.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace llb {

namespace {

using Json = nlohmann::ordered_json;

struct MeanSe {
  double mean = 0;
  double se = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= double(v.size());
  if (v.size() < 2) return r;
  double ss = 0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / double(v.size() - 1) / double(v.size()));
  return r;
}

std::string label(const std::string& name, double m) { return ladder_label(name, m); }

Json basis_summary(const NoiseBasis<double>& b) {
  return {{"modes", b.size()},
          {"eps", b.eps()},
          {"summability", b.summability()},
          {"truncation_tail", b.truncation_tail},
          {"forcing_rate", b.forcing_rate()}};
}

/// Per-sample ensemble mean and standard error of every observable, over the
/// trajectories that reached that sample.
void add_observable_rows(Report& rep, const Ensemble<double>& ens, const std::vector<double>& ladder) {
  const auto names = observable_names(ladder);
  std::size_t S = 0;
  for (const auto& tr : ens) S = std::max(S, tr.records.size());
  Json times = Json::array();
  Json stats = Json::object();
  for (const auto& n : names) stats[n] = {{"mean", Json::array()}, {"se", Json::array()}};
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<Eigen::RowVectorXd> rows;
    double t = 0;
    for (const auto& tr : ens)
      if (s < tr.records.size()) {
        rows.push_back(observable_vector(tr.records[s]));
        t = tr.records[s].t;
      }
    times.push_back(t);
    for (std::size_t c = 0; c < names.size(); ++c) {
      std::vector<double> col;
      for (const auto& r : rows) col.push_back(r(static_cast<Eigen::Index>(c)));
      const auto ms = mean_se(col);
      rep.add(t, names[c] + ".mean", ms.mean);
      rep.add(t, names[c] + ".se", ms.se);
      stats[names[c]]["mean"].push_back(ms.mean);
      stats[names[c]]["se"].push_back(ms.se);
    }
  }
  rep.results["times"] = times;
  rep.results["observables"] = stats;
}

void flag_failures(Report& rep, const Ensemble<double>& ens) {
  Json failed = Json::array();
  int halvings = 0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    halvings += ens[i].halvings;
    if (ens[i].failed) failed.push_back({{"trajectory", i}, {"last_finite_time", ens[i].last_finite_time}});
  }
  rep.results["step_halvings"] = halvings;
  rep.results["failed"] = failed;
  if (!failed.empty()) {
    rep.status = "blowup";
    rep.messages.push_back(std::to_string(failed.size()) + " trajectories left the finite range");
  }
}

void run_simulate(Report& rep, const ExperimentConfig& cfg, unsigned threads) {
  const auto sim = cfg.stepping();
  const auto stepper = make_stepper(sim);
  const auto u0 = make_initial(stepper.grid(), cfg.init);
  const auto ens = run_ensemble(sim, stepper, u0, cfg.ensemble, threads);
  rep.results["noise"] = basis_summary(stepper.basis());
  rep.results["trajectories"] = cfg.ensemble;
  add_observable_rows(rep, ens, sim.tail_ladder);
  flag_failures(rep, ens);
  if (rep.blew_up() || cfg.ensemble < 32 || sim.steps() % sim.stride != 0 || sim.steps() / sim.stride < 4) return;
  const auto eb = energy_balance_residual(ens, stepper.basis(), sim.dt);
  Json j = {{"forcing_rate", eb.forcing_rate}, {"fraction_within", eb.fraction_within()}};
  for (std::size_t i = 0; i < eb.t.size(); ++i) {
    rep.add(eb.t[i], "energy_residual", eb.residual[i]);
    rep.add(eb.t[i], "energy_sigma", eb.sigma[i]);
    rep.add(eb.t[i], "energy_budget", eb.budget[i]);
  }
  j["t"] = eb.t;
  j["residual"] = eb.residual;
  j["sigma"] = eb.sigma;
  j["budget"] = eb.budget;
  rep.results["energy_balance"] = j;
}

void run_expand(Report& rep, const ExperimentConfig& cfg, unsigned threads) {
  auto sim = cfg.stepping();
  sim.radius = cfg.radii.back();
  const auto u0 = make_initial(sim.grid(), cfg.init);
  const auto er = run_expansion(sim, cfg.radii, u0, cfg.ensemble, cfg.m_ladder, threads);
  const double T = sim.horizon;
  Json pairs = Json::array();
  for (std::size_t p = 0; p + 1 < cfg.radii.size(); ++p) {
    const std::string tag = "[" + format_number(cfg.radii[p]) + "," + format_number(cfg.radii[p + 1]) + "]";
    rep.add(T, "sup_diff_median" + tag, er.median_diff[p]);
    rep.add(T, "sup_diff_mean" + tag, er.mean_diff[p]);
    pairs.push_back({{"radii", {cfg.radii[p], cfg.radii[p + 1]}},
                     {"median", er.median_diff[p]},
                     {"mean", er.mean_diff[p]}});
  }
  Json tails = Json::array();
  for (std::size_t r = 0; r < cfg.radii.size(); ++r) {
    for (std::size_t k = 0; k < cfg.m_ladder.size(); ++k)
      rep.add(T, label("tail_l2[n=" + format_number(cfg.radii[r]) + "]", cfg.m_ladder[k]), er.tails[r][k]);
    tails.push_back({{"radius", cfg.radii[r]}, {"sup_tail_l2", er.tails[r]}});
  }
  rep.results["sample_spacing"] = er.sample_spacing;
  rep.results["seeds"] = cfg.ensemble;
  rep.results["pairs"] = pairs;
  rep.results["per_seed_sup_diff"] = er.pair_sup_diff;
  rep.results["tails"] = tails;
  rep.results["m_ladder"] = cfg.m_ladder;
  if (er.failed > 0) {
    rep.status = "blowup";
    rep.messages.push_back(std::to_string(er.failed) + " seeds left the finite range");
    return;
  }
  const auto tu = tail_uniformity(er, cfg.tail_target);
  Json per = Json::array();
  for (const auto& m : tu.per_radius) per.push_back(m ? Json(*m) : Json(nullptr));
  rep.results["tail_target"] = cfg.tail_target;
  rep.results["m_star"] = tu.m_star ? Json(*tu.m_star) : Json(nullptr);
  rep.results["m_star_per_radius"] = per;
  rep.add(T, "m_star", tu.m_star ? *tu.m_star : std::nan(""));
}

Json measure_json(const EmpiricalMeasure<double>& mu) {
  Json samples = Json::array();
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < mu.samples.cols(); ++c) row.push_back(mu.samples(i, c));
    samples.push_back(row);
  }
  return {{"observables", mu.observables},
          {"ladder", mu.ladder},
          {"samples", samples},
          {"weights", mu.weights},
          {"metadata",
           {{"eps", mu.eps},
            {"seeds", mu.seeds},
            {"burn_in", mu.burn_in},
            {"average", mu.average},
            {"experimental", mu.experimental}}}};
}

void run_measure(Report& rep, const ExperimentConfig& cfg, unsigned threads) {
  const auto sim = cfg.stepping();
  const auto u0 = make_initial(sim.grid(), cfg.init);
  EmpiricalMeasure<double> mu;
  try {
    mu = kb_measure(sim, u0, cfg.burn_in, cfg.average, cfg.ensemble, threads);
  } catch (const std::runtime_error& e) {
    rep.status = "blowup";
    rep.messages.push_back(e.what());
    return;
  }
  const double T = sim.horizon;
  const auto tp = tightness_profile(mu, cfg.m_ladder);
  for (std::size_t k = 0; k < cfg.m_ladder.size(); ++k) rep.add(T, label("tail_h1_q95", cfg.m_ladder[k]), tp[k]);
  for (std::size_t c = 0; c < mu.observables.size(); ++c) {
    double mean = 0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) mean += mu.weights[i] * mu.samples(i, static_cast<Eigen::Index>(c));
    rep.add(T, mu.observables[c] + ".mean", mean);
  }
  rep.results["tightness_q95"] = tp;
  rep.results["measure"] = measure_json(mu);
}

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

void run_eps_sweep(Report& rep, const ExperimentConfig& cfg, unsigned threads) {
  auto sim = cfg.stepping();
  const auto stepper = make_stepper(sim);
  const auto u0 = make_initial(stepper.grid(), cfg.init);
  const auto runs = parallel_map(static_cast<std::size_t>(cfg.ensemble), threads,
                                 [&](std::size_t id) { return simulate_coupled(sim, stepper, u0, cfg.eps_list, id); });
  const std::size_t E = cfg.eps_list.size();
  const double T = sim.horizon;
  int failed = 0;
  for (const auto& c : runs)
    for (const auto& r : c.runs) failed += r.failed ? 1 : 0;
  if (failed > 0) {
    rep.status = "blowup";
    rep.messages.push_back(std::to_string(failed) + " coupled trajectories left the finite range");
  }

  std::vector<double> deltas, medians;
  Json cont = Json::array();
  for (std::size_t j = 1; j < E; ++j) {
    std::vector<double> d;
    for (const auto& c : runs) d.push_back(c.sup_h1_difference(0, static_cast<Eigen::Index>(j)));
    const double delta = cfg.eps_list[j] - cfg.eps_list[0];
    deltas.push_back(delta);
    medians.push_back(median(d));
    rep.add(T, "sup_h1_diff_median[" + format_number(cfg.eps_list[0]) + "," + format_number(cfg.eps_list[j]) + "]",
            medians.back());
    cont.push_back({{"delta", delta}, {"median_sup_h1_diff", medians.back()}, {"per_seed", d}});
  }
  rep.results["continuity"] = cont;
  if (deltas.size() >= 2 && !rep.blew_up()) {
    const double slope = loglog_slope(deltas, medians);
    rep.results["loglog_slope"] = slope;
    rep.add(T, "loglog_slope", slope);
  }
  if (rep.blew_up()) return;

  Json tight = Json::array();
  std::vector<std::vector<double>> profiles;
  for (std::size_t e = 0; e < E; ++e) {
    Ensemble<double> ens;
    for (const auto& c : runs) ens.push_back(c.runs[e]);
    auto mu = measure_from_ensemble(ens, sim.tail_ladder, cfg.burn_in);
    mu.eps = cfg.eps_list[e];
    mu.average = cfg.average;
    const auto tp = tightness_profile(mu, cfg.m_ladder);
    for (std::size_t k = 0; k < tp.size(); ++k)
      rep.add(T, label("tail_h1_q95[eps=" + format_number(cfg.eps_list[e]) + "]", cfg.m_ladder[k]), tp[k]);
    tight.push_back({{"eps", cfg.eps_list[e]}, {"tail_h1_q95", tp}});
    profiles.push_back(tp);
  }
  Json m_star = nullptr;
  for (std::size_t k = 0; k < cfg.m_ladder.size() && m_star.is_null(); ++k) {
    bool all = true;
    for (const auto& p : profiles) all = all && p[k] < cfg.tail_target;
    if (all) m_star = cfg.m_ladder[k];
  }
  rep.results["tightness"] = tight;
  rep.results["tail_target"] = cfg.tail_target;
  rep.results["m_star"] = m_star;
  rep.add(T, "m_star", m_star.is_null() ? std::nan("") : m_star.get<double>());
}

void run_oracle(Report& rep, const ExperimentConfig& cfg, unsigned threads) {
  const auto sim = cfg.stepping();
  const auto res = oracle_compare(sim, cfg.modes, cfg.burn_in, cfg.average, cfg.ensemble, threads);
  Json table = Json::array();
  const double T = sim.horizon;
  for (const auto& r : res) {
    const std::string tag = "[" + std::to_string(r.mode) + "]";
    rep.add(T, "empirical" + tag, r.empirical);
    rep.add(T, "analytic" + tag, r.analytic);
    rep.add(T, "relative_error" + tag, r.relative_error);
    rep.add(T, "standard_error" + tag, r.standard_error);
    table.push_back({{"mode", r.mode},
                     {"empirical", r.empirical},
                     {"analytic", r.analytic},
                     {"relative_error", r.relative_error},
                     {"standard_error", r.standard_error},
                     {"mean_norm", r.mean_norm},
                     {"mean_standard_error", r.mean_standard_error}});
  }
  rep.results["model"] = "linear";
  rep.results["modes"] = table;
}

void run_identities(Report& rep, const ExperimentConfig& cfg) {
  const auto r = identity_suite(cfg.samples, cfg.sim.seed);
  rep.add(0, "max_cross_residual", r.max_cross);
  rep.add(0, "max_quadratic_variation_residual", r.max_qv);
  rep.results = {{"cross_samples", r.cross_samples},
                 {"qv_samples", r.qv_samples},
                 {"max_cross_residual", r.max_cross},
                 {"max_quadratic_variation_residual", r.max_qv}};
}

}  // namespace

IdentityResult identity_suite(int samples, std::uint64_t seed) {
  const NormalStream rng(seed, 0x1d);
  std::uint64_t draw = 0;
  auto normal = [&] { return rng.normal(draw++, 0, 0); };
  auto vec = [&]() -> Vec3<double> {
    const double scale = std::pow(10.0, std::tanh(normal()));
    return Vec3<double>(normal(), normal(), normal()) * scale;
  };
  IdentityResult out;
  out.cross_samples = samples;
  for (int i = 0; i < samples; ++i) {
    const Vec3<double> a = vec(), b = vec();
    const double den = a.norm() * b.norm();
    if (den > 0) out.max_cross = std::max(out.max_cross, std::abs(a.cross(b).dot(a)) / den);
  }
  out.qv_samples = std::max(1, samples / 10);
  const auto grid = make_grid(1, 2.0, 0.25);
  for (int i = 0; i < out.qv_samples; ++i) {
    auto random_field = [&] { return VectorField<double>::sample(grid, [&](const Point<double>&) { return vec(); }); };
    std::vector<VectorField<double>> modes;
    for (int k = 0; k < 4; ++k) modes.push_back(random_field());
    const NoiseBasis<double> basis(grid, std::move(modes), 1.0);
    const auto u = random_field();
    double fsq = 0;
    for (int k = 0; k < basis.size(); ++k) fsq += l2_squared(basis.mode(k));
    const double umax = u.values().rowwise().norm().maxCoeff();
    const double scale = (1 + umax * umax) * fsq;
    out.max_qv = std::max(out.max_qv, quadratic_variation_check(u, basis) / scale);
  }
  return out;
}

Report run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  validate(cfg);
  Report rep = make_report(cfg);
  switch (cfg.kind) {
    case ExperimentKind::simulate: run_simulate(rep, cfg, threads); break;
    case ExperimentKind::expand: run_expand(rep, cfg, threads); break;
    case ExperimentKind::measure: run_measure(rep, cfg, threads); break;
    case ExperimentKind::eps_sweep: run_eps_sweep(rep, cfg, threads); break;
    case ExperimentKind::oracle_check: run_oracle(rep, cfg, threads); break;
    case ExperimentKind::identity_suite: run_identities(rep, cfg); break;
  }
  return rep;
}

int run(const ExperimentConfig& cfg, unsigned threads, std::ostream& err) {
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    err << Json{{"error", "config"}, {"messages", e.errors()}}.dump() << "\n";
    return exit_config;
  }
  try {
    const Report rep = run_experiment(cfg, threads);
    write_report(rep, cfg.out_dir, cfg.format);
    if (rep.blew_up()) {
      err << Json{{"error", "blowup"}, {"messages", rep.messages}}.dump() << "\n";
      return exit_blowup;
    }
    return exit_ok;
  } catch (const std::exception& e) {
    err << Json{{"error", "runtime"}, {"messages", {e.what()}}}.dump() << "\n";
    return exit_failure;
  }
}

}  // namespace llb
