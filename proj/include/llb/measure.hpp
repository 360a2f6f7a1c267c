#pragma once

#include "llb/integrator.hpp"
#include "llb/parallel.hpp"
#include "llb/random.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace llb {

template <typename Scalar>
using Ensemble = std::vector<Trajectory<Scalar>>;

/// Runs `count` trajectories (ids first_id, first_id + 1, ...) of one config.
template <typename Scalar>
Ensemble<Scalar> run_ensemble(const SimConfig<Scalar>& cfg, const Stepper<Scalar>& stepper,
                              const VectorField<Scalar>& u0, int count, unsigned threads = 1,
                              std::uint64_t first_id = 0) {
  return parallel_map(static_cast<std::size_t>(count), threads,
                      [&](std::size_t i) { return simulate(cfg, stepper, u0, first_id + i); });
}

// ---------------------------------------------------------------------------
// L2 energy balance

template <typename Scalar>
struct EnergyBalance {
  std::vector<Scalar> t;
  std::vector<Scalar> residual;  // ensemble mean
  std::vector<Scalar> sigma;     // standard error of the mean residual
  std::vector<Scalar> budget;    // discretisation budget: dt + h + sampling
  std::vector<bool> within;      // |residual| <= 3 (sigma + budget)
  Scalar forcing_rate = 0;

  Scalar fraction_within() const {
    if (within.empty()) return 0;
    return Scalar(std::count(within.begin(), within.end(), true)) / Scalar(within.size());
  }
};

/// Residual of  d/dt E|u|^2 + 2 E(|grad u|^2 + |u|^2 + |u|_{L4}^4) = eps^2 sum |f_k|^2
/// at every interior sample time. The derivative is a central difference of
/// the sampled energy. The budget at each time is
///   dt [3 |(I - lap) u|^2 + 3 |u|_{L6}^6 + 2 eps^2 sum |f_k|_{H1}^2 (1 + |u|_inf)^2]
///     (leading one-step bias of the semi-implicit map)
/// + 2 |<-lap u, u> - |grad u|^2|
///     (gap between the dissipated discrete form and the quadrature gradient)
/// + (S^2 / 6) (|E'''| + 2 |D''|)
///     (central-difference and sampling error; S is the sample spacing)
/// all averaged over the ensemble.
template <typename Scalar>
EnergyBalance<Scalar> energy_balance_residual(const Ensemble<Scalar>& ensemble, const NoiseBasis<Scalar>& basis,
                                              Scalar dt) {
  using std::abs;
  using std::sqrt;
  const std::size_t M = ensemble.size();
  if (M < 32) throw std::invalid_argument("energy balance needs an ensemble of at least 32 trajectories");
  const std::size_t S = ensemble.front().records.size();
  for (const auto& tr : ensemble)
    if (tr.failed || tr.records.size() != S) throw std::invalid_argument("ensemble trajectories are not aligned");
  if (S < 5) throw std::invalid_argument("energy balance needs at least five samples");
  const auto& rec0 = ensemble.front().records;
  const Scalar spacing = rec0[1].t - rec0[0].t;
  for (std::size_t i = 1; i < S; ++i)
    if (abs((rec0[i].t - rec0[i - 1].t) - spacing) > Scalar(1e-9) * (Scalar(1) + spacing))
      throw std::invalid_argument("energy balance needs a uniform sampling stride");

  Scalar h1_noise = 0;
  for (const auto& nm : basis.mode_norms()) h1_noise += nm.h1 * nm.h1;
  h1_noise *= basis.eps() * basis.eps();
  const Scalar Q = basis.forcing_rate();

  std::vector<Scalar> E(S, 0), D(S, 0), step_bias(S, 0), form_gap(S, 0);
  for (const auto& tr : ensemble)
    for (std::size_t i = 0; i < S; ++i) {
      const auto& n = tr.records[i].norms;
      const Scalar lap2 = n.h2 - n.h1;
      E[i] += n.l2;
      D[i] += n.grad + n.l2 + n.l4;
      step_bias[i] += 3 * (n.l2 + 2 * n.dirichlet + lap2) + 3 * n.l6 + 2 * h1_noise * (1 + n.linf) * (1 + n.linf);
      form_gap[i] += abs(n.dirichlet - n.grad);
    }
  for (std::size_t i = 0; i < S; ++i) {
    E[i] /= Scalar(M);
    D[i] /= Scalar(M);
    step_bias[i] /= Scalar(M);
    form_gap[i] /= Scalar(M);
  }
  auto third = [&](std::size_t i) {
    const std::size_t c = std::clamp<std::size_t>(i, 2, S - 3);
    return abs(E[c + 2] - 2 * E[c + 1] + 2 * E[c - 1] - E[c - 2]) / (2 * spacing * spacing * spacing);
  };
  auto second_d = [&](std::size_t i) {
    const std::size_t c = std::clamp<std::size_t>(i, 1, S - 2);
    return abs(D[c + 1] - 2 * D[c] + D[c - 1]) / (spacing * spacing);
  };

  EnergyBalance<Scalar> out;
  out.forcing_rate = Q;
  for (std::size_t i = 1; i + 1 < S; ++i) {
    std::vector<Scalar> r(M);
    Scalar mean = 0;
    for (std::size_t k = 0; k < M; ++k) {
      const auto& a = ensemble[k].records[i - 1].norms;
      const auto& b = ensemble[k].records[i].norms;
      const auto& c = ensemble[k].records[i + 1].norms;
      r[k] = (c.l2 - a.l2) / (2 * spacing) + 2 * (b.grad + b.l2 + b.l4) - Q;
      mean += r[k];
    }
    mean /= Scalar(M);
    Scalar var = 0;
    for (Scalar x : r) var += (x - mean) * (x - mean);
    var /= Scalar(M - 1);
    const Scalar sigma = sqrt(var / Scalar(M));
    const Scalar budget = dt * step_bias[i] + 2 * form_gap[i] + spacing * spacing / 6 * (third(i) + 2 * second_d(i));
    out.t.push_back(rec0[i].t);
    out.residual.push_back(mean);
    out.sigma.push_back(sigma);
    out.budget.push_back(budget);
    out.within.push_back(abs(mean) <= 3 * (sigma + budget));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dissipation bound  E|u(t)|_{H1}^2 <= C e^{-t} |u0|_{H1}^2 + C

template <typename Scalar>
struct DissipationRun {
  const Ensemble<Scalar>* ensemble = nullptr;
  Scalar u0_h1 = 0;  // |u0|_{H1}^2 of the (cut-off) initial data
};

template <typename Scalar>
struct DissipationFit {
  Scalar constant = 0;            // smallest C valid for every run
  std::vector<Scalar> per_run;    // smallest C valid for each run alone
  bool pass = false;
};

template <typename Scalar>
DissipationFit<Scalar> dissipation_bound_check(const std::vector<DissipationRun<Scalar>>& runs, Scalar ceiling) {
  using std::exp;
  DissipationFit<Scalar> fit;
  for (const auto& run : runs) {
    const auto& ens = *run.ensemble;
    if (ens.empty()) throw std::invalid_argument("dissipation fit needs a non-empty ensemble");
    Scalar c = 0;
    const std::size_t S = ens.front().records.size();
    for (std::size_t i = 0; i < S; ++i) {
      Scalar mean = 0;
      for (const auto& tr : ens) mean += tr.records.at(i).norms.h1;
      mean /= Scalar(ens.size());
      const Scalar t = ens.front().records[i].t;
      c = std::max(c, mean / (exp(-t) * run.u0_h1 + 1));
    }
    fit.per_run.push_back(c);
    fit.constant = std::max(fit.constant, c);
  }
  fit.pass = std::isfinite(double(fit.constant)) && fit.constant <= ceiling;
  return fit;
}

// ---------------------------------------------------------------------------
// Empirical (time-averaged) measures on the observable vector

template <typename Scalar>
struct EmpiricalMeasure {
  std::vector<std::string> observables;
  std::vector<Scalar> ladder;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> samples;  // one row per sample
  std::vector<Scalar> weights;
  Scalar eps = 0;
  int seeds = 0;
  Scalar burn_in = 0;
  Scalar average = 0;
  bool experimental = false;  // two-dimensional runs

  Eigen::Index size() const { return samples.rows(); }

  std::size_t column(const std::string& name) const {
    const auto it = std::find(observables.begin(), observables.end(), name);
    if (it == observables.end()) throw std::invalid_argument("measure has no observable '" + name + "'");
    return static_cast<std::size_t>(it - observables.begin());
  }
};

inline std::string ladder_label(const std::string& prefix, double m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s@%g", prefix.c_str(), m);
  return buf;
}

template <typename Scalar>
std::vector<std::string> observable_names(const std::vector<Scalar>& ladder) {
  std::vector<std::string> names{"l2", "h1", "h2", "l4", "linf", "cross_energy"};
  for (Scalar m : ladder) names.push_back(ladder_label("tail_l2", double(m)));
  for (Scalar m : ladder) names.push_back(ladder_label("tail_h1", double(m)));
  return names;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> observable_vector(const ObservableRecord<Scalar>& r) {
  const std::size_t L = r.tails_l2.size();
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> v(6 + 2 * L);
  v << r.norms.l2, r.norms.h1, r.norms.h2, r.norms.l4, r.norms.linf, r.norms.cross_energy,
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(2 * L);
  for (std::size_t k = 0; k < L; ++k) {
    v(6 + k) = r.tails_l2[k];
    v(6 + L + k) = r.tails_h1[k];
  }
  return v;
}

/// Uniform weights 1/N whose running sum is exactly 1.
template <typename Scalar>
std::vector<Scalar> uniform_weights(std::size_t count) {
  std::vector<Scalar> w(count, Scalar(1) / Scalar(count));
  if (count == 0) return w;
  Scalar partial = 0;
  for (std::size_t i = 0; i + 1 < count; ++i) partial += w[i];
  w.back() = Scalar(1) - partial;
  return w;
}

/// Builds a measure from the records of every trajectory with t >= burn-in.
template <typename Scalar>
EmpiricalMeasure<Scalar> measure_from_ensemble(const Ensemble<Scalar>& ensemble, const std::vector<Scalar>& ladder,
                                               Scalar burn_in) {
  EmpiricalMeasure<Scalar> mu;
  mu.observables = observable_names(ladder);
  mu.ladder = ladder;
  std::vector<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> rows;
  for (const auto& tr : ensemble)
    for (const auto& r : tr.records)
      if (r.t >= burn_in - Scalar(1e-12) * (Scalar(1) + burn_in)) rows.push_back(observable_vector(r));
  mu.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(mu.observables.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) mu.samples.row(static_cast<Eigen::Index>(i)) = rows[i];
  mu.weights = uniform_weights<Scalar>(rows.size());
  mu.seeds = static_cast<int>(ensemble.size());
  mu.burn_in = burn_in;
  return mu;
}

/// Krylov-Bogoliubov time average: samples the observable vector every
/// stride over [burn_in, burn_in + average] on `seeds` trajectories, uniform
/// weights.
template <typename Scalar>
EmpiricalMeasure<Scalar> kb_measure(SimConfig<Scalar> cfg, const VectorField<Scalar>& u0, Scalar burn_in,
                                    Scalar average, int seeds, unsigned threads = 1, std::uint64_t first_id = 0) {
  if (!(average > 0)) throw std::invalid_argument("averaging window must be positive");
  if (seeds < 1) throw std::invalid_argument("measure needs at least one seed");
  cfg.horizon = burn_in + average;
  const auto stepper = make_stepper(cfg);
  const auto ensemble = run_ensemble(cfg, stepper, u0, seeds, threads, first_id);
  for (const auto& tr : ensemble)
    if (tr.failed) throw std::runtime_error("trajectory blew up while building the measure");
  auto mu = measure_from_ensemble(ensemble, cfg.tail_ladder, burn_in);
  mu.eps = cfg.noise.eps;
  mu.average = average;
  mu.experimental = cfg.dim == 2;
  return mu;
}

/// Fixed dictionary of unit directions on the observable space: the
/// coordinate axes followed by `random_count` Gaussian directions drawn from
/// a fixed stream.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> bl_dictionary(Eigen::Index dim, int random_count = 64,
                                                                     std::uint64_t seed = 0x424c44ull) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> W(dim + random_count, dim);
  W.topRows(dim).setIdentity();
  const NormalStream stream(seed, 0);
  for (int r = 0; r < random_count; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c)
      W(dim + r, c) = Scalar(stream.normal(std::uint64_t(r), 0, std::uint32_t(c)));
    W.row(dim + r).normalize();
  }
  return W;
}

namespace detail {

/// sup over c of | sum_i p_i clip(s_i - c, 0, 1) - sum_j q_j clip(t_j - c, 0, 1) |.
/// The difference is piecewise linear in c with kinks at s - 1 and s, so the
/// supremum is attained at one of those points; a sorted sweep finds it.
template <typename Scalar>
Scalar ramp_sup(const std::vector<Scalar>& s, const std::vector<Scalar>& p, const std::vector<Scalar>& t,
                const std::vector<Scalar>& q) {
  struct Event {
    Scalar at;
    Scalar slope;
    int side;
  };
  std::vector<Event> ev;
  ev.reserve(2 * (s.size() + t.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    ev.push_back({s[i] - 1, -p[i], 0});
    ev.push_back({s[i], p[i], 0});
  }
  for (std::size_t j = 0; j < t.size(); ++j) {
    ev.push_back({t[j] - 1, -q[j], 1});
    ev.push_back({t[j], q[j], 1});
  }
  std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.at < b.at; });
  // Each side is integrated on its own so that equal inputs give bit-equal
  // values and the distance of a measure to itself is exactly zero.
  Scalar value[2] = {0, 0}, slope[2] = {0, 0};
  for (Scalar x : p) value[0] += x;
  for (Scalar x : q) value[1] += x;
  Scalar best = std::abs(value[0] - value[1]), here = ev.empty() ? 0 : ev.front().at;
  for (const auto& e : ev) {
    for (int k = 0; k < 2; ++k) value[k] += slope[k] * (e.at - here);
    here = e.at;
    slope[e.side] += e.slope;
    best = std::max(best, std::abs(value[0] - value[1]));
  }
  return std::min(best, Scalar(1));
}

}  // namespace detail

/// Bounded-Lipschitz distance estimated on the dictionary of clipped ramps
/// x -> clip(<w, x> - c, 0, 1), |w| = 1, all offsets c. Each ramp is
/// 1-Lipschitz with values in [0, 1]; the supremum over this fixed family is
/// symmetric and obeys the triangle inequality.
template <typename Scalar>
Scalar bl_distance(const EmpiricalMeasure<Scalar>& a, const EmpiricalMeasure<Scalar>& b, int random_count = 64) {
  if (a.observables != b.observables) throw std::invalid_argument("measures use different observables");
  const Eigen::Index dim = static_cast<Eigen::Index>(a.observables.size());
  const auto W = bl_dictionary<Scalar>(dim, random_count);
  Scalar best = 0;
  std::vector<Scalar> s(a.size()), t(b.size());
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pa = a.samples * W.row(r).transpose();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pb = b.samples * W.row(r).transpose();
    for (Eigen::Index i = 0; i < a.size(); ++i) s[i] = pa(i);
    for (Eigen::Index i = 0; i < b.size(); ++i) t[i] = pb(i);
    best = std::max(best, detail::ramp_sup(s, a.weights, t, b.weights));
  }
  return best;
}

/// Weighted quantile (smallest value whose cumulative weight reaches q).
template <typename Scalar>
Scalar weighted_quantile(std::vector<std::pair<Scalar, Scalar>> values, Scalar q) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  Scalar acc = 0;
  for (const auto& [v, w] : values) {
    acc += w;
    if (acc >= q * (1 - Scalar(1e-12))) return v;
  }
  return values.back().first;
}

/// Per ladder radius m: the q-quantile (default 95%) of the H1 tail mass
/// under the measure. Radii at or beyond the grid radius carry zero tails.
template <typename Scalar>
std::vector<Scalar> tightness_profile(const EmpiricalMeasure<Scalar>& mu, const std::vector<Scalar>& m_ladder,
                                      Scalar q = Scalar(0.95)) {
  std::vector<Scalar> out;
  for (Scalar m : m_ladder) {
    const std::size_t c = mu.column(ladder_label("tail_h1", double(m)));
    std::vector<std::pair<Scalar, Scalar>> vals;
    vals.reserve(static_cast<std::size_t>(mu.size()));
    for (Eigen::Index i = 0; i < mu.size(); ++i) vals.emplace_back(mu.samples(i, static_cast<Eigen::Index>(c)), mu.weights[i]);
    out.push_back(weighted_quantile(std::move(vals), q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Continuity in the initial data

template <typename Scalar>
struct ContinuityStats {
  std::vector<Scalar> ratio;         // per seed: sup_t |du(t)|^2 / |du(0)|^2
  std::vector<Scalar> sup_diff_sq;   // per seed: sup_t |du(t)|^2
  Scalar initial_diff_sq = 0;
  Scalar median_ratio = 0;
  Scalar max_ratio = 0;
  bool identical = false;            // |du(0)| = 0: ratios undefined, sup_diff_sq reported
};

template <typename Scalar>
Scalar median(std::vector<Scalar> v) {
  if (v.empty()) return std::numeric_limits<Scalar>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

/// Runs both initial data on the same Wiener path and reports the discrete
/// Gronwall constant sup_t |u_a(t) - u_b(t)|^2 / |u_a(0) - u_b(0)|^2.
template <typename Scalar>
ContinuityStats<Scalar> initial_data_continuity(const SimConfig<Scalar>& cfg, const VectorField<Scalar>& u0_a,
                                                const VectorField<Scalar>& u0_b, int seeds, unsigned threads = 1) {
  const auto stepper = make_stepper(cfg);
  const VectorField<Scalar> a0 = cut_initial_data(u0_a), b0 = cut_initial_data(u0_b);
  ContinuityStats<Scalar> out;
  out.initial_diff_sq = l2_squared(a0 - b0);
  out.identical = out.initial_diff_sq == Scalar(0);
  out.sup_diff_sq = parallel_map(static_cast<std::size_t>(seeds), threads, [&](std::size_t id) {
    const auto path = make_path(cfg, id);
    TrajectoryState<Scalar> a, b;
    a.u = a0;
    b.u = b0;
    Scalar sup = out.initial_diff_sq;
    while (a.step < cfg.steps()) {
      step(a, cfg, stepper, path);
      step(b, cfg, stepper, path);
      if (a.failed || b.failed) return std::numeric_limits<Scalar>::infinity();
      if (a.step % cfg.stride == 0 || a.step == cfg.steps()) sup = std::max(sup, l2_squared(a.u - b.u));
    }
    return sup;
  });
  if (!out.identical) {
    for (Scalar s : out.sup_diff_sq) out.ratio.push_back(s / out.initial_diff_sq);
    out.median_ratio = median(out.ratio);
    out.max_ratio = *std::max_element(out.ratio.begin(), out.ratio.end());
  }
  return out;
}

}  // namespace llb
