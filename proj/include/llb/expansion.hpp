#pragma once

#include "llb/integrator.hpp"
#include "llb/measure.hpp"
#include "llb/parallel.hpp"

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace llb {

/// Domain-expansion statistics. Every v^n = theta_n u^n is zero-extended to
/// the largest grid before differences and tails are taken.
template <typename Scalar>
struct ExpansionReport {
  std::vector<Scalar> radii;
  std::vector<Scalar> m_ladder;
  Scalar sample_spacing = 0;  // the sup over t is taken over these samples
  bool experimental = false;

  // [seed][pair]: sup_t |v^{n_i} - v^{n_{i+1}}|_{L2}
  std::vector<std::vector<Scalar>> pair_sup_diff;
  std::vector<Scalar> median_diff;  // per pair, over seeds
  std::vector<Scalar> mean_diff;

  // [radius][m]: E sup_t int_{|x| >= m} |v^n|^2
  std::vector<std::vector<Scalar>> tails;
  int failed = 0;
};

/// Solves on D_n for every radius from theta_n u0 with the same Wiener path
/// (per seed) and the same noise modes, which are defined in absolute
/// coordinates and restricted to each grid.
template <typename Scalar>
ExpansionReport<Scalar> run_expansion(const SimConfig<Scalar>& base, const std::vector<Scalar>& radii,
                                      const VectorField<Scalar>& u0, int seeds, const std::vector<Scalar>& m_ladder,
                                      unsigned threads = 1) {
  using std::sqrt;
  if (radii.empty()) throw std::invalid_argument("expansion needs at least one radius");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (radii[i] < radii[i - 1]) throw std::invalid_argument("expansion radii must be non-decreasing");
  if (seeds < 1) throw std::invalid_argument("expansion needs at least one seed");
  const Grid<Scalar>& big = u0.grid();
  if (big.radius() != radii.back()) throw std::invalid_argument("initial data must live on the largest grid");

  std::vector<SimConfig<Scalar>> cfgs;
  std::vector<Stepper<Scalar>> steppers;
  std::vector<VectorField<Scalar>> starts;
  for (Scalar n : radii) {
    SimConfig<Scalar> c = base;
    c.radius = n;
    c.dim = big.dim();
    c.tail_ladder.clear();
    c.validate();
    const Grid<Scalar> g = c.grid();
    (void)nested_offset(g, big);
    steppers.push_back(make_stepper(c));
    starts.push_back(restrict_to(u0, g));
    cfgs.push_back(c);
  }

  const std::size_t R = radii.size();
  struct SeedResult {
    std::vector<Scalar> pair;
    std::vector<std::vector<Scalar>> tails;
    bool failed = false;
  };
  auto results = parallel_map(static_cast<std::size_t>(seeds), threads, [&](std::size_t id) {
    SeedResult res;
    std::vector<std::vector<VectorField<Scalar>>> snaps(R);
    for (std::size_t r = 0; r < R; ++r) {
      const auto cutoff = theta_profile(radii[r]);
      auto tr = simulate(cfgs[r], steppers[r], starts[r], id, [&](const TrajectoryState<Scalar>& st) {
        snaps[r].push_back(embed(apply_cutoff(st.u, cutoff), big));
      });
      res.failed = res.failed || tr.failed;
    }
    res.pair.assign(R > 0 ? R - 1 : 0, Scalar(0));
    res.tails.assign(R, std::vector<Scalar>(m_ladder.size(), Scalar(0)));
    if (res.failed) return res;
    const std::size_t S = snaps.front().size();
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t r = 0; r + 1 < R; ++r)
        res.pair[r] = std::max(res.pair[r], sqrt(l2_squared(snaps[r][s] - snaps[r + 1][s])));
      for (std::size_t r = 0; r < R; ++r) {
        const auto t = tail_masses(snaps[r][s], m_ladder, TailOrder::L2);
        for (std::size_t k = 0; k < m_ladder.size(); ++k) res.tails[r][k] = std::max(res.tails[r][k], t[k]);
      }
    }
    return res;
  });

  ExpansionReport<Scalar> rep;
  rep.radii = radii;
  rep.m_ladder = m_ladder;
  rep.sample_spacing = base.dt * Scalar(base.stride);
  rep.experimental = big.dim() == 2;
  rep.tails.assign(R, std::vector<Scalar>(m_ladder.size(), Scalar(0)));
  int ok = 0;
  for (const auto& res : results) {
    if (res.failed) {
      ++rep.failed;
      continue;
    }
    ++ok;
    rep.pair_sup_diff.push_back(res.pair);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t k = 0; k < m_ladder.size(); ++k) rep.tails[r][k] += res.tails[r][k];
  }
  for (auto& row : rep.tails)
    for (auto& v : row) v = ok > 0 ? v / Scalar(ok) : Scalar(0);
  for (std::size_t p = 0; p + 1 < R; ++p) {
    std::vector<Scalar> col;
    Scalar sum = 0;
    for (const auto& d : rep.pair_sup_diff) {
      col.push_back(d[p]);
      sum += d[p];
    }
    rep.median_diff.push_back(median(col));
    rep.mean_diff.push_back(ok > 0 ? sum / Scalar(ok) : Scalar(0));
  }
  return rep;
}

template <typename Scalar>
struct TailUniformity {
  std::optional<Scalar> m_star;                      // uniform over radii; empty: exceeds ladder
  std::vector<std::optional<Scalar>> per_radius;     // smallest admissible m for each radius alone
  bool uniform = false;                              // m_star admissible for every radius
};

/// Smallest ladder radius whose tail statistic is below the target for
/// every radius of the report at once.
template <typename Scalar>
TailUniformity<Scalar> tail_uniformity(const ExpansionReport<Scalar>& rep, Scalar target) {
  if (rep.radii.size() < 2) throw std::invalid_argument("tail uniformity needs at least two radii");
  TailUniformity<Scalar> out;
  for (std::size_t r = 0; r < rep.radii.size(); ++r) {
    std::optional<Scalar> m;
    for (std::size_t k = 0; k < rep.m_ladder.size() && !m; ++k)
      if (rep.tails[r][k] < target) m = rep.m_ladder[k];
    out.per_radius.push_back(m);
  }
  for (std::size_t k = 0; k < rep.m_ladder.size(); ++k) {
    bool all = true;
    for (std::size_t r = 0; r < rep.radii.size(); ++r) all = all && rep.tails[r][k] < target;
    if (all) {
      out.m_star = rep.m_ladder[k];
      out.uniform = true;
      break;
    }
  }
  return out;
}

}  // namespace llb
