#pragma once

#include "llb/field.hpp"
#include "llb/grid.hpp"
#include "llb/noise.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace llb {

enum class Scheme { semi_implicit, explicit_euler };

inline const char* to_string(Scheme s) { return s == Scheme::semi_implicit ? "semi-implicit" : "explicit"; }

inline Scheme parse_scheme(const std::string& s) {
  if (s == "semi-implicit") return Scheme::semi_implicit;
  if (s == "explicit") return Scheme::explicit_euler;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

/// Switches for the nonlinear drift terms. All off leaves the linear
/// equation du = (lap u - u) dt + eps sum f_k dW_k.
struct ModelSwitches {
  bool gyro = true;            // u x lap u
  bool cubic = true;           // -|u|^2 u
  bool ito_correction = true;  // 1/2 eps^2 sum (u x f_k) x f_k
  bool multiplicative = true;  // u x f_k in the noise

  static ModelSwitches linear() { return {false, false, false, false}; }
  friend bool operator==(const ModelSwitches&, const ModelSwitches&) = default;
};

template <typename Scalar>
struct SimConfig {
  int dim = 1;
  Scalar radius = 4;
  Scalar spacing = Scalar(0.05);
  Scalar dt = Scalar(1e-3);
  Scalar horizon = 1;
  int stride = 1;  // steps between observable samples
  Scheme scheme = Scheme::semi_implicit;
  Scalar safety = 1;
  NoiseSpec<Scalar> noise;
  std::uint64_t seed = 0;
  ModelSwitches model;
  Scalar linf_ceiling = 1e3;
  int max_halvings = 6;
  int wiener_substeps = 1;  // fine Wiener steps per dt
  std::vector<Scalar> tail_ladder;

  Grid<Scalar> grid() const { return make_grid(dim, radius, spacing); }

  std::int64_t steps() const {
    using std::round;
    return static_cast<std::int64_t>(round(horizon / dt));
  }

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const {
    using std::abs;
    using std::round;
    (void)grid();
    if (!(dt > 0)) throw std::invalid_argument("time.dt must be positive");
    if (!(horizon >= 0)) throw std::invalid_argument("time.horizon must be non-negative");
    const Scalar q = horizon / dt;
    if (abs(q - round(q)) > Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + q))
      throw std::invalid_argument("time.dt must divide time.horizon");
    if (stride < 1) throw std::invalid_argument("time.stride must be at least 1");
    if (safety < 1) throw std::invalid_argument("time.safety must be at least 1");
    if (scheme == Scheme::explicit_euler && dt > spacing * spacing / (Scalar(2 * dim) * safety))
      throw std::invalid_argument("explicit stability guard violated: time.dt > h^2 / (2 d safety)");
    if (noise.eps < 0 || noise.eps > 1) throw std::invalid_argument("noise.eps must lie in [0, 1]");
    if (noise.modes < 0) throw std::invalid_argument("noise.modes must be non-negative");
    if (!(noise.support > 0)) throw std::invalid_argument("noise.support must be positive");
    if (!(linf_ceiling > 0)) throw std::invalid_argument("time.linf_ceiling must be positive");
    if (max_halvings < 0 || max_halvings > 20) throw std::invalid_argument("time.max_halvings must lie in [0, 20]");
    if (wiener_substeps < 1) throw std::invalid_argument("time.wiener_substeps must be at least 1");
    for (std::size_t i = 1; i < tail_ladder.size(); ++i)
      if (!(tail_ladder[i - 1] < tail_ladder[i])) throw std::invalid_argument("tail ladder must be strictly increasing");
  }
};

/// Per-sample observables of one trajectory.
template <typename Scalar>
struct ObservableRecord {
  Scalar t = 0;
  NormReport<Scalar> norms;
  std::vector<Scalar> tails_l2;
  std::vector<Scalar> tails_h1;
};

template <typename Scalar>
ObservableRecord<Scalar> observe(const VectorField<Scalar>& u, Scalar t, const std::vector<Scalar>& ladder) {
  ObservableRecord<Scalar> r;
  r.t = t;
  r.norms = norms(u);
  if (!ladder.empty()) {
    r.tails_l2 = tail_masses(u, ladder, TailOrder::L2);
    r.tails_h1 = tail_masses(u, ladder, TailOrder::H1);
  }
  return r;
}

/// lap u + u x lap u - (1 + |u|^2) u + 1/2 eps^2 sum (u x f_k) x f_k
template <typename Scalar>
VectorField<Scalar> drift(const VectorField<Scalar>& u, const NoiseBasis<Scalar>& basis,
                          const ModelSwitches& model = {}) {
  if (u.grid() != basis.grid()) throw std::invalid_argument("field and noise basis live on different grids");
  const VectorField<Scalar> lap = laplacian(u);
  VectorField<Scalar> out = lap;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Vec3<Scalar> ui = u.at(i);
    Vec3<Scalar> d = -ui;
    if (model.gyro) d += ui.cross(lap.at(i));
    if (model.cubic) d -= ui.squaredNorm() * ui;
    out.row(i) += d.transpose();
  }
  if (model.ito_correction) out += ito_correction(u, basis);
  if (!out.all_finite()) throw std::runtime_error("drift produced non-finite values");
  return out;
}

namespace detail {

/// Rotation of v about the axis w by the angle dt |w| (Rodrigues).
template <typename Scalar>
Vec3<Scalar> rotate(const Vec3<Scalar>& v, const Vec3<Scalar>& w, Scalar dt) {
  using std::cos;
  using std::sin;
  const Scalar len = w.norm();
  if (len == Scalar(0)) return v;
  const Vec3<Scalar> k = w / len;
  const Scalar angle = dt * len;
  const Scalar c = cos(angle), s = sin(angle);
  return c * v + s * k.cross(v) + (Scalar(1) - c) * k.dot(v) * k;
}

}  // namespace detail

/// One-step map of the Ito-form equation on a fixed grid, for every step
/// size dt / 2^j, j <= max_halvings.
///
/// Semi-implicit step of length tau:
///   r  = rotation of u about -lap u by tau |lap u|    (gyro term, |r| = |u|)
///   r /= 1 + tau |u|^2                                 (cubic term)
///   r += tau * ito_correction(u) + u x F + F           (F = eps sum f_k dW_k)
///   (I + tau (I - lap)) u' = r                         (factorised once)
/// The rotation and the frozen-coefficient cubic factor are first-order
/// consistent with u x lap u and -|u|^2 u and never increase |u| pointwise,
/// so at eps = 0 the discrete L2 norm strictly decreases every step.
template <typename Scalar>
class Stepper {
 public:
  using Sparse = Eigen::SparseMatrix<Scalar>;
  using Solver = Eigen::SimplicialLDLT<Sparse>;

  Stepper(const SimConfig<Scalar>& cfg, NoiseBasis<Scalar> basis)
      : grid_(cfg.grid()), basis_(std::move(basis)), model_(cfg.model), scheme_(cfg.scheme),
        dt_(cfg.dt), ceiling_(cfg.linf_ceiling), max_halvings_(cfg.max_halvings) {
    if (basis_.grid() != grid_) throw std::invalid_argument("noise basis does not match the configured grid");
    if (scheme_ == Scheme::semi_implicit) {
      auto solvers = std::make_shared<std::vector<std::unique_ptr<Solver>>>();
      for (int j = 0; j <= max_halvings_; ++j) solvers->push_back(factorize(dt_ / Scalar(1 << j)));
      solvers_ = std::move(solvers);
    }
  }

  /// Same grid, scheme and factorisations with another noise basis.
  Stepper with_basis(NoiseBasis<Scalar> basis) const {
    Stepper s = *this;
    if (basis.grid() != grid_) throw std::invalid_argument("noise basis does not match the stepper grid");
    s.basis_ = std::move(basis);
    return s;
  }

  const Grid<Scalar>& grid() const { return grid_; }
  const NoiseBasis<Scalar>& basis() const { return basis_; }
  Scalar dt() const { return dt_; }

  struct Outcome {
    bool finite = true;
    int halvings = 0;
  };

  /// Advances u over inc.dt. When |u|_inf exceeds the ceiling the step is
  /// split in two along the Brownian bridge of `path`, recursively.
  Outcome advance(VectorField<Scalar>& u, const WienerIncrement<Scalar>& inc, const WienerPath<Scalar>& path,
                  int depth = 0) const {
    if (depth < max_halvings_ && u.values().cwiseAbs().maxCoeff() > ceiling_) {
      const auto halves = path.split(inc);
      Outcome a = advance(u, halves.first, path, depth + 1);
      if (!a.finite) return a;
      Outcome b = advance(u, halves.second, path, depth + 1);
      return {b.finite, 1 + a.halvings + b.halvings};
    }
    try {
      step_once(u, inc, depth);
    } catch (const std::runtime_error&) {
      return {false, 0};  // non-finite drift: the trajectory has blown up
    }
    return {u.all_finite(), 0};
  }

 private:
  std::unique_ptr<Solver> factorize(Scalar tau) const {
    using Triplet = Eigen::Triplet<Scalar>;
    std::vector<Triplet> entries;
    const Scalar c = tau / (grid_.spacing() * grid_.spacing());
    for (Eigen::Index i = 0; i < grid_.size(); ++i) {
      if (grid_.is_boundary(i)) {
        entries.emplace_back(i, i, Scalar(1));
        continue;
      }
      entries.emplace_back(i, i, Scalar(1) + tau + Scalar(2 * grid_.dim()) * c);
      for (int a = 0; a < grid_.dim(); ++a) {
        const Eigen::Index s = grid_.stride(a);
        for (Eigen::Index nb : {i - s, i + s})
          if (!grid_.is_boundary(nb)) entries.emplace_back(i, nb, -c);
      }
    }
    Sparse A(grid_.size(), grid_.size());
    A.setFromTriplets(entries.begin(), entries.end());
    auto solver = std::make_unique<Solver>(A);
    if (solver->info() != Eigen::Success) throw std::runtime_error("factorisation of the implicit operator failed");
    return solver;
  }

  void step_once(VectorField<Scalar>& u, const WienerIncrement<Scalar>& inc, int depth) const {
    const Scalar tau = inc.dt;
    const bool noisy = basis_.size() > 0 && basis_.eps() != Scalar(0);
    VectorField<Scalar> F;
    if (noisy) F = noise_forcing<Scalar>(basis_, inc.dW);

    if (scheme_ == Scheme::explicit_euler) {
      VectorField<Scalar> next = u;
      next.values() += tau * drift(u, basis_, model_).values();
      if (noisy) add_noise(next, u, F);
      next.zero_boundary();
      u = std::move(next);
      return;
    }

    const VectorField<Scalar> lap = laplacian(u);
    VectorField<Scalar> r = u;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const Vec3<Scalar> ui = u.at(i);
      Vec3<Scalar> ri = ui;
      if (model_.gyro) ri = detail::rotate<Scalar>(ui, -lap.at(i), tau);
      if (model_.cubic) ri /= Scalar(1) + tau * ui.squaredNorm();
      r.row(i) = ri.transpose();
    }
    if (model_.ito_correction && noisy) r.values() += tau * ito_correction(u, basis_).values();
    if (noisy) add_noise(r, u, F);
    r.zero_boundary();
    const Solver& solver = *(*solvers_)[depth];
    typename VectorField<Scalar>::Values rhs = r.values();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 3> cols = rhs;
    cols = solver.solve(cols);
    u.values() = cols;
  }

  void add_noise(VectorField<Scalar>& target, const VectorField<Scalar>& u, const VectorField<Scalar>& F) const {
    target.values() += F.values();
    if (model_.multiplicative)
      for (Eigen::Index i = 0; i < u.size(); ++i) target.row(i) += u.row(i).cross(F.row(i));
  }

  Grid<Scalar> grid_;
  NoiseBasis<Scalar> basis_;
  ModelSwitches model_;
  Scheme scheme_;
  Scalar dt_;
  Scalar ceiling_;
  int max_halvings_;
  std::shared_ptr<const std::vector<std::unique_ptr<Solver>>> solvers_;
};

template <typename Scalar>
struct TrajectoryState {
  Scalar t = 0;
  std::int64_t step = 0;
  VectorField<Scalar> u;
  bool failed = false;
  Scalar last_finite_time = 0;
  int halvings = 0;
};

template <typename Scalar>
struct Trajectory {
  std::vector<ObservableRecord<Scalar>> records;
  bool failed = false;
  Scalar last_finite_time = 0;
  int halvings = 0;
  VectorField<Scalar> final_state;
};

/// Advances the state by one configured step on the given path.
template <typename Scalar>
void step(TrajectoryState<Scalar>& state, const SimConfig<Scalar>& cfg, const Stepper<Scalar>& stepper,
          const WienerPath<Scalar>& path) {
  if (state.failed) return;
  if (state.step >= cfg.steps()) throw std::logic_error("step beyond the configured horizon");
  const auto inc = path.increment(static_cast<std::uint64_t>(state.step), cfg.wiener_substeps);
  const auto outcome = stepper.advance(state.u, inc, path);
  state.halvings += outcome.halvings;
  ++state.step;
  state.t = cfg.dt * Scalar(state.step);
  if (!outcome.finite)
    state.failed = true;
  else
    state.last_finite_time = state.t;
}

struct NoObserver {
  template <typename State>
  void operator()(const State&) const {}
};

template <typename Scalar>
WienerPath<Scalar> make_path(const SimConfig<Scalar>& cfg, std::uint64_t trajectory) {
  return WienerPath<Scalar>(cfg.seed, trajectory, cfg.noise.modes, cfg.dt / Scalar(cfg.wiener_substeps));
}

/// Initial state theta_n u0 with the Dirichlet nodes cleared.
template <typename Scalar>
VectorField<Scalar> cut_initial_data(const VectorField<Scalar>& u0) {
  VectorField<Scalar> u = apply_cutoff(u0, theta_profile(u0.grid().radius()));
  u.zero_boundary();
  return u;
}

/// Integrates from theta_n u0 to the horizon, recording observables every
/// `stride` steps and at the final time. The observer sees the state at the
/// same instants.
template <typename Scalar, typename Observer = NoObserver>
Trajectory<Scalar> simulate(const SimConfig<Scalar>& cfg, const Stepper<Scalar>& stepper, const VectorField<Scalar>& u0,
                            std::uint64_t trajectory, Observer&& observer = {}) {
  if (u0.grid() != stepper.grid()) throw std::invalid_argument("initial data does not live on the simulation grid");
  if (!u0.all_finite()) throw std::invalid_argument("initial data is not finite");
  const auto path = make_path(cfg, trajectory);
  TrajectoryState<Scalar> state;
  state.u = cut_initial_data(u0);
  Trajectory<Scalar> out;
  const std::int64_t total = cfg.steps();
  auto sample = [&] {
    out.records.push_back(observe(state.u, state.t, cfg.tail_ladder));
    observer(state);
  };
  sample();
  while (state.step < total) {
    step(state, cfg, stepper, path);
    if (state.failed) break;
    if (state.step % cfg.stride == 0 || state.step == total) sample();
  }
  out.failed = state.failed;
  out.last_finite_time = state.last_finite_time;
  out.halvings = state.halvings;
  out.final_state = std::move(state.u);
  return out;
}

template <typename Scalar>
Stepper<Scalar> make_stepper(const SimConfig<Scalar>& cfg) {
  cfg.validate();
  return Stepper<Scalar>(cfg, build_basis(cfg.grid(), cfg.noise));
}

template <typename Scalar>
Trajectory<Scalar> simulate(const SimConfig<Scalar>& cfg, const VectorField<Scalar>& u0, std::uint64_t trajectory = 0) {
  return simulate(cfg, make_stepper(cfg), u0, trajectory);
}

template <typename Scalar>
struct CoupledTrajectory {
  std::vector<Scalar> eps;
  std::vector<Trajectory<Scalar>> runs;
  // sup over sampled times of |u_i(t) - u_j(t)|_{H1}
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sup_h1_difference;
};

/// Advances one state per intensity in lockstep on a single Wiener path.
template <typename Scalar>
CoupledTrajectory<Scalar> simulate_coupled(const SimConfig<Scalar>& cfg, const Stepper<Scalar>& base,
                                           const VectorField<Scalar>& u0, const std::vector<Scalar>& eps_list,
                                           std::uint64_t trajectory) {
  const std::size_t m = eps_list.size();
  std::vector<Stepper<Scalar>> steppers;
  for (Scalar e : eps_list) steppers.push_back(base.with_basis(base.basis().with_eps(e)));
  const auto path = make_path(cfg, trajectory);
  std::vector<TrajectoryState<Scalar>> states(m);
  CoupledTrajectory<Scalar> out;
  out.eps = eps_list;
  out.runs.resize(m);
  out.sup_h1_difference = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(m, m);
  for (auto& s : states) s.u = cut_initial_data(u0);
  auto sample = [&] {
    for (std::size_t i = 0; i < m; ++i)
      if (!states[i].failed) out.runs[i].records.push_back(observe(states[i].u, states[i].t, cfg.tail_ladder));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        using std::sqrt;
        const Scalar d = sqrt(norms(states[i].u - states[j].u).h1);
        out.sup_h1_difference(i, j) = out.sup_h1_difference(j, i) = std::max(out.sup_h1_difference(i, j), d);
      }
  };
  sample();
  const std::int64_t total = cfg.steps();
  for (std::int64_t k = 0; k < total; ++k) {
    const auto inc = path.increment(static_cast<std::uint64_t>(k), cfg.wiener_substeps);
    bool any_failed = false;
    for (std::size_t i = 0; i < m; ++i) {
      auto& s = states[i];
      if (s.failed) continue;
      const auto outcome = steppers[i].advance(s.u, inc, path);
      s.halvings += outcome.halvings;
      s.step = k + 1;
      s.t = cfg.dt * Scalar(s.step);
      if (outcome.finite)
        s.last_finite_time = s.t;
      else
        s.failed = any_failed = true;
    }
    if (any_failed) break;
    if ((k + 1) % cfg.stride == 0 || k + 1 == total) sample();
  }
  for (std::size_t i = 0; i < m; ++i) {
    out.runs[i].failed = states[i].failed;
    out.runs[i].last_finite_time = states[i].last_finite_time;
    out.runs[i].halvings = states[i].halvings;
    out.runs[i].final_state = std::move(states[i].u);
  }
  return out;
}

}  // namespace llb
