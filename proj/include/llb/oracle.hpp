#pragma once

#include "llb/integrator.hpp"
#include "llb/parallel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace llb {

/// Closed-form statistics of the linear additive-noise equation
///   du = (lap u - u) dt + eps sum_k f_k dW_k
/// with homogeneous Dirichlet data on [-n, n]^d. In the sine eigenbasis
/// e_j(x) = prod_a n^{-1/2} sin(j_a pi (x_a + n) / 2n), lambda_j = |j|^2 (pi / 2n)^2,
/// each coefficient <u, e_j> is an R^3 Ornstein-Uhlenbeck process with
/// stationary second moment eps^2 sum_k |<f_k, e_j>|^2 / (2 (lambda_j + 1)).
///
/// Modes are numbered from 1 in order of increasing eigenvalue.
template <typename Scalar>
class LinearOracle {
 public:
  static constexpr Scalar resolution_limit = Scalar(0.1);  // largest lambda h^2 accepted

  LinearOracle(const NoiseBasis<Scalar>& basis, int count) : grid_(basis.grid()), eps_(basis.eps()) {
    if (count < 1) throw std::invalid_argument("oracle needs at least one mode");
    const Scalar n = grid_.radius();
    const Scalar k0 = std::numbers::pi_v<Scalar> / (2 * n);
    std::vector<std::array<int, 2>> idx;
    const int top = count + 1;
    for (int a = 1; a <= top; ++a) {
      if (grid_.dim() == 1) {
        idx.push_back({a, 0});
        continue;
      }
      for (int b = 1; b <= top; ++b) idx.push_back({a, b});
    }
    std::stable_sort(idx.begin(), idx.end(), [](const auto& p, const auto& q) {
      return p[0] * p[0] + p[1] * p[1] < q[0] * q[0] + q[1] * q[1];
    });
    idx.resize(count);
    using std::sin;
    using std::sqrt;
    for (const auto& ab : idx) {
      Mode m;
      m.index = ab;
      m.lambda = k0 * k0 * Scalar(ab[0] * ab[0] + ab[1] * ab[1]);
      m.values.resize(grid_.size());
      for (Eigen::Index i = 0; i < grid_.size(); ++i) {
        const auto x = grid_.coord(i);
        Scalar v = sin(Scalar(ab[0]) * k0 * (x(0) + n)) / sqrt(n);
        if (grid_.dim() == 2) v *= sin(Scalar(ab[1]) * k0 * (x(1) + n)) / sqrt(n);
        m.values(i) = v;
      }
      for (int k = 0; k < basis.size(); ++k) m.forcing.push_back(project_values(basis.mode(k), m.values));
      modes_.push_back(std::move(m));
    }
  }

  int size() const { return static_cast<int>(modes_.size()); }
  Scalar eigenvalue(int j) const { return mode(j).lambda; }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& eigenfunction(int j) const { return mode(j).values; }
  std::array<int, 2> wave_numbers(int j) const { return mode(j).index; }
  /// g_{j,k} = <f_k, e_j>
  const Vec3<Scalar>& forcing(int j, int k) const { return mode(j).forcing.at(k); }

  bool resolved(int j) const { return eigenvalue(j) * grid_.spacing() * grid_.spacing() <= resolution_limit; }

  /// v_j = eps^2 sum_k |g_{j,k}|^2 / (2 (lambda_j + 1))
  Scalar stationary_variance(int j) const {
    if (!resolved(j)) throw std::invalid_argument("oracle mode is under-resolved on this grid");
    Scalar s = 0;
    for (const auto& g : mode(j).forcing) s += g.squaredNorm();
    return eps_ * eps_ * s / (2 * (eigenvalue(j) + 1));
  }

  Vec3<Scalar> project(const VectorField<Scalar>& u, int j) const {
    if (u.grid() != grid_) throw std::invalid_argument("field does not live on the oracle grid");
    return project_values(u, mode(j).values);
  }

  /// Quadrature Gram matrix of the first size() eigenfunctions.
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gram() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> G(size(), size());
    for (int a = 0; a < size(); ++a)
      for (int b = 0; b < size(); ++b) {
        Scalar s = 0;
        for (Eigen::Index i = 0; i < grid_.size(); ++i)
          s += grid_.weight(i) * modes_[a].values(i) * modes_[b].values(i);
        G(a, b) = s;
      }
    return G;
  }

 private:
  struct Mode {
    std::array<int, 2> index{};
    Scalar lambda = 0;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
    std::vector<Vec3<Scalar>> forcing;
  };

  const Mode& mode(int j) const {
    if (j < 1 || j > size()) throw std::out_of_range("oracle mode index out of range");
    return modes_[j - 1];
  }

  Vec3<Scalar> project_values(const VectorField<Scalar>& u, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& e) const {
    Vec3<Scalar> s = Vec3<Scalar>::Zero();
    for (Eigen::Index i = 0; i < grid_.size(); ++i) s += (grid_.weight(i) * e(i)) * u.at(i);
    return s;
  }

  Grid<Scalar> grid_;
  Scalar eps_;
  std::vector<Mode> modes_;
};

template <typename Scalar>
Scalar oracle_stationary_variance(int j, const NoiseBasis<Scalar>& basis) {
  return LinearOracle<Scalar>(basis, j).stationary_variance(j);
}

template <typename Scalar>
struct OracleModeResult {
  int mode = 0;
  Scalar empirical = 0;  // time- and ensemble-averaged |<u, e_j>|^2
  Scalar analytic = 0;
  Scalar relative_error = 0;
  Scalar standard_error = 0;  // of `empirical`, across trajectories
  Scalar mean_norm = 0;       // |time-averaged <u, e_j>|
  Scalar mean_standard_error = 0;
};

/// Empirical stationary second moments of the first eigen-coefficients,
/// sampled every stride after the burn-in, starting from u = 0.
template <typename Scalar>
std::vector<OracleModeResult<Scalar>> oracle_compare(SimConfig<Scalar> cfg, const std::vector<int>& modes,
                                                     Scalar burn_in, Scalar average, int trajectories,
                                                     unsigned threads = 1) {
  if (!(cfg.model == ModelSwitches::linear()))
    throw std::invalid_argument("oracle comparison requires the nonlinear terms to be switched off");
  if (modes.empty()) throw std::invalid_argument("oracle comparison needs at least one mode");
  if (trajectories < 2) throw std::invalid_argument("oracle comparison needs at least two trajectories");
  cfg.horizon = burn_in + average;
  cfg.validate();
  const auto stepper = make_stepper(cfg);
  const int top = *std::max_element(modes.begin(), modes.end());
  const LinearOracle<Scalar> oracle(stepper.basis(), top);
  const VectorField<Scalar> zero(stepper.grid());

  struct Sums {
    std::vector<Scalar> second;
    std::vector<Vec3<Scalar>> first;
    long count = 0;
  };
  const Scalar start = burn_in - cfg.dt / 2;
  auto results = parallel_map(static_cast<std::size_t>(trajectories), threads, [&](std::size_t id) {
    Sums s;
    s.second.assign(modes.size(), Scalar(0));
    s.first.assign(modes.size(), Vec3<Scalar>::Zero());
    simulate(cfg, stepper, zero, id, [&](const TrajectoryState<Scalar>& st) {
      if (st.t < start) return;
      for (std::size_t q = 0; q < modes.size(); ++q) {
        const Vec3<Scalar> c = oracle.project(st.u, modes[q]);
        s.second[q] += c.squaredNorm();
        s.first[q] += c;
      }
      ++s.count;
    });
    for (std::size_t q = 0; q < modes.size(); ++q) {
      s.second[q] /= Scalar(s.count);
      s.first[q] /= Scalar(s.count);
    }
    return s;
  });

  std::vector<OracleModeResult<Scalar>> out;
  const Scalar M = Scalar(trajectories);
  using std::abs;
  using std::sqrt;
  for (std::size_t q = 0; q < modes.size(); ++q) {
    OracleModeResult<Scalar> r;
    r.mode = modes[q];
    Scalar mean = 0;
    Vec3<Scalar> first = Vec3<Scalar>::Zero();
    for (const auto& s : results) {
      mean += s.second[q];
      first += s.first[q];
    }
    mean /= M;
    first /= M;
    Scalar var = 0, fvar = 0;
    for (const auto& s : results) {
      var += (s.second[q] - mean) * (s.second[q] - mean);
      fvar += (s.first[q] - first).squaredNorm();
    }
    r.empirical = mean;
    r.standard_error = sqrt(var / (M - 1) / M);
    r.mean_norm = first.norm();
    r.mean_standard_error = sqrt(fvar / (M - 1) / M);
    r.analytic = oracle.stationary_variance(modes[q]);
    r.relative_error = r.analytic > 0 ? abs(r.empirical - r.analytic) / r.analytic : abs(r.empirical);
    out.push_back(r);
  }
  return out;
}

}  // namespace llb
