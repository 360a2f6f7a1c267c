#pragma once

#include "llb/field.hpp"
#include "llb/random.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace llb {

enum class NoisePreset {
  bumps,    // compact bumps 2^{-k} psi((x - c_k) / w), centres at dyadic offsets
  fourier,  // damped Dirichlet sine modes 2^{-k} sin(k pi (x + n) / 2n)
};

inline const char* to_string(NoisePreset p) { return p == NoisePreset::bumps ? "bumps" : "fourier"; }

inline NoisePreset parse_preset(const std::string& s) {
  if (s == "bumps") return NoisePreset::bumps;
  if (s == "fourier") return NoisePreset::fourier;
  throw std::invalid_argument("unknown noise preset '" + s + "'");
}

template <typename Scalar>
struct NoiseSpec {
  NoisePreset preset = NoisePreset::bumps;
  int modes = 16;
  Scalar eps = 1;
  Scalar amplitude = 1;
  // bumps: every mode is supported in |x| <= support
  Scalar support = 1;
};

template <typename Scalar>
struct ModeNorms {
  Scalar w1inf = 0;  // sup |f| + sup |grad f|
  Scalar h1 = 0;     // |f|_{H1}
  Scalar l2sq = 0;   // |f|_{L2}^2
};

/// Truncated noise basis f_1..f_K at intensity eps.
///
/// Modes are stored unscaled; eps enters only through ito_correction and
/// diffusion. `second_moment` caches sum_k f_k f_k^T per node, which turns
/// the Ito correction into a K-independent pointwise 3x3 product.
template <typename Scalar>
class NoiseBasis {
 public:
  using Moment = Eigen::Matrix<Scalar, 3, 3>;

  NoiseBasis() = default;
  NoiseBasis(const Grid<Scalar>& grid, std::vector<VectorField<Scalar>> modes, Scalar eps)
      : grid_(grid), modes_(std::move(modes)), eps_(eps) {
    if (eps < 0 || eps > 1) throw std::invalid_argument("noise intensity must lie in [0, 1]");
    second_moment_.assign(grid_.size(), Moment::Zero());
    for (const auto& f : modes_) {
      if (f.grid() != grid_) throw std::invalid_argument("noise mode lives on a different grid");
      const auto grad = gradient(f);
      ModeNorms<Scalar> nm;
      Scalar fsup = 0, gsup = 0;
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        using std::sqrt;
        fsup = std::max(fsup, f.row(i).norm());
        Scalar g2 = 0;
        for (const auto& d : grad) g2 += d.row(i).squaredNorm();
        gsup = std::max(gsup, sqrt(g2));
        second_moment_[i] += f.at(i) * f.at(i).transpose();
      }
      nm.l2sq = l2_squared(f);
      using std::sqrt;
      nm.h1 = sqrt(nm.l2sq + grad_squared(grad));
      nm.w1inf = fsup + gsup;
      if (!std::isfinite(double(nm.w1inf)) || !std::isfinite(double(nm.h1)))
        throw std::invalid_argument("noise mode has non-finite norms");
      norms_.push_back(nm);
      gradients_.push_back(grad);
      summability_ += nm.w1inf + nm.h1;
      l2_energy_ += nm.l2sq;
    }
  }

  const Grid<Scalar>& grid() const { return grid_; }
  int size() const { return static_cast<int>(modes_.size()); }
  Scalar eps() const { return eps_; }
  const VectorField<Scalar>& mode(int k) const { return modes_[k]; }
  const std::vector<VectorField<Scalar>>& mode_gradient(int k) const { return gradients_[k]; }
  const std::vector<ModeNorms<Scalar>>& mode_norms() const { return norms_; }
  const Moment& second_moment(Eigen::Index i) const { return second_moment_[i]; }

  /// sum_k (|f_k|_{W^{1,inf}} + |f_k|_{H1})
  Scalar summability() const { return summability_; }
  /// sum_k |f_k|_{L2}^2, unscaled
  Scalar l2_energy() const { return l2_energy_; }
  /// eps^2 sum_k |f_k|_{L2}^2: the noise input in the L2 energy balance
  Scalar forcing_rate() const { return eps_ * eps_ * l2_energy_; }

  /// Same modes at another intensity.
  NoiseBasis with_eps(Scalar eps) const {
    if (eps < 0 || eps > 1) throw std::invalid_argument("noise intensity must lie in [0, 1]");
    NoiseBasis b = *this;
    b.eps_ = eps;
    return b;
  }

  Scalar truncation_tail = 0;  // sum of the next modes' norms beyond K

 private:
  Grid<Scalar> grid_;
  std::vector<VectorField<Scalar>> modes_;
  std::vector<std::vector<VectorField<Scalar>>> gradients_;
  std::vector<ModeNorms<Scalar>> norms_;
  std::vector<Moment> second_moment_;
  Scalar eps_ = 0;
  Scalar summability_ = 0;
  Scalar l2_energy_ = 0;
};

namespace detail {

/// Dyadic offsets in [-1, 1]: 0, 1/2, -1/2, 1/4, -1/4, 3/4, -3/4, 1/8, ...
inline double dyadic_offset(int k) {
  if (k == 1) return 0.0;
  int idx = k - 2;
  for (int level = 1;; ++level) {
    const int count = 1 << level;  // odd numerators, both signs
    if (idx < count) {
      const int j = 2 * (idx / 2) + 1;
      const double v = double(j) / double(1 << level);
      return idx % 2 == 0 ? v : -v;
    }
    idx -= count;
  }
}

template <typename Scalar>
VectorField<Scalar> preset_mode(const Grid<Scalar>& grid, const NoiseSpec<Scalar>& spec, int k) {
  using std::pow;
  using std::sin;
  const Scalar amp = spec.amplitude * pow(Scalar(2), Scalar(-k));
  const int comp = k % 3;  // e_{(k mod 3) + 1}, zero-based
  if (spec.preset == NoisePreset::bumps) {
    const Scalar width = spec.support / 2;
    Point<Scalar> centre = Point<Scalar>::Zero();
    const int axis = (grid.dim() == 2 && k % 2 == 0) ? 1 : 0;
    centre(axis) = Scalar(dyadic_offset(k)) * width;
    return VectorField<Scalar>::sample(grid, [&](const Point<Scalar>& x) {
      Vec3<Scalar> v = Vec3<Scalar>::Zero();
      const Scalar s2 = (x - centre).squaredNorm() / (width * width);
      if (s2 < 1) v(comp) = amp * (1 - s2) * (1 - s2);
      return v;
    });
  }
  const Scalar n = grid.radius();
  const Scalar pi = Scalar(3.14159265358979323846264338327950288L);
  return VectorField<Scalar>::sample(grid, [&](const Point<Scalar>& x) {
    Vec3<Scalar> v = Vec3<Scalar>::Zero();
    Scalar s = sin(Scalar(k) * pi * (x(0) + n) / (2 * n));
    if (grid.dim() == 2) s *= sin(pi * (x(1) + n) / (2 * n));
    v(comp) = amp * s;
    return v;
  });
}

}  // namespace detail

/// Builds the preset basis on `grid`. K = 0 gives the deterministic equation.
template <typename Scalar>
NoiseBasis<Scalar> build_basis(const Grid<Scalar>& grid, const NoiseSpec<Scalar>& spec) {
  if (spec.modes < 0) throw std::invalid_argument("mode count must be non-negative");
  if (spec.preset == NoisePreset::bumps && !(spec.support > 0))
    throw std::invalid_argument("bump support must be positive");
  std::vector<VectorField<Scalar>> modes;
  for (int k = 1; k <= spec.modes; ++k) modes.push_back(detail::preset_mode(grid, spec, k));
  NoiseBasis<Scalar> basis(grid, std::move(modes), spec.eps);
  constexpr int tail_terms = 24;
  std::vector<VectorField<Scalar>> tail;
  for (int k = spec.modes + 1; k <= spec.modes + tail_terms; ++k) tail.push_back(detail::preset_mode(grid, spec, k));
  basis.truncation_tail = NoiseBasis<Scalar>(grid, std::move(tail), spec.eps).summability();
  return basis;
}

/// Per-mode increments Delta W_k over one step of length dt.
template <typename Scalar>
struct WienerIncrement {
  Scalar dt = 0;
  std::uint64_t step = 0;
  std::uint32_t tag = 0;  // 0 on the main path, heap index of bridge nodes below it
  std::vector<Scalar> dW;
};

/// One trajectory's Wiener path. The path is defined at a fine resolution
/// dt_fine; a step made of `substeps` fine steps sums their increments, so
/// refining dt keeps the same path.
template <typename Scalar>
class WienerPath {
 public:
  WienerPath(std::uint64_t seed, std::uint64_t trajectory, int modes, Scalar dt_fine)
      : stream_(seed, trajectory), modes_(modes), dt_fine_(dt_fine) {}

  int modes() const { return modes_; }
  Scalar dt_fine() const { return dt_fine_; }

  /// Increment over coarse step `step` made of `substeps` fine steps.
  WienerIncrement<Scalar> increment(std::uint64_t step, int substeps) const {
    using std::sqrt;
    WienerIncrement<Scalar> inc;
    inc.dt = dt_fine_ * Scalar(substeps);
    inc.dW.assign(modes_, Scalar(0));
    const Scalar sd = sqrt(dt_fine_);
    for (int s = 0; s < substeps; ++s) {
      const std::uint64_t fine = step * std::uint64_t(substeps) + std::uint64_t(s);
      for (int k = 0; k < modes_; k += 2) {
        const auto z = stream_.pair_at(fine, 0, std::uint32_t(k / 2));
        inc.dW[k] += sd * Scalar(z[0]);
        if (k + 1 < modes_) inc.dW[k + 1] += sd * Scalar(z[1]);
      }
    }
    // Finer-than-dt_fine bridges are keyed by the fine index of the step start.
    inc.step = step * std::uint64_t(substeps);
    return inc;
  }

  /// Brownian-bridge split of an increment into its two halves.
  std::pair<WienerIncrement<Scalar>, WienerIncrement<Scalar>> split(const WienerIncrement<Scalar>& parent) const {
    using std::sqrt;
    const std::uint32_t node = parent.tag == 0 ? 1u : parent.tag;
    WienerIncrement<Scalar> a, b;
    a.dt = b.dt = parent.dt / 2;
    a.step = b.step = parent.step;
    a.tag = 2 * node;
    b.tag = 2 * node + 1;
    a.dW.resize(parent.dW.size());
    b.dW.resize(parent.dW.size());
    const Scalar sd = sqrt(parent.dt / 4);
    for (std::size_t k = 0; k < parent.dW.size(); ++k) {
      a.dW[k] = parent.dW[k] / 2 + sd * Scalar(stream_.normal(parent.step, node, std::uint32_t(k)));
      b.dW[k] = parent.dW[k] - a.dW[k];
    }
    return {a, b};
  }

 private:
  NormalStream stream_;
  int modes_;
  Scalar dt_fine_;
};

/// F = eps sum_k f_k dW_k (the additive part of the noise over one step).
template <typename Scalar>
VectorField<Scalar> noise_forcing(const NoiseBasis<Scalar>& basis, std::span<const Scalar> dW) {
  if (static_cast<int>(dW.size()) != basis.size())
    throw std::invalid_argument("increment count does not match noise mode count");
  VectorField<Scalar> F(basis.grid());
  for (int k = 0; k < basis.size(); ++k)
    if (dW[k] != Scalar(0)) F.values() += (basis.eps() * dW[k]) * basis.mode(k).values();
  return F;
}

/// eps sum_k (u x f_k + f_k) dW_k
template <typename Scalar>
VectorField<Scalar> diffusion(const VectorField<Scalar>& u, const NoiseBasis<Scalar>& basis,
                              const WienerIncrement<Scalar>& dW) {
  if (u.grid() != basis.grid()) throw std::invalid_argument("field and noise basis live on different grids");
  VectorField<Scalar> F = noise_forcing<Scalar>(basis, dW.dW);
  VectorField<Scalar> out = cross(u, F);
  out += F;
  return out;
}

/// 1/2 eps^2 sum_k (u x f_k) x f_k, evaluated as 1/2 eps^2 (M u - tr(M) u)
/// with M = sum_k f_k f_k^T.
template <typename Scalar>
VectorField<Scalar> ito_correction(const VectorField<Scalar>& u, const NoiseBasis<Scalar>& basis) {
  if (u.grid() != basis.grid()) throw std::invalid_argument("field and noise basis live on different grids");
  const Scalar c = basis.eps() * basis.eps() / 2;
  VectorField<Scalar> out(u.grid());
  if (basis.size() == 0 || c == Scalar(0)) return out;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const auto& M = basis.second_moment(i);
    const Vec3<Scalar> ui = u.at(i);
    out.row(i) = (c * (M * ui - M.trace() * ui)).transpose();
  }
  return out;
}

/// Residual of the two algebraic cancellations behind the L2 Ito balance,
/// computed mode by mode (independently of the cached second moments):
///   | sum|u x f + f|^2 - sum|u x f|^2 - sum|f|^2 |
/// + | 2 <sum 1/2 (u x f) x f, u> + sum|u x f|^2 |
template <typename Scalar>
Scalar quadratic_variation_check(const VectorField<Scalar>& u, const NoiseBasis<Scalar>& basis) {
  const Grid<Scalar>& g = u.grid();
  Scalar with_additive = 0, cross_only = 0, additive = 0, correction = 0;
  for (int k = 0; k < basis.size(); ++k) {
    const auto& f = basis.mode(k);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const Scalar w = g.weight(i);
      const Vec3<Scalar> fi = f.at(i), ui = u.at(i);
      const Vec3<Scalar> uf = ui.cross(fi);
      with_additive += w * (uf + fi).squaredNorm();
      cross_only += w * uf.squaredNorm();
      additive += w * fi.squaredNorm();
      correction += w * triple(ui, fi).dot(ui);
    }
  }
  using std::abs;
  return abs(with_additive - cross_only - additive) + abs(correction + cross_only);
}

}  // namespace llb
