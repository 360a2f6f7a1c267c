#pragma once

#include "llb/field.hpp"
#include "llb/random.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace llb::testing {

/// Hand-rolled generator over a Philox stream: every draw advances a counter.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : stream_(seed, 0x7e57) {}

  double normal() { return stream_.normal(next_++, 0, 0); }
  double uniform(double a, double b) { return a + (b - a) * 0.5 * (1 + std::erf(normal() / std::sqrt(2.0))); }
  Vec3<double> vec(double scale = 1) { return Vec3<double>(normal(), normal(), normal()) * scale; }

  /// Smooth Dirichlet field: a few random sine modes per component.
  VectorField<double> smooth_field(const Grid<double>& g, double amplitude, int modes = 4) {
    std::vector<std::array<double, 3>> coef(modes);
    std::vector<int> waves(modes);
    for (int j = 0; j < modes; ++j) {
      waves[j] = 1 + j;
      for (auto& c : coef[j]) c = amplitude * normal() / (1 + j);
    }
    const double n = g.radius();
    return VectorField<double>::sample(g, [&](const Point<double>& x) {
      Vec3<double> v = Vec3<double>::Zero();
      for (int j = 0; j < modes; ++j) {
        double s = std::sin(waves[j] * std::numbers::pi * (x(0) + n) / (2 * n));
        if (g.dim() == 2) s *= std::sin(std::numbers::pi * (x(1) + n) / (2 * n));
        for (int c = 0; c < 3; ++c) v(c) += coef[j][c] * s;
      }
      return v;
    });
  }

  /// Pointwise i.i.d. Gaussian field (rough, not zero on the boundary).
  VectorField<double> rough_field(const Grid<double>& g, double scale = 1) {
    return VectorField<double>::sample(g, [&](const Point<double>&) -> Vec3<double> { return vec(scale); });
  }

 private:
  NormalStream stream_;
  std::uint64_t next_ = 0;
};

inline VectorField<double> constant_field(const Grid<double>& g, const Vec3<double>& c) {
  return VectorField<double>::sample(g, [&](const Point<double>&) { return c; });
}

/// First Dirichlet sine mode on [-n, n] times e_1.
inline VectorField<double> first_mode(const Grid<double>& g, double amplitude = 1) {
  const double n = g.radius();
  return VectorField<double>::sample(g, [&](const Point<double>& x) {
    double s = std::sin(std::numbers::pi * (x(0) + n) / (2 * n));
    if (g.dim() == 2) s *= std::sin(std::numbers::pi * (x(1) + n) / (2 * n));
    return Vec3<double>(amplitude * s, 0, 0);
  });
}

}  // namespace llb::testing
