#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace llb {

template <typename Scalar>
using Point = Eigen::Matrix<Scalar, 2, 1>;

/// Uniform tensor grid on the cube [-n, n]^d (d = 1 or 2).
///
/// Nodes are stored x-fastest: index = i + N * j. In one dimension the
/// second coordinate of every point is zero, so Euclidean norms of points
/// are meaningful in both cases. Nodes with any coordinate on the cube face
/// carry the homogeneous Dirichlet condition.
template <typename Scalar>
class Grid {
 public:
  Grid() = default;

  int dim() const { return dim_; }
  Scalar radius() const { return radius_; }
  Scalar spacing() const { return spacing_; }
  Eigen::Index points_per_axis() const { return per_axis_; }
  Eigen::Index size() const { return dim_ == 1 ? per_axis_ : per_axis_ * per_axis_; }

  Eigen::Index axis_index(Eigen::Index idx, int axis) const {
    return axis == 0 ? idx % per_axis_ : idx / per_axis_;
  }
  Eigen::Index index(Eigen::Index i, Eigen::Index j = 0) const { return i + per_axis_ * j; }
  Eigen::Index stride(int axis) const { return axis == 0 ? 1 : per_axis_; }

  Scalar axis_coord(Eigen::Index i) const {
    return -radius_ + static_cast<Scalar>(i) * spacing_;
  }

  Point<Scalar> coord(Eigen::Index idx) const {
    Point<Scalar> x = Point<Scalar>::Zero();
    x(0) = axis_coord(axis_index(idx, 0));
    if (dim_ == 2) x(1) = axis_coord(axis_index(idx, 1));
    return x;
  }

  bool on_axis_boundary(Eigen::Index idx, int axis) const {
    const auto i = axis_index(idx, axis);
    return i == 0 || i == per_axis_ - 1;
  }

  bool is_boundary(Eigen::Index idx) const {
    for (int a = 0; a < dim_; ++a)
      if (on_axis_boundary(idx, a)) return true;
    return false;
  }

  /// Composite trapezoid weight of a node (product rule in 2-D).
  Scalar weight(Eigen::Index idx) const {
    Scalar w = 1;
    for (int a = 0; a < dim_; ++a) {
      w *= spacing_;
      if (on_axis_boundary(idx, a)) w *= Scalar(0.5);
    }
    return w;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.per_axis_ == b.per_axis_ && a.radius_ == b.radius_ &&
           a.spacing_ == b.spacing_;
  }
  friend bool operator!=(const Grid& a, const Grid& b) { return !(a == b); }

  template <typename S>
  friend Grid<S> make_grid(int d, S n, S h);

 private:
  int dim_ = 1;
  Scalar radius_ = 0;
  Scalar spacing_ = 0;
  Eigen::Index per_axis_ = 0;
};

/// Builds the grid covering [-n, n]^d with spacing h. h must divide 2n.
template <typename Scalar>
Grid<Scalar> make_grid(int d, Scalar n, Scalar h) {
  using std::abs;
  using std::round;
  if (d != 1 && d != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
  if (!(n > 0)) throw std::invalid_argument("grid radius must be positive");
  if (!(h > 0)) throw std::invalid_argument("grid spacing must be positive");
  const Scalar cells = Scalar(2) * n / h;
  const Scalar rounded = round(cells);
  if (rounded < 2 || abs(cells - rounded) > Scalar(1e-9) * (Scalar(1) + rounded))
    throw std::invalid_argument("grid spacing " + std::to_string(double(h)) +
                                " does not divide 2n = " + std::to_string(double(2 * n)));
  Grid<Scalar> g;
  g.dim_ = d;
  g.radius_ = n;
  g.per_axis_ = static_cast<Eigen::Index>(rounded) + 1;
  g.spacing_ = Scalar(2) * n / rounded;
  return g;
}

/// Offset (in nodes per axis) of `inner` inside `outer`; throws unless the
/// grids share spacing and dimension and their nodes coincide.
template <typename Scalar>
Eigen::Index nested_offset(const Grid<Scalar>& inner, const Grid<Scalar>& outer) {
  using std::abs;
  using std::round;
  if (inner.dim() != outer.dim()) throw std::invalid_argument("grids differ in dimension");
  if (abs(inner.spacing() - outer.spacing()) > Scalar(1e-12) * outer.spacing())
    throw std::invalid_argument("grids are not nested: spacing differs");
  if (inner.radius() > outer.radius())
    throw std::invalid_argument("grids are not nested: inner radius exceeds outer");
  const Scalar shift = (outer.radius() - inner.radius()) / outer.spacing();
  if (abs(shift - round(shift)) > Scalar(1e-9) * (Scalar(1) + shift))
    throw std::invalid_argument("grids are not nested: nodes do not align");
  return static_cast<Eigen::Index>(round(shift));
}

/// Smooth cut-off profile: theta(x / scale), or its complement
/// phi(x / scale) = 1 - theta(x / scale).
///
/// theta is 1 on |y| <= 1/2, 0 on |y| >= 3/4, and bridged in between by the
/// smoothstep s(t) = t^2 (3 - 2t), which is C^1 at both junctions. The
/// largest slope of theta is 6, so |grad theta_n| <= 6 / n.
template <typename Scalar>
struct CutoffProfile {
  static constexpr double inner = 0.5;
  static constexpr double outer = 0.75;

  Scalar scale = 1;
  bool complement = false;

  static Scalar bridge(Scalar r) {
    if (r <= Scalar(inner)) return Scalar(1);
    if (r >= Scalar(outer)) return Scalar(0);
    const Scalar t = (r - Scalar(inner)) / Scalar(outer - inner);
    return Scalar(1) - t * t * (Scalar(3) - Scalar(2) * t);
  }

  Scalar operator()(const Point<Scalar>& x) const {
    const Scalar th = bridge(x.norm() / scale);
    return complement ? Scalar(1) - th : th;
  }
};

/// theta_n
template <typename Scalar>
CutoffProfile<Scalar> theta_profile(Scalar scale) {
  if (!(scale > 0)) throw std::invalid_argument("cut-off scale must be positive");
  return {scale, false};
}

/// phi_m = 1 - theta_m
template <typename Scalar>
CutoffProfile<Scalar> phi_profile(Scalar scale) {
  if (!(scale > 0)) throw std::invalid_argument("cut-off scale must be positive");
  return {scale, true};
}

template <typename Scalar>
Scalar theta(const Point<Scalar>& x, Scalar scale) {
  return theta_profile(scale)(x);
}

}  // namespace llb
