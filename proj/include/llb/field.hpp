#pragma once

#include "llb/grid.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace llb {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// R^3-valued grid function, one row per node.
template <typename Scalar>
class VectorField {
 public:
  using Values = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

  VectorField() = default;
  explicit VectorField(const Grid<Scalar>& grid) : grid_(grid), values_(Values::Zero(grid.size(), 3)) {}
  VectorField(const Grid<Scalar>& grid, Values values) : grid_(grid), values_(std::move(values)) {
    if (values_.rows() != grid_.size())
      throw std::invalid_argument("field length does not match grid point count");
  }

  /// Samples f(x) -> Vec3 at every node.
  template <typename F>
  static VectorField sample(const Grid<Scalar>& grid, F&& f) {
    VectorField out(grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) out.values_.row(i) = f(grid.coord(i)).transpose();
    return out;
  }

  const Grid<Scalar>& grid() const { return grid_; }
  Eigen::Index size() const { return values_.rows(); }
  Values& values() { return values_; }
  const Values& values() const { return values_; }

  Vec3<Scalar> at(Eigen::Index i) const { return values_.row(i).transpose(); }
  auto row(Eigen::Index i) { return values_.row(i); }
  auto row(Eigen::Index i) const { return values_.row(i); }

  bool all_finite() const { return values_.allFinite(); }

  void zero_boundary() {
    for (Eigen::Index i = 0; i < size(); ++i)
      if (grid_.is_boundary(i)) values_.row(i).setZero();
  }

  VectorField& operator+=(const VectorField& o) {
    require_same_grid(o);
    values_ += o.values_;
    return *this;
  }
  VectorField& operator-=(const VectorField& o) {
    require_same_grid(o);
    values_ -= o.values_;
    return *this;
  }
  VectorField& operator*=(Scalar s) {
    values_ *= s;
    return *this;
  }
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(Scalar s, VectorField a) { return a *= s; }

  void require_same_grid(const VectorField& o) const {
    if (grid_ != o.grid_) throw std::invalid_argument("fields live on different grids");
  }

 private:
  Grid<Scalar> grid_;
  Values values_;
};

template <typename Scalar>
Vec3<Scalar> cross(const Vec3<Scalar>& a, const Vec3<Scalar>& b) {
  return a.cross(b);
}

/// (u x f) x f = (u . f) f - |f|^2 u
template <typename Scalar>
Vec3<Scalar> triple(const Vec3<Scalar>& u, const Vec3<Scalar>& f) {
  return u.cross(f).cross(f);
}

template <typename Scalar>
VectorField<Scalar> cross(const VectorField<Scalar>& a, const VectorField<Scalar>& b) {
  a.require_same_grid(b);
  VectorField<Scalar> out(a.grid());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out.row(i) = a.row(i).cross(b.row(i));
  return out;
}

/// Pointwise multiplication by a scalar profile evaluated at each node.
template <typename Scalar, typename Profile>
VectorField<Scalar> apply_cutoff(const VectorField<Scalar>& field, const Profile& profile) {
  VectorField<Scalar> out(field.grid());
  for (Eigen::Index i = 0; i < field.size(); ++i)
    out.row(i) = profile(field.grid().coord(i)) * field.row(i);
  return out;
}

/// Zero extension of `field` onto the larger nested grid `outer`.
template <typename Scalar>
VectorField<Scalar> embed(const VectorField<Scalar>& field, const Grid<Scalar>& outer) {
  const Grid<Scalar>& inner = field.grid();
  const Eigen::Index off = nested_offset(inner, outer);
  VectorField<Scalar> out(outer);
  const Eigen::Index n = inner.points_per_axis();
  if (inner.dim() == 1) {
    out.values().middleRows(off, n) = field.values();
  } else {
    for (Eigen::Index j = 0; j < n; ++j)
      out.values().middleRows(outer.index(off, off + j), n) = field.values().middleRows(inner.index(0, j), n);
  }
  return out;
}

/// Restriction of `field` to the nested sub-grid `inner`.
template <typename Scalar>
VectorField<Scalar> restrict_to(const VectorField<Scalar>& field, const Grid<Scalar>& inner) {
  const Grid<Scalar>& outer = field.grid();
  const Eigen::Index off = nested_offset(inner, outer);
  VectorField<Scalar> out(inner);
  const Eigen::Index n = inner.points_per_axis();
  if (inner.dim() == 1) {
    out.values() = field.values().middleRows(off, n);
  } else {
    for (Eigen::Index j = 0; j < n; ++j)
      out.values().middleRows(inner.index(0, j), n) = field.values().middleRows(outer.index(off, off + j), n);
  }
  return out;
}

/// Five-point (three-point in 1-D) Laplacian. Boundary nodes hold the
/// Dirichlet data and are not unknowns, so the output is zero there.
template <typename Scalar>
VectorField<Scalar> laplacian(const VectorField<Scalar>& u) {
  const Grid<Scalar>& g = u.grid();
  const Scalar inv_h2 = Scalar(1) / (g.spacing() * g.spacing());
  VectorField<Scalar> out(g);
  const auto& v = u.values();
  auto& w = out.values();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (g.is_boundary(i)) continue;
    for (int a = 0; a < g.dim(); ++a) {
      const Eigen::Index s = g.stride(a);
      w.row(i) += (v.row(i + s) - Scalar(2) * v.row(i) + v.row(i - s)) * inv_h2;
    }
  }
  return out;
}

/// Per-axis derivatives: central differences in the interior, one-sided
/// first-order differences on the faces normal to the axis.
template <typename Scalar>
std::vector<VectorField<Scalar>> gradient(const VectorField<Scalar>& u) {
  const Grid<Scalar>& g = u.grid();
  const Scalar h = g.spacing();
  std::vector<VectorField<Scalar>> out;
  out.reserve(g.dim());
  const auto& v = u.values();
  const Eigen::Index last = g.points_per_axis() - 1;
  for (int a = 0; a < g.dim(); ++a) {
    VectorField<Scalar> d(g);
    const Eigen::Index s = g.stride(a);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const Eigen::Index k = g.axis_index(i, a);
      if (k == 0)
        d.row(i) = (v.row(i + s) - v.row(i)) / h;
      else if (k == last)
        d.row(i) = (v.row(i) - v.row(i - s)) / h;
      else
        d.row(i) = (v.row(i + s) - v.row(i - s)) / (Scalar(2) * h);
    }
    out.push_back(std::move(d));
  }
  return out;
}

/// Trapezoid-rule L^2 inner product.
template <typename Scalar>
Scalar inner(const VectorField<Scalar>& a, const VectorField<Scalar>& b) {
  a.require_same_grid(b);
  Scalar s = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += a.grid().weight(i) * a.row(i).dot(b.row(i));
  return s;
}

template <typename Scalar>
Scalar l2_squared(const VectorField<Scalar>& a) {
  return inner(a, a);
}

/// Squared L^2 norm of the gradient, sum over axes.
template <typename Scalar>
Scalar grad_squared(const std::vector<VectorField<Scalar>>& grad) {
  Scalar s = 0;
  for (const auto& d : grad) s += l2_squared(d);
  return s;
}

/// Norms and functionals monitored along trajectories. Squared norms except
/// `l4` (the fourth power) and `linf`.
template <typename Scalar>
struct NormReport {
  Scalar l2 = 0;            // |u|_{L2}^2
  Scalar grad = 0;          // |grad u|_{L2}^2
  Scalar h1 = 0;            // l2 + grad
  Scalar h2 = 0;            // h1 + |lap u|_{L2}^2
  Scalar l4 = 0;            // |u|_{L4}^4
  Scalar linf = 0;
  Scalar cross_energy = 0;  // int |u|^2 |grad u|^2
  Scalar dirichlet = 0;     // -<lap u, u>, the form the scheme dissipates
  Scalar l6 = 0;            // |u|_{L6}^6
};

template <typename Scalar>
NormReport<Scalar> norms(const VectorField<Scalar>& u) {
  const Grid<Scalar>& g = u.grid();
  const auto lap = laplacian(u);
  const auto grad = gradient(u);
  NormReport<Scalar> r;
  Scalar lap2 = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Scalar w = g.weight(i);
    const Scalar m2 = u.row(i).squaredNorm();
    Scalar g2 = 0;
    for (const auto& d : grad) g2 += d.row(i).squaredNorm();
    r.l2 += w * m2;
    r.grad += w * g2;
    lap2 += w * lap.row(i).squaredNorm();
    r.l4 += w * m2 * m2;
    r.l6 += w * m2 * m2 * m2;
    r.cross_energy += w * m2 * g2;
    r.dirichlet -= w * lap.row(i).dot(u.row(i));
    using std::sqrt;
    r.linf = std::max(r.linf, sqrt(m2));
  }
  r.h1 = r.l2 + r.grad;
  r.h2 = r.h1 + lap2;
  return r;
}

enum class TailOrder { L2, H1 };

namespace detail {
template <typename Scalar>
Scalar tail_sum(const VectorField<Scalar>& u, const std::vector<VectorField<Scalar>>* grad, Scalar m) {
  const Grid<Scalar>& g = u.grid();
  Scalar s = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (g.coord(i).norm() < m) continue;
    Scalar e = u.row(i).squaredNorm();
    if (grad)
      for (const auto& d : *grad) e += d.row(i).squaredNorm();
    s += g.weight(i) * e;
  }
  return s;
}
}  // namespace detail

/// Quadrature of |u|^2 (plus |grad u|^2 for H1) over the nodes with |x| >= m.
template <typename Scalar>
Scalar tail_mass(const VectorField<Scalar>& u, Scalar m, TailOrder order) {
  if (m < 0 || m >= u.grid().radius())
    throw std::invalid_argument("tail radius must lie in [0, grid radius)");
  if (order == TailOrder::L2) return detail::tail_sum<Scalar>(u, nullptr, m);
  const auto grad = gradient(u);
  return detail::tail_sum(u, &grad, m);
}

/// Tail masses over a ladder of radii; entries with m >= grid radius are 0.
template <typename Scalar>
std::vector<Scalar> tail_masses(const VectorField<Scalar>& u, const std::vector<Scalar>& ladder, TailOrder order) {
  std::vector<VectorField<Scalar>> grad;
  if (order == TailOrder::H1) grad = gradient(u);
  std::vector<Scalar> out;
  out.reserve(ladder.size());
  for (Scalar m : ladder) {
    if (m >= u.grid().radius())
      out.push_back(Scalar(0));
    else
      out.push_back(detail::tail_sum(u, order == TailOrder::H1 ? &grad : nullptr, m < 0 ? Scalar(0) : m));
  }
  return out;
}

}  // namespace llb
