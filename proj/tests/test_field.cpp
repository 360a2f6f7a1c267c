#include "llb/field.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace llb;
using llb::testing::Gen;

namespace {

// sin(pi (x + n) / 2n) e_1 and its exact Laplacian and derivative.
double mode(double x, double n) { return std::sin(std::numbers::pi * (x + n) / (2 * n)); }
double mode_dx(double x, double n) {
  const double k = std::numbers::pi / (2 * n);
  return k * std::cos(k * (x + n));
}

double laplacian_error(double h) {
  const double n = 4;
  const auto g = make_grid(1, n, h);
  const auto u = VectorField<double>::sample(g, [&](const Point<double>& x) { return Vec3<double>(mode(x(0), n), 0, 0); });
  const auto lap = laplacian(u);
  const double lam = std::pow(std::numbers::pi / (2 * n), 2);
  double err = 0;
  for (Eigen::Index i = 1; i + 1 < g.size(); ++i) err = std::max(err, std::abs(lap.row(i)(0) + lam * u.row(i)(0)));
  return err;
}

}  // namespace

TEST_CASE("cross product algebra") {
  CHECK(cross<double>(Vec3<double>(1, 0, 0), Vec3<double>(0, 1, 0)) == Vec3<double>(0, 0, 1));
  Gen gen(10);
  for (int i = 0; i < 1000; ++i) {
    const auto a = gen.vec(), b = gen.vec();
    CHECK(cross<double>(a, a).isZero(0));
    CHECK(std::abs(cross<double>(a, b).dot(a)) <= 1e-14 * (1 + a.squaredNorm() * b.norm()));
  }
}

TEST_CASE("triple product") {
  const Vec3<double> e1(1, 0, 0), e2(0, 1, 0);
  CHECK(triple<double>(e1, e2) == Vec3<double>(-1, 0, 0));
  CHECK(triple<double>(e1, Vec3<double>(3, 0, 0)).isZero(0));
  Gen gen(11);
  for (int i = 0; i < 1000; ++i) {
    const auto u = gen.vec(), f = gen.vec();
    const double lhs = triple<double>(u, f).dot(u);
    const double rhs = -u.cross(f).squaredNorm();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12).scale(1 + std::abs(rhs)));
  }
}

TEST_CASE("field cross is pointwise orthogonal") {
  Gen gen(12);
  const auto g = make_grid(2, 2.0, 0.25);
  const auto a = gen.rough_field(g), b = gen.rough_field(g);
  const auto c = cross(a, b);
  for (Eigen::Index i = 0; i < g.size(); ++i)
    CHECK(std::abs(c.row(i).dot(a.row(i))) <= 1e-14 * (1 + a.row(i).squaredNorm() * b.row(i).norm()));
}

TEST_CASE("laplacian on simple fields") {
  const auto g = make_grid(1, 4.0, 0.1);
  const auto c = laplacian(llb::testing::constant_field(g, {1, 2, 3}));
  CHECK(c.values().cwiseAbs().maxCoeff() <= 1e-10);
  const auto lin = VectorField<double>::sample(g, [](const Point<double>& x) { return Vec3<double>(1 + 2 * x(0), -x(0), 3); });
  CHECK(laplacian(lin).values().cwiseAbs().maxCoeff() <= 1e-9);
  // boundary output is zero by construction
  CHECK(laplacian(Gen(13).rough_field(g)).row(0).isZero(0));
}

TEST_CASE("laplacian eigenfunction error is second order") {
  const double e1 = laplacian_error(0.2), e2 = laplacian_error(0.1), e3 = laplacian_error(0.05);
  const double slope = std::log(e1 / e3) / std::log(4.0);
  CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
  CHECK(e2 < e1);
  CHECK(e1 <= 0.2 * 0.2 * std::pow(std::numbers::pi / 8, 4));  // h^2 lambda^2 / 12 bound, with room
}

TEST_CASE("gradient of simple fields") {
  const auto g = make_grid(1, 4.0, 0.05);
  const auto lin = VectorField<double>::sample(g, [](const Point<double>& x) { return Vec3<double>(2 * x(0), -x(0), 0); });
  const auto d = gradient(lin);
  REQUIRE(d.size() == 1);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    CHECK(d[0].row(i)(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d[0].row(i)(1) == doctest::Approx(-1.0).epsilon(1e-12));
  }
  CHECK(gradient(VectorField<double>(g))[0].values().isZero(0));

  std::vector<double> errs;
  for (double h : {0.1, 0.05}) {
    const auto gh = make_grid(1, 4.0, h);
    const auto u = VectorField<double>::sample(gh, [&](const Point<double>& x) { return Vec3<double>(mode(x(0), 4), 0, 0); });
    const auto du = gradient(u)[0];
    double e = 0;
    for (Eigen::Index i = 1; i + 1 < gh.size(); ++i) e = std::max(e, std::abs(du.row(i)(0) - mode_dx(gh.coord(i)(0), 4)));
    errs.push_back(e);
  }
  CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("norms of reference fields") {
  const auto g = make_grid(1, 4.0, 0.05);
  const auto z = norms(VectorField<double>(g));
  CHECK(z.l2 == 0);
  CHECK(z.h1 == 0);
  CHECK(z.h2 == 0);
  CHECK(z.l4 == 0);
  CHECK(z.linf == 0);
  CHECK(z.cross_energy == 0);

  const double c = 0.7;
  const auto k = norms(llb::testing::constant_field(g, {c, 0, 0}));
  CHECK(k.l2 == doctest::Approx(2 * 4.0 * c * c).epsilon(1e-12));
  CHECK(k.l4 == doctest::Approx(2 * 4.0 * std::pow(c, 4)).epsilon(1e-12));

  std::vector<double> l2;
  for (double h : {0.1, 0.05, 0.01}) l2.push_back(norms(llb::testing::first_mode(make_grid(1, 4.0, h))).l2);
  for (double v : l2) CHECK(v == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("norm report ordering on random fields") {
  Gen gen(14);
  for (int d : {1, 2}) {
    const auto g = make_grid(d, 2.0, 0.125);
    for (int i = 0; i < 50; ++i) {
      const auto u = i % 2 ? gen.rough_field(g) : gen.smooth_field(g, 2.0);
      const auto r = norms(u);
      CHECK(r.l2 >= 0);
      CHECK(r.h1 >= r.l2);
      CHECK(r.h2 >= r.h1);
      CHECK(r.l4 >= 0);
      CHECK(r.cross_energy >= 0);
    }
  }
}

TEST_CASE("tail mass") {
  const auto g = make_grid(1, 4.0, 0.05);
  const auto bump = VectorField<double>::sample(g, [](const Point<double>& x) {
    const double s = std::abs(x(0));
    return Vec3<double>(s < 1 ? (1 - s * s) : 0, 0, 0);
  });
  CHECK(tail_mass(bump, 2.0, TailOrder::L2) == 0);
  CHECK(tail_mass(bump, 2.0, TailOrder::H1) == 0);

  Gen gen(15);
  const auto u = gen.smooth_field(g, 1.0);
  const auto r = norms(u);
  CHECK(tail_mass(u, 0.0, TailOrder::L2) == doctest::Approx(r.l2).epsilon(1e-14));
  CHECK(tail_mass(u, 0.0, TailOrder::H1) == doctest::Approx(r.h1).epsilon(1e-14));
  CHECK_THROWS_AS(tail_mass(u, 4.0, TailOrder::L2), std::invalid_argument);
  CHECK_THROWS_AS(tail_mass(u, -1.0, TailOrder::L2), std::invalid_argument);

  const auto ladder = tail_masses(u, std::vector<double>{0, 1, 2, 3, 5}, TailOrder::H1);
  for (std::size_t i = 1; i < ladder.size(); ++i) CHECK(ladder[i] <= ladder[i - 1]);
  CHECK(ladder.back() == 0);
}

TEST_CASE("gaussian tail against the closed form") {
  // int_{|x| > 2} e^{-2 x^2} dx = sqrt(pi / 2) erfc(2 sqrt 2)
  const double exact = std::sqrt(std::numbers::pi / 2) * std::erfc(2 * std::sqrt(2.0));
  const auto g = make_grid(1, 4.0, 0.001);
  const auto u = VectorField<double>::sample(g, [](const Point<double>& x) { return Vec3<double>(std::exp(-x(0) * x(0)), 0, 0); });
  CHECK(tail_mass(u, 2.0, TailOrder::L2) == doctest::Approx(exact).epsilon(5e-3));
}

TEST_CASE("discrete integration by parts is first order") {
  std::vector<double> ratio;
  const std::vector<double> hs{0.1, 0.05, 0.025};
  for (double h : hs) {
    Gen local(16);
    const auto g = make_grid(1, 4.0, h);
    const auto u = local.smooth_field(g, 1.0), v = local.smooth_field(g, 1.0);
    const auto du = gradient(u), dv = gradient(v);
    double grad_inner = 0;
    for (std::size_t a = 0; a < du.size(); ++a) grad_inner += inner(du[a], dv[a]);
    ratio.push_back(std::abs(inner(laplacian(u), v) + grad_inner) / h);
  }
  const double C = ratio.front() * 1.5 + 1e-12;
  for (double r : ratio) CHECK(r <= C);
}

TEST_CASE("one-dimensional embedding constants") {
  Gen gen(17);
  const auto g = make_grid(1, 4.0, 0.05);
  double gn = 0, l4 = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto u = gen.smooth_field(g, gen.uniform(0.1, 3.0), 6);
    const auto r = norms(u);
    if (r.l2 == 0) continue;
    gn = std::max(gn, r.linf / std::pow(r.l2 * r.grad, 0.25));
    l4 = std::max(l4, std::pow(r.l4, 0.25) / (std::pow(r.grad, 1.0 / 8) * std::pow(r.l2, 3.0 / 8)));
  }
  // continuum constants for H^1_0 functions on an interval are 1
  CHECK(gn <= 1.05);
  CHECK(l4 <= 1.05);
  CHECK(gn > 0.5);
}
