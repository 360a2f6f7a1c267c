#include "llb/noise.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace llb;
using llb::testing::Gen;

TEST_CASE("philox known answers") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("wiener increments: moments, reproducibility, independence") {
  const double dt = 1e-3;
  const int K = 4;
  const WienerPath<double> path(7, 3, K, dt);
  const int N = 100000;
  std::vector<double> sum(K, 0), sq(K, 0);
  double cross01 = 0;
  for (int s = 0; s < N; ++s) {
    const auto inc = path.increment(s, 1);
    for (int k = 0; k < K; ++k) {
      sum[k] += inc.dW[k];
      sq[k] += inc.dW[k] * inc.dW[k];
    }
    cross01 += inc.dW[0] * inc.dW[3];
  }
  for (int k = 0; k < K; ++k) {
    const double mean = sum[k] / N;
    const double var = sq[k] / N;
    CHECK(std::abs(mean) <= 3 * std::sqrt(dt / N));
    CHECK(std::abs(var - dt) <= 3 * dt * std::sqrt(2.0 / N));
  }
  CHECK(std::abs(cross01 / N / dt) <= 0.02);

  const WienerPath<double> again(7, 3, K, dt), other(7, 4, K, dt);
  CHECK(again.increment(123, 1).dW == path.increment(123, 1).dW);
  CHECK(other.increment(123, 1).dW != path.increment(123, 1).dW);
}

TEST_CASE("coarse increments are sums of fine ones") {
  const WienerPath<double> path(1, 0, 5, 0.25e-3);
  for (std::uint64_t step = 0; step < 20; ++step) {
    const auto coarse = path.increment(step, 4);
    CHECK(coarse.dt == doctest::Approx(1e-3));
    std::vector<double> fine(5, 0);
    for (int s = 0; s < 4; ++s) {
      const auto f = path.increment(step * 4 + s, 1);
      for (int k = 0; k < 5; ++k) fine[k] += f.dW[k];
    }
    for (int k = 0; k < 5; ++k) CHECK(coarse.dW[k] == doctest::Approx(fine[k]).epsilon(1e-14));
  }
}

TEST_CASE("brownian bridge split") {
  const WienerPath<double> path(2, 0, 3, 1e-2);
  const auto parent = path.increment(5, 1);
  const auto [a, b] = path.split(parent);
  CHECK(a.dt == doctest::Approx(parent.dt / 2));
  for (int k = 0; k < 3; ++k) CHECK(a.dW[k] + b.dW[k] == doctest::Approx(parent.dW[k]).epsilon(1e-15));
  const auto [aa, ab] = path.split(a);
  CHECK(aa.tag != a.tag);
  CHECK(aa.tag != b.tag);
  // bridge midpoint variance dt / 4
  double sq = 0;
  const int N = 20000;
  for (int s = 0; s < N; ++s) {
    const auto p = path.increment(s, 1);
    const auto h = path.split(p);
    const double dev = h.first.dW[0] - p.dW[0] / 2;
    sq += dev * dev;
  }
  CHECK(sq / N == doctest::Approx(1e-2 / 4).epsilon(0.05));
}

TEST_CASE("build_basis presets") {
  const auto g = make_grid(1, 4.0, 0.05);
  NoiseSpec<double> spec;
  spec.modes = 0;
  const auto empty = build_basis(g, spec);
  CHECK(empty.size() == 0);
  CHECK(empty.summability() == 0);

  for (auto preset : {NoisePreset::bumps, NoisePreset::fourier}) {
    spec.preset = preset;
    spec.modes = 8;
    const auto b = build_basis(g, spec);
    REQUIRE(b.size() == 8);
    // independent recomputation of S from norm reports and gradients
    double S = 0, prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 8; ++k) {
      const auto r = norms(b.mode(k));
      const auto grad = gradient(b.mode(k));
      double gsup = 0;
      for (Eigen::Index i = 0; i < g.size(); ++i) gsup = std::max(gsup, grad[0].row(i).norm());
      const double term = r.linf + gsup + std::sqrt(r.h1);  // W^{1,inf} + H1
      S += term;
      CHECK(term <= prev * (1 + 1e-12));
      prev = term;
    }
    CHECK(b.summability() == doctest::Approx(S).epsilon(1e-12));
    CHECK(std::isfinite(b.truncation_tail));
    CHECK(b.truncation_tail < b.summability() / 50);
  }
}

TEST_CASE("bump modes have compact support") {
  const auto g = make_grid(1, 8.0, 0.05);
  NoiseSpec<double> spec;
  spec.support = 1.0;
  const auto b = build_basis(g, spec);
  for (int k = 0; k < b.size(); ++k)
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (std::abs(g.coord(i)(0)) > spec.support) CHECK(b.mode(k).row(i).isZero(0));
}

TEST_CASE("zero intensity keeps metadata and kills noise") {
  const auto g = make_grid(1, 4.0, 0.1);
  NoiseSpec<double> spec;
  spec.modes = 8;
  spec.eps = 0;
  const auto b = build_basis(g, spec);
  CHECK(b.size() == 8);
  CHECK(b.summability() > 0);
  Gen gen(20);
  const auto u = gen.rough_field(g);
  WienerIncrement<double> inc;
  for (int k = 0; k < 8; ++k) inc.dW.push_back(gen.normal());
  CHECK(diffusion(u, b, inc).values().isZero(0));
  CHECK(ito_correction(u, b).values().isZero(0));
  CHECK(b.forcing_rate() == 0);
}

TEST_CASE("ito correction") {
  const auto g = make_grid(1, 2.0, 0.25);
  const double eps = 0.6;
  // single unit mode perpendicular to u
  const auto f = llb::testing::constant_field(g, {0, 1, 0});
  const NoiseBasis<double> b(g, {f}, eps);
  const auto u = VectorField<double>::sample(g, [](const Point<double>& x) { return Vec3<double>(x(0), 0, 2 - x(0)); });
  const auto c = ito_correction(u, b);
  for (Eigen::Index i = 0; i < g.size(); ++i)
    for (int a = 0; a < 3; ++a) CHECK(c.row(i)(a) == doctest::Approx(-0.5 * eps * eps * u.row(i)(a)).epsilon(1e-14));

  const NoiseBasis<double> par(g, {u}, eps);
  CHECK(ito_correction(u, par).values().cwiseAbs().maxCoeff() <= 1e-14);

  Gen gen(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = gen.rough_field(g);
    std::vector<VectorField<double>> modes;
    for (int k = 0; k < 3; ++k) modes.push_back(gen.rough_field(g));
    const NoiseBasis<double> rb(g, modes, eps);
    double rhs = 0;
    for (const auto& m : modes) rhs += l2_squared(cross(v, m));
    rhs *= -0.5 * eps * eps;
    CHECK(inner(ito_correction(v, rb), v) == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("diffusion") {
  const auto g = make_grid(1, 2.0, 0.25);
  Gen gen(22);
  std::vector<VectorField<double>> modes{gen.rough_field(g), gen.rough_field(g)};
  const NoiseBasis<double> b(g, modes, 0.8);
  const auto u = gen.rough_field(g);

  WienerIncrement<double> zero;
  zero.dW = {0, 0};
  CHECK(diffusion(u, b, zero).values().isZero(0));

  WienerIncrement<double> inc;
  inc.dW = {0.3, -1.2};
  const auto add = diffusion(VectorField<double>(g), b, inc);
  const auto expect = 0.8 * (0.3 * modes[0] + (-1.2) * modes[1]);
  CHECK((add.values() - expect.values()).cwiseAbs().maxCoeff() <= 1e-14);

  const NoiseBasis<double> one(g, {modes[0]}, 1.0);
  WienerIncrement<double> unit;
  unit.dW = {1.0};
  const auto d = diffusion(u, one, unit);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const Vec3<double> hand = u.at(i).cross(modes[0].at(i)) + modes[0].at(i);
    CHECK((d.at(i) - hand).norm() <= 1e-14 * (1 + hand.norm()));
  }

  WienerIncrement<double> wrong;
  wrong.dW = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(diffusion(u, b, wrong), std::invalid_argument);
  CHECK_THROWS_AS(diffusion(gen.rough_field(make_grid(1, 2.0, 0.5)), b, inc), std::invalid_argument);
  CHECK_THROWS_AS(NoiseBasis<double>(g, modes, 1.5), std::invalid_argument);
}

TEST_CASE("intensity scaling") {
  const auto g = make_grid(1, 2.0, 0.25);
  Gen gen(23);
  const NoiseBasis<double> one(g, {gen.rough_field(g), gen.rough_field(g)}, 1.0);
  const auto u = gen.rough_field(g);
  WienerIncrement<double> inc;
  inc.dW = {0.7, -0.4};
  for (double eps : {0.0, 0.25, 0.9}) {
    const auto b = one.with_eps(eps);
    const auto d1 = diffusion(u, one, inc), de = diffusion(u, b, inc);
    CHECK((de.values() - eps * d1.values()).cwiseAbs().maxCoeff() <= 1e-14 * (1 + d1.values().cwiseAbs().maxCoeff()));
    const auto c1 = ito_correction(u, one), ce = ito_correction(u, b);
    CHECK((ce.values() - eps * eps * c1.values()).cwiseAbs().maxCoeff() <= 1e-14 * (1 + c1.values().cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("quadratic variation cancellation") {
  Gen gen(24);
  const auto g = make_grid(1, 2.0, 0.25);
  const NoiseBasis<double> b(g, {gen.rough_field(g), gen.rough_field(g)}, 1.0);
  CHECK(quadratic_variation_check(VectorField<double>(g), b) == 0);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<VectorField<double>> modes;
    const int K = 1 + i % 4;
    for (int k = 0; k < K; ++k) modes.push_back(gen.rough_field(g, gen.uniform(0.1, 3)));
    const NoiseBasis<double> rb(g, modes, 1.0);
    const auto u = gen.rough_field(g, gen.uniform(0.1, 3));
    const double scale = 1 + norms(u).h1 * rb.summability() * rb.summability();
    worst = std::max(worst, quadratic_variation_check(u, rb) / scale);
  }
  MESSAGE("max relative quadratic-variation residual: " << worst);
  CHECK(worst <= 1e-10);
}
