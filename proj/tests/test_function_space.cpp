#include <doctest.h>

#include "npivlab/counterexamples.hpp"
#include "npivlab/error.hpp"
#include "npivlab/function_space.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace npivlab;

TEST_CASE("make_grid: two-point Gauss-Legendre and three-point trapezoid") {
  const auto g = make_grid(2, GridRule::gauss_legendre);
  CHECK(g->nodes()[0] == doctest::Approx(0.5 - 1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-15));
  CHECK(g->nodes()[1] == doctest::Approx(0.5 + 1.0 / (2.0 * std::sqrt(3.0))).epsilon(1e-15));
  CHECK(g->weights()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g->weights()[1] == doctest::Approx(0.5).epsilon(1e-15));

  const auto t = make_grid(3, GridRule::uniform_trapezoid);
  CHECK(t->nodes()[0] == 0.0);
  CHECK(t->nodes()[1] == 0.5);
  CHECK(t->nodes()[2] == 1.0);
  CHECK(t->weights()[0] == doctest::Approx(0.25));
  CHECK(t->weights()[1] == doctest::Approx(0.5));
  CHECK(t->weights()[2] == doctest::Approx(0.25));
}

TEST_CASE("make_grid rejects fewer than two nodes") {
  CHECK_THROWS_AS(make_grid(1, GridRule::gauss_legendre), Error);
  CHECK_THROWS_AS(make_grid(0, GridRule::uniform_trapezoid), Error);
}

TEST_CASE("grid invariants for every rule") {
  for (GridRule rule : {GridRule::gauss_legendre, GridRule::uniform_trapezoid,
                        GridRule::normal_scores}) {
    for (std::size_t n : {2u, 7u, 64u, 128u, 513u}) {
      if (rule == GridRule::normal_scores && n > 512) continue;
      const auto g = make_grid(n, rule);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(g->weights()[i] > 0.0);
        CHECK(g->nodes()[i] >= 0.0);
        CHECK(g->nodes()[i] <= 1.0);
        if (i) CHECK(g->nodes()[i] > g->nodes()[i - 1]);
        sum += g->weights()[i];
      }
      CHECK(std::abs(sum - 1.0) < 1e-14);
    }
  }
}

TEST_CASE("Gauss-Legendre nodes and weights match Golub-Welsch") {
  for (int n : {5, 64, 128}) {
    const auto g = make_grid(static_cast<std::size_t>(n), GridRule::gauss_legendre);
    const auto ref = oracle::gauss_legendre(n);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(g->nodes()[i] - ref.x[i]) < 1e-13);
      CHECK(std::abs(g->weights()[i] - ref.w[i]) < 1e-13);
    }
  }
}

TEST_CASE("Gauss-Legendre exactness up to degree 2m-1") {
  for (std::size_t m : {4u, 16u, 64u}) {
    const auto g = make_grid(m, GridRule::gauss_legendre);
    for (std::size_t k = 0; k <= 2 * m - 1; ++k) {
      const auto f = GridFunction::sample(g, [&](double x) { return std::pow(x, k); });
      const double integral = inner_product(f, GridFunction::constant(g, 1.0));
      CHECK(std::abs(integral - 1.0 / static_cast<double>(k + 1)) < 1e-13);
    }
  }
  const auto g = make_grid(64, GridRule::gauss_legendre);
  const auto f = GridFunction::sample(g, [](double x) { return std::pow(x, 127); });
  CHECK(std::abs(inner_product(f, GridFunction::constant(g, 1.0)) - 1.0 / 128.0) < 1e-15);
}

TEST_CASE("inner product and norms") {
  const auto g = make_grid(32, GridRule::gauss_legendre);
  const auto one = GridFunction::constant(g, 1.0);
  const auto x = GridFunction::sample(g, [](double t) { return t; });
  CHECK(inner_product(one, one) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(inner_product(x, one) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(l2_norm(GridFunction::constant(g, 0.0)) == 0.0);
  CHECK(l2_norm(GridFunction::constant(g, -3.5)) == doctest::Approx(3.5).epsilon(1e-15));

  const auto g8 = make_grid(8, GridRule::gauss_legendre);
  const auto p3 = psi({Family::monotone, 3, 1.0}, g8);
  CHECK(std::abs(inner_product(p3, p3) - 1.0) < 1e-13);
  const auto g64 = make_grid(64, GridRule::gauss_legendre);
  CHECK(std::abs(l2_norm(psi({Family::monotone, 10, 1.0}, g64)) - 1.0) < 1e-10);
  CHECK(std::abs(l2_norm(psi({Family::nonneg, 10, 1.0}, g64)) - 1.0) < 1e-10);

  const auto t = make_grid(16, GridRule::uniform_trapezoid);
  CHECK_THROWS_AS(inner_product(one, GridFunction::constant(t, 1.0)), Error);
  try {
    (void)inner_product(one, GridFunction::constant(t, 1.0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::grid_mismatch);
  }
}

TEST_CASE("Cauchy-Schwarz and homogeneity on random functions") {
  const auto g = make_grid(40, GridRule::gauss_legendre);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(40), b(40);
    for (auto& v : a) v = nd(rng);
    for (auto& v : b) v = nd(rng);
    const GridFunction f(g, a), h(g, b);
    CHECK(std::abs(inner_product(f, h)) <= l2_norm(f) * l2_norm(h) * (1 + 1e-14));
    const double c = nd(rng);
    CHECK(l2_norm(c * f) == doctest::Approx(std::abs(c) * l2_norm(f)).epsilon(1e-13));
  }
}

TEST_CASE("GridFunction rejects non-finite values and wrong lengths") {
  const auto g = make_grid(4, GridRule::gauss_legendre);
  CHECK_THROWS_AS(GridFunction(g, {1.0, 2.0, 3.0}), Error);
  CHECK_THROWS_AS(GridFunction(g, {1.0, NAN, 3.0, 4.0}), Error);
}

TEST_CASE("derivative on uniform inspection grids") {
  const auto u = make_grid(101, GridRule::uniform_trapezoid);
  const auto c = derivative(GridFunction::constant(u, 2.0), u);
  for (double v : c.values()) CHECK(std::abs(v) < 1e-12);

  const auto sq = derivative(GridFunction::sample(u, [](double x) { return x * x; }), u);
  for (std::size_t i = 0; i < u->size(); ++i) {
    CHECK(std::abs(sq[i] - 2.0 * u->nodes()[i]) < 1e-10);
  }

  const auto g = make_grid(64, GridRule::gauss_legendre);
  const auto insp = make_grid(1001, GridRule::uniform_trapezoid);
  const auto d5 = derivative(psi({Family::monotone, 5, 1.0}, g), insp);
  for (double v : d5.values()) CHECK(v >= -1e-9);

  CHECK_THROWS_AS(derivative(GridFunction::constant(g, 1.0), make_grid(2, GridRule::uniform_trapezoid)),
                  Error);
  CHECK_THROWS_AS(derivative(GridFunction::constant(g, 1.0), g), Error);
}

TEST_CASE("sobolev norm") {
  const auto g = make_grid(64, GridRule::gauss_legendre);
  CHECK(sobolev_norm(GridFunction::constant(g, 1.0)) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(sobolev_norm(GridFunction::sample(g, [](double x) { return x; })) ==
        doctest::Approx(std::sqrt(1.0 / 3.0 + 1.0)).epsilon(1e-13));
  for (unsigned n = 1; n <= 20; ++n) {
    const auto p = psi({Family::monotone, n, 1.0}, g);
    CHECK(std::abs(sobolev_norm(p) - oracle::sobolev_monotone(n)) < 1e-9);
    CHECK(sobolev_norm(p) >= l2_norm(p));
  }
  CHECK(std::abs(oracle::sobolev_monotone(2) - std::sqrt(1.0 + 20.0 / 3.0)) < 1e-15);

  const auto u = make_grid(201, GridRule::uniform_trapezoid);
  const auto xu = GridFunction::sample(u, [](double x) { return x; });
  CHECK(sobolev_norm(xu) >= l2_norm(xu));
}

TEST_CASE("check_shape verdicts") {
  const auto u = make_grid(1001, GridRule::uniform_trapezoid);
  const auto sq = GridFunction::sample(u, [](double x) { return x * x; });
  CHECK(check_shape(sq, ShapeConstraint::convex(1e-10)).satisfied);
  const auto neg = GridFunction::sample(u, [](double x) { return -x; });
  const auto v = check_shape(neg, ShapeConstraint::monotone(1e-10));
  CHECK_FALSE(v.satisfied);
  CHECK(v.worst_slack < 0.0);

  const auto g = make_grid(128, GridRule::gauss_legendre);
  const auto base = GridFunction::sample(g, [](double x) { return x * x; });
  for (unsigned n = 1; n <= 50; ++n) {
    const auto p = perturb(base, {Family::nonneg, n, 0.1}).result;
    CHECK(check_shape(p, ShapeConstraint::nonnegative(), u).satisfied);
    CHECK(check_shape(p, ShapeConstraint::monotone(), u).satisfied);
    CHECK(check_shape(p, ShapeConstraint::convex(), u).satisfied);
  }
}

TEST_CASE("check_shape positive scaling and grid-size errors") {
  const auto u = make_grid(101, GridRule::uniform_trapezoid);
  const auto f = GridFunction::sample(u, [](double x) { return std::exp(x); });
  const ShapeConstraint kinds[] = {ShapeConstraint::nonnegative(), ShapeConstraint::monotone(),
                                   ShapeConstraint::convex(), ShapeConstraint::derivative_sign(3)};
  for (const auto& c : kinds) {
    REQUIRE(check_shape(f, c).satisfied);
    for (double s : {1e-3, 0.5, 7.0, 1e4}) CHECK(check_shape(s * f, c).satisfied);
  }
  const auto tiny = make_grid(4, GridRule::uniform_trapezoid);
  CHECK_THROWS_AS(check_shape(GridFunction::constant(tiny, 1.0), ShapeConstraint::derivative_sign(3)),
                  Error);
  CHECK_THROWS_AS(ShapeConstraint::derivative_sign(0), Error);
  CHECK_THROWS_AS(ShapeConstraint::convex(-1.0), Error);
}

TEST_CASE("shape constraint names round trip") {
  for (const char* s : {"nonnegative", "monotone", "convex", "derivative_sign:3"}) {
    CHECK(to_string(shape_constraint_from_string(s)) == s);
  }
  CHECK_THROWS_AS(shape_constraint_from_string("concave"), Error);
}

TEST_CASE("interpolation is exact for polynomials from Gauss-Legendre sources") {
  const auto g = make_grid(32, GridRule::gauss_legendre);
  const auto u = make_grid(257, GridRule::uniform_trapezoid);
  const auto f = GridFunction::sample(g, [](double x) { return std::pow(1.0 - x, 20) - 3.0 * x; });
  const auto r = resample(f, u);
  for (std::size_t i = 0; i < u->size(); ++i) {
    const double x = u->nodes()[i];
    CHECK(std::abs(r[i] - (std::pow(1.0 - x, 20) - 3.0 * x)) < 1e-12);
  }
}
