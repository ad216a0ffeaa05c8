#include <doctest.h>

#include "npivlab/counterexamples.hpp"
#include "npivlab/discrete_operator.hpp"
#include "npivlab/error.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace npivlab;

namespace {

Dgp copula(double rho) { return make_dgp({phi0_from_string("square"), rho, 0.0, false}); }

Dgp independent() {
  DgpSpec s;
  s.independent = true;
  return make_dgp(s);
}

GridFunction random_function(const GridPtr& g, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(g->size());
  for (auto& e : v) e = nd(rng);
  return {g, v};
}

}  // namespace

TEST_CASE("discretize: independent case rows equal the x-weights") {
  const auto x = make_grid(32, GridRule::gauss_legendre);
  const auto z = make_grid(17, GridRule::gauss_legendre);
  const DiscreteOperator a = discretize(independent(), x, z);
  for (Eigen::Index j = 0; j < a.kernel().rows(); ++j) {
    for (Eigen::Index i = 0; i < a.kernel().cols(); ++i) {
      CHECK(std::abs(a.kernel()(j, i) - x->weights()[static_cast<std::size_t>(i)]) < 1e-15);
    }
  }
  const auto f = GridFunction::sample(x, [](double t) { return std::cos(3.0 * t); });
  const double mean = inner_product(f, GridFunction::constant(x, 1.0));
  for (double v : apply(a, f).values()) CHECK(std::abs(v - mean) < 1e-14);
}

TEST_CASE("discretize: row sums and weights") {
  const auto g = make_grid(64, GridRule::gauss_legendre);
  const DiscreteOperator a = discretize(copula(0.5), g, g);
  for (Eigen::Index j = 0; j < a.kernel().rows(); ++j) {
    CHECK(std::abs(a.kernel().row(j).sum() - 1.0) < 1e-8);
    CHECK(std::abs(a.raw_row_sums()(j) - 1.0) < 1e-2);
  }
  CHECK((a.fz_weights().array() >= 0.0).all());
}

TEST_CASE("discretize: single-node z grid") {
  const auto x = make_grid(16, GridRule::gauss_legendre);
  const auto z = make_custom_grid({0.5}, {1.0});
  const DiscreteOperator a = discretize(copula(0.5), x, z);
  CHECK(a.kernel().rows() == 1);
  CHECK(a.kernel().cols() == 16);
  CHECK(std::abs(a.kernel().sum() - 1.0) < 1e-12);
}

TEST_CASE("apply") {
  const auto g = make_grid(128, GridRule::gauss_legendre);
  const DiscreteOperator ind = discretize(independent(), g, g);
  for (double v : apply(ind, GridFunction::constant(g, 0.0)).values()) CHECK(v == 0.0);
  for (unsigned n : {0u, 1u, 10u, 63u, 100u}) {
    const double expected = -std::sqrt(2.0 * n + 1.0) / (n + 1.0);
    for (double v : apply(ind, psi({Family::monotone, n, 1.0}, g)).values()) {
      CHECK(std::abs(v - expected) < 1e-13);
    }
  }
  for (double rho : {0.0, 0.5}) {
    const Dgp d = copula(rho);
    const DiscreteOperator a = discretize(d, g, g);
    for (unsigned n = 0; n <= 50; ++n) {
      for (Family f : {Family::monotone, Family::nonneg}) {
        const CounterexampleSpec s{f, n, 1.0};
        const double sup = apply(a, psi(s, g)).vec().cwiseAbs().maxCoeff();
        CHECK(sup <= analytic_sup_A_psi_bound(s, d.sup_fxz()) * (1.0 + 1e-8));
      }
    }
  }
  const auto other = make_grid(64, GridRule::gauss_legendre);
  CHECK_THROWS_AS(apply(ind, GridFunction::constant(other, 1.0)), Error);
}

TEST_CASE("linearity") {
  const auto g = make_grid(48, GridRule::gauss_legendre);
  const DiscreteOperator a = discretize(copula(0.5), g, g);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const auto f = random_function(g, rng);
    const auto h = random_function(g, rng);
    const auto lhs = apply(a, 2.5 * f + (-0.75) * h);
    const auto rhs = 2.5 * apply(a, f) + (-0.75) * apply(a, h);
    CHECK((lhs.vec() - rhs.vec()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("residual and criterion") {
  const auto g = make_grid(128, GridRule::gauss_legendre);
  const Dgp d = copula(0.5);
  const DiscreteOperator a = discretize(d, g, g);
  const auto phi0 = GridFunction::sample(g, [](double x) { return x * x; });
  const auto r = apply(a, phi0);
  for (double v : residual_m(a, phi0, r).values()) CHECK(v == 0.0);
  CHECK(q_infinity(a, phi0, r) < 1e-20);

  const auto pn = perturb(phi0, {Family::monotone, 12, 0.1}).result;
  const auto m = residual_m(a, pn, r);
  const auto expected = 0.1 * apply(a, psi({Family::monotone, 12, 1.0}, g));
  CHECK((m.vec() - expected.vec()).cwiseAbs().maxCoeff() < 1e-12);

  const auto shifted = r + GridFunction::constant(g, 0.3);
  for (double v : residual_m(a, phi0, shifted).values()) CHECK(std::abs(v + 0.3) < 1e-14);

  const auto p2 = perturb(phi0, {Family::monotone, 12, 0.2}).result;
  CHECK(q_infinity(a, p2, r) == doctest::Approx(4.0 * q_infinity(a, pn, r)).epsilon(1e-10));
  CHECK(q_infinity(a, pn, r) > 0.0);

  const DiscreteOperator ind = discretize(independent(), g, g);
  const auto ri = apply(ind, phi0);
  for (unsigned n = 0; n <= 100; ++n) {
    const auto p = perturb(phi0, {Family::monotone, n, 0.1}).result;
    const double closed = 0.01 * (2.0 * n + 1.0) / ((n + 1.0) * (n + 1.0));
    CHECK(std::abs(q_infinity(ind, p, ri) - closed) < 1e-10);
  }
}

TEST_CASE("adjoint duality") {
  const auto x = make_grid(40, GridRule::gauss_legendre);
  const auto z = make_grid(33, GridRule::gauss_legendre);
  const DiscreteOperator a = discretize(copula(0.5), x, z);
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto phi = random_function(x, rng);
    const auto ps = random_function(z, rng);
    worst = std::max(worst, std::abs(z_inner_product(a, apply(a, phi), ps) -
                                     inner_product(phi, adjoint_apply(a, ps))));
  }
  CHECK(worst < 1e-12);
  for (double v : adjoint_apply(a, GridFunction::constant(z, 0.0)).values()) CHECK(v == 0.0);

  const DiscreteOperator ind = discretize(independent(), x, z);
  for (double v : adjoint_apply(ind, GridFunction::constant(z, 1.0)).values()) {
    CHECK(std::abs(v - 1.0) < 1e-13);
  }
}

TEST_CASE("svd report: independent case is rank one") {
  const auto g = make_grid(64, GridRule::gauss_legendre);
  const SvdReport rep = svd_report(discretize(independent(), g, g));
  CHECK(std::abs(rep.singular_values[0] - 1.0) < 1e-10);
  CHECK(rep.singular_values[1] < 1e-10);
  CHECK(rep.numerical_rank == 1);
}

TEST_CASE("svd report: Gaussian copula spectrum") {
  const Dgp d = copula(0.5);
  const auto g64 = make_grid(64, GridRule::normal_scores);
  const auto g128 = make_grid(128, GridRule::normal_scores);
  const SvdReport r64 = svd_report(discretize(d, g64, g64));
  const SvdReport r128 = svd_report(discretize(d, g128, g128));
  for (std::size_t k = 1; k < r64.singular_values.size(); ++k) {
    CHECK(r64.singular_values[k] <= r64.singular_values[k - 1]);
  }
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(std::abs(r64.singular_values[k] - r128.singular_values[k]) < 1e-10);
    // Mehler expansion: singular values rho^(k-1), up to truncation of the scores at +-7.
    CHECK(std::abs(r128.singular_values[k] - std::pow(0.5, static_cast<double>(k))) < 1e-5);
  }
  CHECK(r64.singular_values[31] / r64.singular_values[0] < 1e-8);
  std::size_t first_tiny = r64.singular_values.size();
  for (std::size_t k = 0; k < r64.singular_values.size(); ++k) {
    if (r64.singular_values[k] < 1e-10) {
      first_tiny = k;
      break;
    }
  }
  CHECK(first_tiny < 64);
  CHECK(r64.decay_fit < 0.0);

  // Same checks on Gauss-Legendre grids, where the edges converge slowly.
  const auto gl = make_grid(64, GridRule::gauss_legendre);
  const SvdReport rgl = svd_report(discretize(d, gl, gl));
  CHECK(rgl.singular_values[31] / rgl.singular_values[0] < 1e-8);
}

TEST_CASE("weak convergence surrogate") {
  const auto g = make_grid(128, GridRule::gauss_legendre);
  const DiscreteOperator a = discretize(copula(0.5), g, g);
  const auto one = GridFunction::constant(g, 1.0);
  const auto zf = GridFunction::sample(g, [](double z) { return z; });
  const auto sn = GridFunction::sample(g, [](double z) { return std::sin(std::numbers::pi * z); });
  double prev[3] = {1e9, 1e9, 1e9};
  for (unsigned n : {5u, 10u, 20u, 50u, 100u}) {
    const auto image = apply(a, psi({Family::monotone, n, 1.0}, g));
    const double c1 = z_inner_product(a, one, image);
    // E[psi_n(X)] with a uniform X marginal; quadrature of the corner singularity limits accuracy.
    CHECK(std::abs(c1 + std::sqrt(2.0 * n + 1.0) / (n + 1.0)) < 1e-4);
    const double vals[3] = {std::abs(c1), std::abs(z_inner_product(a, zf, image)),
                            std::abs(z_inner_product(a, sn, image))};
    for (int k = 0; k < 3; ++k) {
      CHECK(vals[k] < prev[k]);
      prev[k] = vals[k];
    }
  }
}

TEST_CASE("operator constructor validation") {
  const auto x = make_grid(4, GridRule::gauss_legendre);
  const auto z = make_grid(3, GridRule::gauss_legendre);
  CHECK_THROWS_AS(DiscreteOperator(x, z, Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Ones(3)),
                  Error);
  CHECK_THROWS_AS(DiscreteOperator(x, z, Eigen::MatrixXd::Zero(3, 4), -Eigen::VectorXd::Ones(3)),
                  Error);
}
