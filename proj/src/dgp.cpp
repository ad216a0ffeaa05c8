#include "npivlab/dgp.hpp"

#include "npivlab/error.hpp"
#include "normal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace npivlab {

double Phi0::operator()(double x) const {
  switch (kind) {
    case Kind::square: return x * x;
    case Kind::linear: return x;
    case Kind::affine_plus_exp: return x + 0.25 * std::expm1(x);
    case Kind::table: {
      if (x <= table_x.front()) return table_y.front();
      if (x >= table_x.back()) return table_y.back();
      const auto hi = static_cast<std::size_t>(
          std::upper_bound(table_x.begin(), table_x.end(), x) - table_x.begin());
      const double theta = (x - table_x[hi - 1]) / (table_x[hi] - table_x[hi - 1]);
      return (1.0 - theta) * table_y[hi - 1] + theta * table_y[hi];
    }
  }
  return 0.0;
}

std::string Phi0::name() const {
  switch (kind) {
    case Kind::square: return "square";
    case Kind::linear: return "linear";
    case Kind::affine_plus_exp: return "affine_plus_exp";
    case Kind::table: return "table";
  }
  return {};
}

Phi0 phi0_from_string(std::string_view name) {
  if (name == "square") return {Phi0::Kind::square, {}, {}};
  if (name == "linear") return {Phi0::Kind::linear, {}, {}};
  if (name == "affine_plus_exp") return {Phi0::Kind::affine_plus_exp, {}, {}};
  fail(ErrorCode::invalid_argument, "unknown phi0 '" + std::string(name) + "'");
}

namespace {

double copula_density_scores(double a, double b, double rho) {
  if (rho == 0.0) return 1.0;
  if (!std::isfinite(a) || !std::isfinite(b)) return 0.0;
  const double one_m = 1.0 - rho * rho;
  return std::exp(-(rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * one_m)) /
         std::sqrt(one_m);
}

void validate(const DgpSpec& spec) {
  require(std::abs(spec.rho) < 1.0, ErrorCode::invalid_argument,
          "copula correlation rho must satisfy |rho| < 1");
  require(spec.noise_sd >= 0.0, ErrorCode::invalid_argument, "noise_sd must be >= 0");
  if (spec.phi0.kind == Phi0::Kind::table) {
    const auto& tx = spec.phi0.table_x;
    require(tx.size() >= 2 && tx.size() == spec.phi0.table_y.size(),
            ErrorCode::invalid_argument, "phi0 table needs >= 2 matching (x, y) pairs");
    for (std::size_t i = 1; i < tx.size(); ++i) {
      require(tx[i] > tx[i - 1], ErrorCode::invalid_argument,
              "phi0 table abscissae must be strictly increasing");
    }
  }
}

}  // namespace

Dgp::Dgp(DgpSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  const std::size_t m = kDensityLattice;
  std::vector<double> s(m);
  for (std::size_t i = 0; i < m; ++i) {
    s[i] = detail::normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(m));
  }
  double best = 0.0;
  for (double b : s) {
    for (double a : s) best = std::max(best, f_x_given_z_scores(a, b));
  }
  sup_fxz_ = best;
  sup_fz_ = 1.0;  // uniform marginal; f_z is identically one on the lattice
}

double Dgp::f_x_given_z_scores(double a, double b) const {
  return copula_density_scores(a, b, rho());
}

double Dgp::f_x_given_z(double x, double z) const {
  if (x < 0.0 || x > 1.0 || z < 0.0 || z > 1.0) return 0.0;
  return f_x_given_z_scores(detail::normal_quantile(x), detail::normal_quantile(z));
}

double Dgp::f_z(double z) const { return z >= 0.0 && z <= 1.0 ? 1.0 : 0.0; }

double Dgp::f_xz(double x, double z) const { return f_x_given_z(x, z) * f_z(z); }

Eigen::MatrixXd Dgp::conditional_kernel(const Grid& x_grid, const Grid& z_grid,
                                        Eigen::VectorXd* raw_row_sums) const {
  const auto xs = x_grid.scores();
  const auto zs = z_grid.scores();
  const auto w = x_grid.weights();
  const auto rows = static_cast<Eigen::Index>(zs.size());
  const auto cols = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd k(rows, cols);
  Eigen::VectorXd sums(rows);
  for (Eigen::Index j = 0; j < rows; ++j) {
    const double b = zs[static_cast<std::size_t>(j)];
    if (!std::isfinite(b) && rho() != 0.0 && cols > 0) {
      // Boundary z-node: the conditional law degenerates to a point mass at an x-boundary.
      const bool upper = (b > 0.0) == (rho() > 0.0);
      const auto first = std::min_element(xs.begin(), xs.end()) - xs.begin();
      const auto last = std::max_element(xs.begin(), xs.end()) - xs.begin();
      k.row(j).setZero();
      k(j, upper ? last : first) = 1.0;
      sums(j) = 1.0;
      continue;
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < cols; ++i) {
      const auto iu = static_cast<std::size_t>(i);
      k(j, i) = f_x_given_z_scores(xs[iu], zs[static_cast<std::size_t>(j)]) * w[iu];
      total += k(j, i);
    }
    require(total > 0.0 && std::isfinite(total), ErrorCode::numerical,
            "conditional density integrates to zero at a z-node");
    sums(j) = total;
    k.row(j) /= total;
  }
  if (raw_row_sums != nullptr) *raw_row_sums = sums;
  return k;
}

Dgp make_dgp(const DgpSpec& spec) { return Dgp(spec); }

GridFunction reduced_form(const Dgp& dgp, const GridFunction& phi0, const GridPtr& z_grid) {
  const Eigen::MatrixXd k = dgp.conditional_kernel(phi0.grid(), *z_grid);
  return GridFunction::from_vector(z_grid, k * phi0.vec());
}

Sample sample(const Dgp& dgp, std::size_t m, std::uint64_t seed) {
  require(m >= 1, ErrorCode::invalid_argument, "sample size must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = dgp.rho();
  const double comp = std::sqrt(1.0 - rho * rho);
  const double sd = dgp.spec().noise_sd;

  Sample s;
  s.seed = seed;
  s.x.resize(m);
  s.y.resize(m);
  s.z.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double e1 = normal(rng);
    const double e2 = normal(rng);
    const double eta = normal(rng);
    const double v = e1;
    const double w = rho * e1 + comp * e2;
    s.x[i] = detail::normal_cdf(v);
    s.z[i] = detail::normal_cdf(w);
    s.y[i] = dgp.phi0(s.x[i]) + sd * eta;
  }
  return s;
}

DensityBounds bounded_density_check(const Dgp& dgp, double limit) {
  DensityBounds b;
  b.sup_fz = dgp.sup_fz();
  b.sup_fxz = dgp.sup_fxz();
  b.bounded = std::isfinite(b.sup_fz) && std::isfinite(b.sup_fxz) && b.sup_fz < limit &&
              b.sup_fxz < limit;
  return b;
}

}  // namespace npivlab
