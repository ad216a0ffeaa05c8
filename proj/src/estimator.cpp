#include "npivlab/estimator.hpp"

#include "npivlab/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace npivlab {

std::string_view to_string(Penalty p) {
  return p == Penalty::sobolev_first_order ? "sobolev_first_order" : "l2_only";
}

Penalty penalty_from_string(std::string_view name) {
  if (name == "sobolev_first_order" || name == "sobolev") return Penalty::sobolev_first_order;
  if (name == "l2_only" || name == "l2") return Penalty::l2_only;
  fail(ErrorCode::invalid_argument, "unknown penalty '" + std::string(name) + "'");
}

std::string_view to_string(SolveStatus s) {
  return s == SolveStatus::converged ? "converged" : "not_converged";
}

bool EstimateResult::constraints_ok() const {
  for (const auto& v : constraint_verdicts) {
    if (!v.verdict.satisfied) return false;
  }
  return true;
}

std::size_t ConstraintSet::expected_rows() const {
  if (!inspection_grid) return 0;
  std::size_t rows = 0;
  for (const auto& c : constraints) rows += inspection_grid->size() - c.difference_order();
  return rows;
}

Eigen::MatrixXd ConstraintSet::encode(const Grid& x_grid) const {
  if (constraints.empty()) return Eigen::MatrixXd(0, static_cast<Eigen::Index>(x_grid.size()));
  require(inspection_grid && inspection_grid->rule() == GridRule::uniform_trapezoid,
          ErrorCode::invalid_argument, "constraints need a uniform inspection grid");
  const Eigen::MatrixXd interp = interpolation_matrix(x_grid, *inspection_grid);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(expected_rows()), interp.cols());
  Eigen::Index row = 0;
  for (const auto& c : constraints) {
    const unsigned m = c.difference_order();
    require(inspection_grid->size() >= m + 2, ErrorCode::invalid_argument,
            "inspection grid too small for " + to_string(c));
    const Eigen::MatrixXd d = difference_matrix(inspection_grid->size(), m);
    g.middleRows(row, d.rows()) = d * interp;
    row += d.rows();
  }
  return g;
}

namespace {

// The estimation problem in L2-orthonormal coordinates u = W^{1/2} phi:
// Q(phi) = |M u - c|^2 and |phi|_H^2 = u' P u.
struct LeastSquaresForm {
  Eigen::VectorXd sqrt_w;
  Eigen::MatrixXd m;
  Eigen::VectorXd c;
  Eigen::MatrixXd penalty;
};

Eigen::MatrixXd penalty_matrix(const Grid& x_grid, Penalty p) {
  const auto n = static_cast<Eigen::Index>(x_grid.size());
  Eigen::MatrixXd pm = Eigen::MatrixXd::Identity(n, n);
  if (p == Penalty::sobolev_first_order) {
    const auto w = x_grid.weights();
    const Eigen::VectorXd sw =
        Eigen::Map<const Eigen::VectorXd>(w.data(), n).cwiseSqrt();
    const Eigen::MatrixXd e =
        sw.asDiagonal() * differentiation_matrix(x_grid) * sw.cwiseInverse().asDiagonal();
    pm.noalias() += e.transpose() * e;
  }
  return pm;
}

LeastSquaresForm least_squares_form(const DiscreteOperator& a, Penalty p) {
  LeastSquaresForm f;
  const auto w = a.x_grid()->weights();
  f.sqrt_w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()))
                 .cwiseSqrt();
  f.m = a.weighted_matrix();
  f.penalty = penalty_matrix(*a.x_grid(), p);
  return f;
}

Eigen::VectorXd weighted_data(const DiscreteOperator& a, const GridFunction& r) {
  require_same_grid(r.grid(), *a.z_grid(), "estimator data");
  return a.fz_weights().cwiseSqrt().cwiseProduct(r.vec());
}

double penalty_value(const GridFunction& phi, Penalty p) {
  return p == Penalty::sobolev_first_order ? sobolev_norm(phi) : l2_norm(phi);
}

void finish(EstimateResult& res, const DiscreteOperator& a, const GridFunction& r, Penalty p,
            double lambda) {
  res.penalty = penalty_value(res.phi_hat, p);
  res.lambda_used = lambda;
  res.objective = q_infinity(a, res.phi_hat, r) + lambda * res.penalty * res.penalty;
}

// Factorized Tikhonov system, reusable across right-hand sides.
class TikhonovSolver {
 public:
  TikhonovSolver(const DiscreteOperator& a, const TirConfig& cfg)
      : op_(a), cfg_(cfg), form_(least_squares_form(a, cfg.penalty)) {
    require(cfg.lambda > 0.0, ErrorCode::invalid_argument,
            "lambda must be positive for Tikhonov solves");
    system_ = form_.m.transpose() * form_.m + cfg.lambda * form_.penalty;
    llt_.compute(system_);
    if (llt_.info() != Eigen::Success) {
      fail(ErrorCode::numerical, "Tikhonov system is not positive definite");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(system_, Eigen::EigenvaluesOnly);
    min_eigenvalue_ = eig.eigenvalues()(0);
  }

  EstimateResult solve(const GridFunction& r) const {
    const Eigen::VectorXd rhs = form_.m.transpose() * weighted_data(op_, r);
    Eigen::VectorXd u = llt_.solve(rhs);
    u += llt_.solve(rhs - system_ * u);
    EstimateResult res(GridFunction::from_vector(op_.x_grid(), u.cwiseQuotient(form_.sqrt_w)));
    res.kkt_residual = (system_ * u - rhs).norm();
    res.condition_diagnostic = min_eigenvalue_;
    finish(res, op_, r, cfg_.penalty, cfg_.lambda);
    return res;
  }

 private:
  const DiscreteOperator& op_;
  TirConfig cfg_;
  LeastSquaresForm form_;
  Eigen::MatrixXd system_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double min_eigenvalue_ = 0.0;
};

std::size_t retained_count(const Eigen::VectorXd& s) {
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  std::size_t k = 0;
  while (k < static_cast<std::size_t>(s.size()) &&
         s(static_cast<Eigen::Index>(k)) > kNaiveRelativeCutoff * s(0)) {
    ++k;
  }
  return k;
}

double gaussian_kernel(double t, double h) {
  return std::exp(-0.5 * (t / h) * (t / h)) / (h * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

std::vector<double> lambda_sweep(double lo, double hi, unsigned per_decade) {
  require(lo > 0.0 && hi >= lo && per_decade >= 1, ErrorCode::invalid_argument,
          "lambda_sweep needs 0 < lo <= hi and per_decade >= 1");
  const double span = std::log10(hi / lo);
  const auto steps = static_cast<int>(std::round(span * per_decade));
  std::vector<double> out;
  for (int i = 0; i <= steps; ++i) {
    out.push_back(steps == 0 ? lo : lo * std::pow(10.0, span * i / steps));
  }
  return out;
}

EstimateResult tir_estimate(const DiscreteOperator& a, const GridFunction& r,
                            const TirConfig& cfg) {
  return TikhonovSolver(a, cfg).solve(r);
}

EstimateResult naive_estimate(const DiscreteOperator& a, const GridFunction& r) {
  return naive_estimate(a, weighted_svd(a), r);
}

EstimateResult naive_estimate(const DiscreteOperator& a, const OperatorSvd& svd,
                              const GridFunction& r) {
  const LeastSquaresForm form = least_squares_form(a, Penalty::l2_only);
  const Eigen::VectorXd c = weighted_data(a, r);
  const auto k = static_cast<Eigen::Index>(retained_count(svd.singular_values));
  Eigen::VectorXd u = Eigen::VectorXd::Zero(form.m.cols());
  if (k > 0) {
    const Eigen::VectorXd coef =
        (svd.left.leftCols(k).transpose() * c).cwiseQuotient(svd.singular_values.head(k));
    u = svd.right.leftCols(k) * coef;
  }
  EstimateResult res(GridFunction::from_vector(a.x_grid(), u.cwiseQuotient(form.sqrt_w)));
  res.kkt_residual = (form.m.transpose() * (form.m * u - c)).norm();
  res.condition_diagnostic = k > 0 ? svd.singular_values(k - 1) : 0.0;
  finish(res, a, r, Penalty::l2_only, 0.0);
  return res;
}

EstimateResult constrained_estimate(const DiscreteOperator& a, const GridFunction& r,
                                    const TirConfig& cfg, const ConstraintSet& constraints,
                                    const QpSettings& settings) {
  require(cfg.lambda >= 0.0, ErrorCode::invalid_argument,
          "lambda must be nonnegative for constrained solves");
  const LeastSquaresForm form = least_squares_form(a, cfg.penalty);
  require(form.m.cols() <= 512, ErrorCode::invalid_argument,
          "constrained solves are limited to 512 unknowns");
  const Eigen::VectorXd c = weighted_data(a, r);

  const Eigen::MatrixXd hessian = form.m.transpose() * form.m + cfg.lambda * form.penalty;
  const Eigen::VectorXd linear = form.m.transpose() * c;
  Eigen::MatrixXd g = constraints.encode(*a.x_grid()) * form.sqrt_w.cwiseInverse().asDiagonal();
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    const double norm = g.row(i).norm();
    if (norm > 0.0) g.row(i) /= norm;
  }
  const Eigen::VectorXd lower = Eigen::VectorXd::Zero(g.rows());

  const QpResult qp = solve_qp(hessian, linear, g, lower, settings);
  EstimateResult res(GridFunction::from_vector(a.x_grid(), qp.x.cwiseQuotient(form.sqrt_w)));
  res.kkt_residual = qp.certificate.worst();
  res.iterations = qp.iterations;
  res.status = qp.certificate.worst() <= 1e-6 ? SolveStatus::converged : SolveStatus::not_converged;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian, Eigen::EigenvaluesOnly);
  res.condition_diagnostic = eig.eigenvalues()(0);
  for (const auto& sc : constraints.constraints) {
    res.constraint_verdicts.push_back(
        {sc, check_shape(res.phi_hat, sc, constraints.inspection_grid)});
  }
  finish(res, a, r, cfg.penalty, cfg.lambda);
  return res;
}

double rule_of_thumb_bandwidth(std::span<const double> values) {
  const auto m = static_cast<double>(values.size());
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (m - 1.0));
  return 1.06 * sd * std::pow(m, -0.2);
}

PluginEstimate sampled_plugin(const Sample& sample, const TirConfig& cfg, const GridPtr& x_grid,
                              const GridPtr& z_grid) {
  require(sample.size() >= 50, ErrorCode::invalid_argument,
          "sampled mode needs at least 50 observations");
  const SampledMode mode = cfg.sampled.value_or(SampledMode{});
  const double hx = mode.h_x.value_or(rule_of_thumb_bandwidth(sample.x));
  const double hz = mode.h_z.value_or(rule_of_thumb_bandwidth(sample.z));
  if (mode.h_x) require(*mode.h_x > 0.0, ErrorCode::invalid_argument, "h_x must be positive");
  if (mode.h_z) require(*mode.h_z > 0.0, ErrorCode::invalid_argument, "h_z must be positive");
  if (!(hx > 0.0) || !(hz > 0.0) || !std::isfinite(hx) || !std::isfinite(hz)) {
    fail(ErrorCode::degenerate_sample, "sample has no spread; kernel bandwidth is zero");
  }

  const auto m = static_cast<Eigen::Index>(sample.size());
  const auto nx = static_cast<Eigen::Index>(x_grid->size());
  const auto nz = static_cast<Eigen::Index>(z_grid->size());
  const auto xn = x_grid->nodes();
  const auto zn = z_grid->nodes();
  const auto wx = x_grid->weights();
  const auto wz = z_grid->weights();

  Eigen::MatrixXd kx(nx, m);
  Eigen::MatrixXd kz(nz, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    for (Eigen::Index i = 0; i < nx; ++i) {
      kx(i, k) = gaussian_kernel(xn[static_cast<std::size_t>(i)] - sample.x[ku], hx);
    }
    for (Eigen::Index j = 0; j < nz; ++j) {
      kz(j, k) = gaussian_kernel(zn[static_cast<std::size_t>(j)] - sample.z[ku], hz);
    }
  }
  const Eigen::Map<const Eigen::VectorXd> y(sample.y.data(), m);
  const Eigen::MatrixXd joint = kz * kx.transpose() / static_cast<double>(m);  // f(x_i, z_j)

  Eigen::MatrixXd kernel(nz, nx);
  Eigen::VectorXd fz(nz);
  Eigen::VectorXd raw(nz);
  std::vector<double> r_hat(static_cast<std::size_t>(nz), 0.0);
  std::vector<std::size_t> flagged;
  for (Eigen::Index j = 0; j < nz; ++j) {
    double marginal = 0.0;
    for (Eigen::Index i = 0; i < nx; ++i) {
      kernel(j, i) = joint(j, i) * wx[static_cast<std::size_t>(i)];
      marginal += kernel(j, i);
    }
    raw(j) = marginal;
    const double denom = kz.row(j).sum();
    if (marginal < kDensityFloor || denom <= 0.0) {
      flagged.push_back(static_cast<std::size_t>(j));
      for (Eigen::Index i = 0; i < nx; ++i) kernel(j, i) = wx[static_cast<std::size_t>(i)];
      fz(j) = 0.0;
      continue;
    }
    kernel.row(j) /= marginal;
    fz(j) = wz[static_cast<std::size_t>(j)] * marginal;
    r_hat[static_cast<std::size_t>(j)] = kz.row(j).dot(y) / denom;
  }
  if (2 * flagged.size() > static_cast<std::size_t>(nz)) {
    fail(ErrorCode::degenerate_sample,
         "density estimate of Z vanishes at " + std::to_string(flagged.size()) + " of " +
             std::to_string(nz) + " z-nodes");
  }
  DiscreteOperator op(x_grid, z_grid, std::move(kernel), std::move(fz), std::move(raw),
                      std::move(flagged));
  return {std::move(op), GridFunction(z_grid, std::move(r_hat)), hx, hz};
}

std::vector<ProbeDirection> standard_probe_directions(const DiscreteOperator& a, Family family,
                                                      const std::vector<unsigned>& psi_indices,
                                                      std::uint64_t noise_seed) {
  std::vector<ProbeDirection> out;
  const Eigen::VectorXd& fz = a.fz_weights();
  const auto nz = fz.size();

  const OperatorSvd svd = weighted_svd(a);
  const std::size_t k = retained_count(svd.singular_values);
  if (k > 0) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(nz);
    const auto col = static_cast<Eigen::Index>(k - 1);
    for (Eigen::Index j = 0; j < nz; ++j) {
      if (fz(j) > 0.0) v(j) = svd.left(j, col) / std::sqrt(fz(j));
    }
    out.push_back({"worst_singular", GridFunction::from_vector(a.z_grid(), v)});
  }

  for (unsigned n : psi_indices) {
    const GridFunction image = apply(a, psi({family, n, 1.0}, a.x_grid()));
    const double norm = z_norm(a, image);
    if (norm > 0.0) {
      out.push_back({"psi_image_" + std::to_string(n), (1.0 / norm) * image});
    }
  }

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(nz));
  for (double& e : noise) e = normal(rng);
  const GridFunction white(a.z_grid(), std::move(noise));
  const double norm = z_norm(a, white);
  if (norm > 0.0) out.push_back({"white_noise", (1.0 / norm) * white});
  return out;
}

std::vector<ProbeRow> stability_probe(const DiscreteOperator& a, const GridFunction& r,
                                      const std::vector<double>& deltas,
                                      const std::vector<ProbeDirection>& directions,
                                      const TirConfig& cfg, const ConstraintSet* constraints) {
  const OperatorSvd svd = weighted_svd(a);
  const TikhonovSolver tikhonov(a, cfg);
  const bool with_qp = constraints != nullptr && !constraints->empty();

  const GridFunction naive0 = naive_estimate(a, svd, r).phi_hat;
  const GridFunction tir0 = tikhonov.solve(r).phi_hat;
  std::optional<GridFunction> qp0;
  if (with_qp) qp0 = constrained_estimate(a, r, cfg, *constraints).phi_hat;

  const double bound = 1.0 / (2.0 * std::sqrt(cfg.lambda));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ProbeRow> rows;
  for (const auto& dir : directions) {
    for (double delta : deltas) {
      auto amp = [&](const GridFunction& base, const GridFunction& moved) {
        return delta == 0.0 ? 0.0 : l2_norm(moved - base) / std::abs(delta);
      };
      const GridFunction rp = r + delta * dir.direction;
      rows.push_back({delta, dir.name, "naive", amp(naive0, naive_estimate(a, svd, rp).phi_hat), nan});
      rows.push_back({delta, dir.name, "tir", amp(tir0, tikhonov.solve(rp).phi_hat), bound});
      if (with_qp) {
        rows.push_back({delta, dir.name, "constrained",
                        amp(*qp0, constrained_estimate(a, rp, cfg, *constraints).phi_hat), nan});
      }
    }
  }
  return rows;
}

}  // namespace npivlab
