#include "npivlab/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace npivlab {

double QpCertificate::worst() const {
  return std::max({stationarity, primal_infeasibility, dual_infeasibility, complementarity});
}

QpCertificate kkt_certificate(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                              const Eigen::MatrixXd& constraints, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  QpCertificate c;
  Eigen::VectorXd grad = hessian * x - linear;
  if (constraints.rows() > 0) grad -= constraints.transpose() * y;
  c.stationarity = grad.lpNorm<Eigen::Infinity>();
  if (constraints.rows() == 0) return c;
  const Eigen::VectorXd slack = constraints * x - lower;
  c.primal_infeasibility = std::max(0.0, -slack.minCoeff());
  c.dual_infeasibility = std::max(0.0, -y.minCoeff());
  c.complementarity = y.cwiseProduct(slack).cwiseAbs().maxCoeff();
  return c;
}

namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

Eigen::VectorXd unconstrained_minimizer(const Eigen::MatrixXd& h, const Eigen::VectorXd& b) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(h);
  return cod.solve(b);
}

// Equality-constrained re-solve on a working set, by proximal iterative
// refinement so that singular directions of H stay where the interior point
// run left them.
bool equality_solve(const Eigen::MatrixXd& h, const Eigen::VectorXd& b, const Eigen::MatrixXd& g,
                    const Eigen::VectorXd& lower, const std::vector<Eigen::Index>& active,
                    Eigen::VectorXd& x, Eigen::VectorXd& y) {
  const Eigen::Index n = h.rows();
  const auto na = static_cast<Eigen::Index>(active.size());
  if (na > n) return false;

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
  Eigen::VectorXd rhs(n + na);
  Eigen::VectorXd z(n + na);
  kkt.topLeftCorner(n, n) = h;
  rhs.head(n) = b;
  z.head(n) = x;
  for (Eigen::Index k = 0; k < na; ++k) {
    const Eigen::Index i = active[static_cast<std::size_t>(k)];
    kkt.block(0, n + k, n, 1) = -g.row(i).transpose();
    kkt.block(n + k, 0, 1, n) = -g.row(i);
    rhs(n + k) = -lower(i);
    z(n + k) = y(i);
  }
  const double scale = 1.0 + h.diagonal().cwiseAbs().maxCoeff();
  const double delta = 1e-10 * scale;
  Eigen::MatrixXd regularized = kkt;
  regularized.diagonal().head(n).array() += delta;
  regularized.diagonal().tail(na).array() -= delta;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(regularized);
  for (int it = 0; it < 30; ++it) {
    const Eigen::VectorXd step = lu.solve(rhs - kkt * z);
    z += step;
    if (!z.allFinite()) return false;
    if (step.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + z.lpNorm<Eigen::Infinity>())) break;
  }
  x = z.head(n);
  y.setZero();
  for (Eigen::Index k = 0; k < na; ++k) y(active[static_cast<std::size_t>(k)]) = z(n + k);
  return true;
}

// Primal-dual active set iterations started from the interior point estimate.
bool polish(const Eigen::MatrixXd& h, const Eigen::VectorXd& b, const Eigen::MatrixXd& g,
            const Eigen::VectorXd& lower, Eigen::VectorXd& x, Eigen::VectorXd& y) {
  std::vector<Eigen::Index> active;
  for (int round = 0; round < 50; ++round) {
    const Eigen::VectorXd slack = g * x - lower;
    std::vector<Eigen::Index> next;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (y(i) > slack(i)) next.push_back(i);
    }
    if (round > 0 && next == active) return true;
    active = std::move(next);
    if (!equality_solve(h, b, g, lower, active, x, y)) return false;
  }
  return true;
}

}  // namespace

QpResult solve_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                  const Eigen::MatrixXd& constraints, const Eigen::VectorXd& lower,
                  const QpSettings& settings) {
  const Eigen::Index n = hessian.rows();
  const Eigen::Index m = constraints.rows();
  QpResult result;
  if (m == 0) {
    result.x = unconstrained_minimizer(hessian, linear);
    result.multipliers = Eigen::VectorXd();
    result.certificate = kkt_certificate(hessian, linear, constraints, lower, result.x,
                                         result.multipliers);
    result.converged = true;
    return result;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = (constraints * x - lower).cwiseMax(1.0);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(m);
  const double bnorm = 1.0 + linear.lpNorm<Eigen::Infinity>();
  const double hnorm = 1.0 + lower.lpNorm<Eigen::Infinity>();
  const double md = static_cast<double>(m);

  double best_merit = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;
  Eigen::VectorXd best_y = y;

  Eigen::MatrixXd normal(n, n);
  for (int it = 0; it < settings.max_iterations; ++it) {
    const Eigen::VectorXd rd = hessian * x - linear - constraints.transpose() * y;
    const Eigen::VectorXd rp = constraints * x - s - lower;
    const double mu = s.dot(y) / md;
    const double merit = std::max({rd.lpNorm<Eigen::Infinity>() / bnorm,
                                   rp.lpNorm<Eigen::Infinity>() / hnorm, mu});
    if (merit < best_merit) {
      best_merit = merit;
      best_x = x;
      best_y = y;
    }
    result.iterations = it;
    if (merit <= settings.tolerance) {
      result.converged = true;
      break;
    }

    const Eigen::VectorXd d = y.cwiseQuotient(s);
    normal.noalias() = constraints.transpose() * d.asDiagonal() * constraints;
    normal += hessian;
    double reg = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    const double diag_scale = 1.0 + normal.diagonal().maxCoeff();
    while (llt.info() != Eigen::Success) {
      reg = reg == 0.0 ? 1e-14 * diag_scale : reg * 10.0;
      if (reg > 1e-4 * diag_scale) break;
      Eigen::MatrixXd shifted = normal;
      shifted.diagonal().array() += reg;
      llt.compute(shifted);
    }
    if (llt.info() != Eigen::Success) break;

    auto newton = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& ds,
                      Eigen::VectorXd& dy) {
      const Eigen::VectorXd t = (rc + y.cwiseProduct(rp)).cwiseQuotient(s);
      dx = llt.solve(-rd - constraints.transpose() * t);
      ds = constraints * dx + rp;
      dy = -(rc + y.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dx, ds, dy;
    const Eigen::VectorXd sy = s.cwiseProduct(y);
    newton(sy, dx, ds, dy);
    const double a_aff = std::min(max_step(s, ds), max_step(y, dy));
    const double mu_aff = (s + a_aff * ds).dot(y + a_aff * dy) / md;
    const double sigma = std::pow(mu_aff / mu, 3.0);

    const Eigen::VectorXd rc =
        sy + ds.cwiseProduct(dy) - Eigen::VectorXd::Constant(m, sigma * mu);
    newton(rc, dx, ds, dy);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(y, dy)));
    x += alpha * dx;
    s += alpha * ds;
    y += alpha * dy;
    if (!x.allFinite() || !s.allFinite() || !y.allFinite()) break;
  }

  result.x = best_x;
  result.multipliers = best_y;
  result.certificate = kkt_certificate(hessian, linear, constraints, lower, best_x, best_y);

  if (settings.polish) {
    Eigen::VectorXd px = best_x;
    Eigen::VectorXd py = best_y;
    if (polish(hessian, linear, constraints, lower, px, py)) {
      const QpCertificate pc = kkt_certificate(hessian, linear, constraints, lower, px, py);
      if (pc.worst() <= result.certificate.worst()) {
        result.x = px;
        result.multipliers = py;
        result.certificate = pc;
        result.polished = true;
      }
    }
  }
  return result;
}

}  // namespace npivlab
