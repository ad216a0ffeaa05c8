#pragma once

// Convex quadratic programs
//
//   minimize   1/2 x'Hx - b'x   subject to   Gx >= h
//
// with H symmetric positive semidefinite, solved by a Mehrotra
// predictor-corrector primal-dual interior point method followed by an
// active-set polish. Problem sizes here are a few hundred variables and a few
// thousand inequality rows, so everything is dense.

#include <Eigen/Dense>

namespace npivlab {

struct QpSettings {
  int max_iterations = 200;
  double tolerance = 1e-10;
  bool polish = true;
};

/// Componentwise KKT violations at (x, y); all are >= 0.
struct QpCertificate {
  double stationarity = 0.0;          // |Hx - b - G'y|_inf
  double primal_infeasibility = 0.0;  // max(h - Gx, 0)
  double dual_infeasibility = 0.0;    // max(-y, 0)
  double complementarity = 0.0;       // max |y_i (Gx - h)_i|

  double worst() const;
};

QpCertificate kkt_certificate(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                              const Eigen::MatrixXd& constraints, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
  QpCertificate certificate;
  int iterations = 0;
  bool converged = false;
  bool polished = false;
};

/// Returns the best iterate found when the iteration cap is hit
/// (converged = false); never throws for non-convergence.
QpResult solve_qp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& linear,
                  const Eigen::MatrixXd& constraints, const Eigen::VectorXd& lower,
                  const QpSettings& settings = {});

}  // namespace npivlab
