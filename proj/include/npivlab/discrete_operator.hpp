#pragma once

// Discretized conditional-expectation operator (A phi)(z) = E[phi(X) | Z = z]
// between L2(X) (x-grid quadrature) and L2(Z) (z-grid quadrature times f_Z).

#include "npivlab/dgp.hpp"
#include "npivlab/function_space.hpp"

#include <Eigen/Dense>

#include <vector>

namespace npivlab {

class DiscreteOperator {
 public:
  /// `kernel` is z.size() x x.size() with x-weights folded in; rows are
  /// expected to sum to one. `fz_weights` are z-quadrature weights times f_Z.
  DiscreteOperator(GridPtr x_grid, GridPtr z_grid, Eigen::MatrixXd kernel,
                   Eigen::VectorXd fz_weights, Eigen::VectorXd raw_row_sums = {},
                   std::vector<std::size_t> flagged_nodes = {});

  const GridPtr& x_grid() const { return x_grid_; }
  const GridPtr& z_grid() const { return z_grid_; }
  const Eigen::MatrixXd& kernel() const { return kernel_; }
  const Eigen::VectorXd& fz_weights() const { return fz_weights_; }
  /// Quadrature row sums before normalization (population mode).
  const Eigen::VectorXd& raw_row_sums() const { return raw_row_sums_; }
  /// z-nodes excluded from fz_weights (sampled mode, f_Z estimate too small).
  const std::vector<std::size_t>& flagged_nodes() const { return flagged_; }

  /// F^{1/2} K W^{-1/2}: the operator in orthonormal coordinates of the two
  /// weighted spaces.
  Eigen::MatrixXd weighted_matrix() const;

 private:
  GridPtr x_grid_;
  GridPtr z_grid_;
  Eigen::MatrixXd kernel_;
  Eigen::VectorXd fz_weights_;
  Eigen::VectorXd raw_row_sums_;
  std::vector<std::size_t> flagged_;
};

DiscreteOperator discretize(const Dgp& dgp, const GridPtr& x_grid, const GridPtr& z_grid);

GridFunction apply(const DiscreteOperator& a, const GridFunction& phi);

/// m(phi, z) = (A phi)(z) - r(z).
GridFunction residual_m(const DiscreteOperator& a, const GridFunction& phi,
                        const GridFunction& r);

/// Q(phi) = sum_j fz_j m(phi, z_j)^2.
double q_infinity(const DiscreteOperator& a, const GridFunction& phi, const GridFunction& r);

/// fz-weighted L2(Z) inner product of two functions on the z-grid.
double z_inner_product(const DiscreteOperator& a, const GridFunction& f, const GridFunction& g);
double z_norm(const DiscreteOperator& a, const GridFunction& f);

/// Adjoint with respect to <.,.>_{L2(Z), fz} and <.,.>_{L2(X)}: W^{-1} K^T F psi.
GridFunction adjoint_apply(const DiscreteOperator& a, const GridFunction& psi);

/// Thin SVD of the weighted matrix. Columns of `left` are orthonormal in
/// R^{z} (weighted coordinates), columns of `right` in R^{x}.
struct OperatorSvd {
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd left;
  Eigen::MatrixXd right;
};

OperatorSvd weighted_svd(const DiscreteOperator& a);

struct SvdReport {
  std::vector<double> singular_values;  // nonincreasing
  std::size_t numerical_rank = 0;       // count above tolerance * sigma_1
  double rank_tolerance = 1e-12;
  double decay_fit = 0.0;  // least-squares slope of log sigma_k against k
};

SvdReport svd_report(const DiscreteOperator& a, double rank_tolerance = 1e-12);

}  // namespace npivlab
