#include "npivlab/discrete_operator.hpp"

#include "npivlab/error.hpp"

#include <cmath>

namespace npivlab {

namespace {

Eigen::VectorXd grid_weights(const Grid& g) {
  const auto w = g.weights();
  return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

}  // namespace

DiscreteOperator::DiscreteOperator(GridPtr x_grid, GridPtr z_grid, Eigen::MatrixXd kernel,
                                   Eigen::VectorXd fz_weights, Eigen::VectorXd raw_row_sums,
                                   std::vector<std::size_t> flagged_nodes)
    : x_grid_(std::move(x_grid)),
      z_grid_(std::move(z_grid)),
      kernel_(std::move(kernel)),
      fz_weights_(std::move(fz_weights)),
      raw_row_sums_(std::move(raw_row_sums)),
      flagged_(std::move(flagged_nodes)) {
  require(x_grid_ && z_grid_, ErrorCode::invalid_argument, "operator needs both grids");
  require(kernel_.rows() == static_cast<Eigen::Index>(z_grid_->size()) &&
              kernel_.cols() == static_cast<Eigen::Index>(x_grid_->size()),
          ErrorCode::invalid_argument, "kernel shape does not match the grids");
  require(fz_weights_.size() == kernel_.rows(), ErrorCode::invalid_argument,
          "fz_weights length does not match the z-grid");
  require((fz_weights_.array() >= 0.0).all(), ErrorCode::invalid_argument,
          "fz_weights must be nonnegative");
  require(kernel_.allFinite(), ErrorCode::numerical, "kernel has non-finite entries");
}

Eigen::MatrixXd DiscreteOperator::weighted_matrix() const {
  const Eigen::VectorXd wx = grid_weights(*x_grid_);
  return fz_weights_.cwiseSqrt().asDiagonal() * kernel_ *
         wx.cwiseSqrt().cwiseInverse().asDiagonal();
}

DiscreteOperator discretize(const Dgp& dgp, const GridPtr& x_grid, const GridPtr& z_grid) {
  Eigen::VectorXd raw;
  Eigen::MatrixXd k = dgp.conditional_kernel(*x_grid, *z_grid, &raw);
  Eigen::VectorXd fz = grid_weights(*z_grid);
  const auto z = z_grid->nodes();
  for (Eigen::Index j = 0; j < fz.size(); ++j) fz(j) *= dgp.f_z(z[static_cast<std::size_t>(j)]);
  return {x_grid, z_grid, std::move(k), std::move(fz), std::move(raw)};
}

GridFunction apply(const DiscreteOperator& a, const GridFunction& phi) {
  require_same_grid(phi.grid(), *a.x_grid(), "apply");
  return GridFunction::from_vector(a.z_grid(), a.kernel() * phi.vec());
}

GridFunction residual_m(const DiscreteOperator& a, const GridFunction& phi,
                        const GridFunction& r) {
  require_same_grid(r.grid(), *a.z_grid(), "residual_m");
  return apply(a, phi) - r;
}

double z_inner_product(const DiscreteOperator& a, const GridFunction& f, const GridFunction& g) {
  require_same_grid(f.grid(), *a.z_grid(), "z_inner_product");
  require_same_grid(g.grid(), *a.z_grid(), "z_inner_product");
  return (a.fz_weights().array() * f.vec().array() * g.vec().array()).sum();
}

double z_norm(const DiscreteOperator& a, const GridFunction& f) {
  return std::sqrt(z_inner_product(a, f, f));
}

double q_infinity(const DiscreteOperator& a, const GridFunction& phi, const GridFunction& r) {
  const GridFunction m = residual_m(a, phi, r);
  return z_inner_product(a, m, m);
}

GridFunction adjoint_apply(const DiscreteOperator& a, const GridFunction& psi) {
  require_same_grid(psi.grid(), *a.z_grid(), "adjoint_apply");
  const Eigen::VectorXd wx = grid_weights(*a.x_grid());
  const Eigen::VectorXd v =
      (a.kernel().transpose() * a.fz_weights().cwiseProduct(psi.vec())).cwiseQuotient(wx);
  return GridFunction::from_vector(a.x_grid(), v);
}

OperatorSvd weighted_svd(const DiscreteOperator& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a.weighted_matrix(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) fail(ErrorCode::numerical, "SVD of the operator failed");
  return {svd.singularValues(), svd.matrixU(), svd.matrixV()};
}

SvdReport svd_report(const DiscreteOperator& a, double rank_tolerance) {
  const OperatorSvd svd = weighted_svd(a);
  SvdReport report;
  report.rank_tolerance = rank_tolerance;
  const Eigen::VectorXd& s = svd.singular_values;
  report.singular_values.assign(s.data(), s.data() + s.size());
  if (s.size() == 0 || s(0) <= 0.0) return report;

  const double cut = rank_tolerance * s(0);
  std::size_t rank = 0;
  while (rank < report.singular_values.size() && report.singular_values[rank] > cut) ++rank;
  report.numerical_rank = rank;

  if (rank >= 2) {
    double sk = 0.0, sl = 0.0, skk = 0.0, skl = 0.0;
    for (std::size_t k = 0; k < rank; ++k) {
      const double kd = static_cast<double>(k + 1);
      const double l = std::log(report.singular_values[k]);
      sk += kd;
      sl += l;
      skk += kd * kd;
      skl += kd * l;
    }
    const double n = static_cast<double>(rank);
    report.decay_fit = (n * skl - sk * sl) / (n * skk - sk * sk);
  }
  return report;
}

}  // namespace npivlab
