#pragma once

// Grids, quadrature, L2/Sobolev geometry on [0,1] and discrete shape checks.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace npivlab {

enum class GridRule {
  gauss_legendre,
  uniform_trapezoid,
  // Gauss-Legendre in the normal-score coordinate a = Phi^{-1}(x) on
  // [-kNormalScoreHalfWidth, kNormalScoreHalfWidth], weights proportional to
  // the standard normal density. Integrates functions of Phi^{-1}(x)
  // spectrally; used for the compactness diagnostic.
  normal_scores,
  custom,
};

inline constexpr double kNormalScoreHalfWidth = 7.0;

std::string_view to_string(GridRule rule);
GridRule grid_rule_from_string(std::string_view name);

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Quadrature rule on [0,1]. Immutable; shared between GridFunctions.
class Grid {
 public:
  std::size_t size() const { return nodes_.size(); }
  GridRule rule() const { return rule_; }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }
  /// Normal scores Phi^{-1}(x_i); -inf/+inf at x = 0/1.
  std::span<const double> scores() const { return scores_; }
  /// Barycentric interpolation weights (Gauss-Legendre only, else empty).
  std::span<const double> barycentric_weights() const { return bary_; }
  /// Node spacing of a uniform grid.
  double step() const;

 private:
  Grid() = default;

  GridRule rule_ = GridRule::custom;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> scores_;
  std::vector<double> bary_;

  friend GridPtr make_grid(std::size_t size, GridRule rule);
  friend GridPtr make_custom_grid(std::vector<double> nodes,
                                  std::vector<double> weights);
};

/// size >= 2. normal_scores is limited to 512 nodes (node separation in
/// double precision near x = 1).
GridPtr make_grid(std::size_t size, GridRule rule);

/// Arbitrary rule; nodes strictly increasing in [0,1], positive weights
/// summing to one. A single node is allowed.
GridPtr make_custom_grid(std::vector<double> nodes, std::vector<double> weights);

bool same_grid(const Grid& a, const Grid& b);

/// Function sampled at the nodes of a grid.
class GridFunction {
 public:
  GridFunction(GridPtr grid, std::vector<double> values);

  static GridFunction constant(GridPtr grid, double value);
  static GridFunction sample(GridPtr grid, const std::function<double(double)>& f);
  static GridFunction from_vector(GridPtr grid, const Eigen::VectorXd& v);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const& { return values_; }
  std::vector<double> values() && { return std::move(values_); }
  double operator[](std::size_t i) const { return values_[i]; }
  Eigen::Map<const Eigen::VectorXd> vec() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

GridFunction operator+(const GridFunction& a, const GridFunction& b);
GridFunction operator-(const GridFunction& a, const GridFunction& b);
GridFunction operator*(double c, const GridFunction& f);

/// Throws grid_mismatch unless both functions live on the same rule.
void require_same_grid(const Grid& a, const Grid& b, std::string_view where);

double inner_product(const GridFunction& f, const GridFunction& g);
double l2_norm(const GridFunction& f);

/// Rows map values on `source` to values at the nodes of `target`.
/// Barycentric polynomial interpolation from Gauss-Legendre sources,
/// piecewise linear otherwise (constant beyond the outermost nodes).
Eigen::MatrixXd interpolation_matrix(const Grid& source, const Grid& target);
GridFunction resample(const GridFunction& f, const GridPtr& target);

/// Exact derivative of the interpolating polynomial on Gauss-Legendre grids;
/// three-point (second-order) finite differences elsewhere.
Eigen::MatrixXd differentiation_matrix(const Grid& grid);

/// First derivative on a uniform inspection grid (>= 3 nodes): central
/// differences inside, second-order one-sided at both ends.
GridFunction derivative(const GridFunction& f, const GridPtr& inspection_grid);

/// First-order Sobolev norm (|f|^2 + |f'|^2)^{1/2}.
double sobolev_norm(const GridFunction& f);

struct ShapeConstraint {
  enum class Kind { nonnegative, monotone_nondecreasing, convex, derivative_sign };

  Kind kind = Kind::nonnegative;
  unsigned order = 0;  // m for derivative_sign
  double tolerance = 1e-9;

  static ShapeConstraint nonnegative(double tol = 1e-9);
  static ShapeConstraint monotone(double tol = 1e-9);
  static ShapeConstraint convex(double tol = 1e-9);
  static ShapeConstraint derivative_sign(unsigned m, double tol = 1e-9);

  /// Order of the finite difference the constraint inspects.
  unsigned difference_order() const;
};

std::string to_string(const ShapeConstraint& c);
ShapeConstraint shape_constraint_from_string(std::string_view text, double tol = 1e-9);

struct ShapeVerdict {
  bool satisfied = true;
  std::size_t worst_node = 0;
  double worst_x = 0.0;
  /// Smallest tested difference (negative when violated).
  double worst_slack = 0.0;
};

/// (size - order) x size matrix of order-th forward differences.
Eigen::MatrixXd difference_matrix(std::size_t size, unsigned order);

/// `f` must live on a uniform grid with at least order + 2 nodes.
ShapeVerdict check_shape(const GridFunction& f, const ShapeConstraint& c);
/// Resamples onto `inspection_grid` first.
ShapeVerdict check_shape(const GridFunction& f, const ShapeConstraint& c,
                         const GridPtr& inspection_grid);

}  // namespace npivlab
