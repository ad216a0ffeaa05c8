#pragma once

// Estimators of phi_0 from (A, r): Tikhonov with a Sobolev (or L2) penalty,
// the unregularized minimum-norm least-squares solve, shape-constrained
// quadratic programs, the kernel plug-in construction of (A, r) from a
// sample, and a perturbation-amplification probe.

#include "npivlab/counterexamples.hpp"
#include "npivlab/dgp.hpp"
#include "npivlab/discrete_operator.hpp"
#include "npivlab/function_space.hpp"
#include "npivlab/qp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace npivlab {

enum class Penalty { sobolev_first_order, l2_only };

std::string_view to_string(Penalty p);
Penalty penalty_from_string(std::string_view name);

/// Bandwidths for the sampled (kernel plug-in) mode; unset means the
/// rule of thumb 1.06 * sd * m^{-1/5}.
struct SampledMode {
  std::optional<double> h_x;
  std::optional<double> h_z;
};

struct TirConfig {
  double lambda = 1e-4;
  Penalty penalty = Penalty::sobolev_first_order;
  std::optional<SampledMode> sampled;  // population mode when empty
};

/// Shape restrictions imposed on the resampled estimate at the nodes of a
/// uniform inspection grid.
struct ConstraintSet {
  std::vector<ShapeConstraint> constraints;
  GridPtr inspection_grid;

  bool empty() const { return constraints.empty(); }
  std::size_t expected_rows() const;
  /// Stacked difference rows acting on x-grid values: D_k R for each
  /// constraint, R the interpolation onto the inspection grid.
  Eigen::MatrixXd encode(const Grid& x_grid) const;
};

enum class SolveStatus { converged, not_converged };

std::string_view to_string(SolveStatus s);

struct ConstraintVerdict {
  ShapeConstraint constraint;
  ShapeVerdict verdict;
};

struct EstimateResult {
  explicit EstimateResult(GridFunction phi) : phi_hat(std::move(phi)) {}

  GridFunction phi_hat;
  double objective = 0.0;  // Q(phi_hat) + lambda * penalty^2
  double penalty = 0.0;
  double lambda_used = 0.0;
  double kkt_residual = 0.0;
  double condition_diagnostic = 0.0;
  std::vector<ConstraintVerdict> constraint_verdicts;
  SolveStatus status = SolveStatus::converged;
  int iterations = 0;

  bool constraints_ok() const;
};

/// Minimizes Q(phi) + lambda * |phi|_H^2 through the normal equations
/// (A*A + lambda P) phi = A* r, solved in L2-orthonormal coordinates.
/// condition_diagnostic is the smallest eigenvalue of that system (>= lambda).
EstimateResult tir_estimate(const DiscreteOperator& a, const GridFunction& r,
                            const TirConfig& cfg);

/// Logarithmically spaced values from lo to hi inclusive, `per_decade` per
/// factor of ten.
std::vector<double> lambda_sweep(double lo, double hi, unsigned per_decade = 1);

inline constexpr double kNaiveRelativeCutoff = 1e-12;

/// Minimum-norm least squares by SVD truncated at 1e-12 * sigma_1.
/// condition_diagnostic is the smallest retained singular value.
EstimateResult naive_estimate(const DiscreteOperator& a, const GridFunction& r);
EstimateResult naive_estimate(const DiscreteOperator& a, const OperatorSvd& svd,
                              const GridFunction& r);

/// Same objective as tir_estimate (lambda >= 0) under the constraint set.
/// Non-convergence is reported through `status`, carrying the best iterate.
EstimateResult constrained_estimate(const DiscreteOperator& a, const GridFunction& r,
                                    const TirConfig& cfg, const ConstraintSet& constraints,
                                    const QpSettings& settings = {});

struct PluginEstimate {
  DiscreteOperator op;
  GridFunction r_hat;
  double h_x = 0.0;
  double h_z = 0.0;
};

inline constexpr double kDensityFloor = 1e-6;

/// Kernel plug-in operator and reduced form: product-Gaussian density
/// estimate of (X, Z) on the lattice, f_Z by integrating out x, and a
/// Nadaraya-Watson regression of Y on Z at the z-nodes. Nodes whose f_Z
/// estimate falls below 1e-6 are flagged and get zero fz weight; a sample
/// with no spread in z, or with more than half the nodes flagged, raises
/// degenerate_sample.
PluginEstimate sampled_plugin(const Sample& sample, const TirConfig& cfg,
                              const GridPtr& x_grid, const GridPtr& z_grid);

double rule_of_thumb_bandwidth(std::span<const double> values);

struct ProbeDirection {
  std::string name;
  GridFunction direction;  // on the z-grid, unit fz-weighted norm
};

/// Left singular function of the smallest retained singular value, the
/// normalized images A psi_n for each requested n, and seeded white noise.
std::vector<ProbeDirection> standard_probe_directions(const DiscreteOperator& a,
                                                      Family family,
                                                      const std::vector<unsigned>& psi_indices,
                                                      std::uint64_t noise_seed);

struct ProbeRow {
  double delta = 0.0;
  std::string direction;
  std::string solver;
  double amplification = 0.0;  // |phi(r + delta v) - phi(r)| / delta
  double bound = 0.0;          // 1/(2 sqrt(lambda)) for tir, else NaN
};

/// Runs naive, tir and (if constraints are given) constrained solves at r
/// and at r + delta v for every delta and direction.
std::vector<ProbeRow> stability_probe(const DiscreteOperator& a, const GridFunction& r,
                                      const std::vector<double>& deltas,
                                      const std::vector<ProbeDirection>& directions,
                                      const TirConfig& cfg,
                                      const ConstraintSet* constraints = nullptr);

}  // namespace npivlab
