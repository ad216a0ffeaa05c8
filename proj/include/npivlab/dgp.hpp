#pragma once

// Gaussian-copula data-generating processes on [0,1]^2 with a known
// structural function phi_0 and mean-zero additive noise, so that
// E[Y - phi_0(X) | Z] = 0 holds by construction.

#include "npivlab/function_space.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace npivlab {

struct Phi0 {
  enum class Kind { square, linear, affine_plus_exp, table };

  Kind kind = Kind::square;
  // Piecewise-linear table (kind == table); abscissae strictly increasing.
  std::vector<double> table_x;
  std::vector<double> table_y;

  double operator()(double x) const;
  std::string name() const;
};

Phi0 phi0_from_string(std::string_view name);

struct DgpSpec {
  Phi0 phi0;
  double rho = 0.5;       // Gaussian-copula correlation, |rho| < 1
  double noise_sd = 0.0;  // sigma_U >= 0
  bool independent = false;
};

inline constexpr std::size_t kDensityLattice = 512;

class Dgp {
 public:
  explicit Dgp(DgpSpec spec);

  const DgpSpec& spec() const { return spec_; }
  /// Effective copula correlation (0 in the independent case).
  double rho() const { return spec_.independent ? 0.0 : spec_.rho; }

  double phi0(double x) const { return spec_.phi0(x); }
  double f_xz(double x, double z) const;
  double f_z(double z) const;
  double f_x_given_z(double x, double z) const;
  /// Conditional density in normal-score coordinates a = Phi^{-1}(x),
  /// b = Phi^{-1}(z); avoids re-inverting Phi near the boundary.
  double f_x_given_z_scores(double a, double b) const;

  /// Maxima over the 512 x 512 cell-midpoint lattice. The Gaussian copula is
  /// unbounded at two corners when rho != 0, so these are lattice values.
  double sup_fz() const { return sup_fz_; }
  double sup_fxz() const { return sup_fxz_; }

  /// z.size() x x.size() matrix with entry (j,i) = f(x_i|z_j) w_i / row sum.
  /// `raw_row_sums`, if given, receives the quadrature row sums before
  /// normalization.
  Eigen::MatrixXd conditional_kernel(const Grid& x_grid, const Grid& z_grid,
                                     Eigen::VectorXd* raw_row_sums = nullptr) const;

 private:
  DgpSpec spec_;
  double sup_fz_ = 1.0;
  double sup_fxz_ = 1.0;
};

Dgp make_dgp(const DgpSpec& spec);

/// r(z_j) = E[Y | Z = z_j] = integral phi_0(x) f(x|z_j) dx on phi0's grid.
GridFunction reduced_form(const Dgp& dgp, const GridFunction& phi0, const GridPtr& z_grid);

struct Sample {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z;
  std::uint64_t seed = 0;

  std::size_t size() const { return x.size(); }
};

/// X = Phi(V), Z = Phi(W) with corr(V, W) = rho, Y = phi_0(X) + sigma_U eta.
Sample sample(const Dgp& dgp, std::size_t m, std::uint64_t seed);

struct DensityBounds {
  double sup_fz = 0.0;
  double sup_fxz = 0.0;
  bool bounded = false;
};

DensityBounds bounded_density_check(const Dgp& dgp, double limit = 1e3);

}  // namespace npivlab
