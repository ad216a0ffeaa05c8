#pragma once

// Shape-preserving perturbation sequences phi_n = phi_0 + eps * psi_n with
// unit-norm psi_n whose image under any bounded conditional-expectation
// operator fades, plus closed forms used as oracles.

#include "npivlab/function_space.hpp"

#include <string_view>

namespace npivlab {

enum class Family {
  /// psi_n(x) = -(2n+1)^{1/2} (1-x)^n: nondecreasing, nonpositive.
  monotone,
  /// psi_n(x) = (2n+1)^{1/2} (2^{2n+1}-1)^{-1/2} (1+x)^n: positive, all
  /// derivatives nonnegative.
  nonneg,
};

std::string_view to_string(Family f);
Family family_from_string(std::string_view name);

inline constexpr unsigned kMaxSequenceIndex = 200;

struct CounterexampleSpec {
  Family family = Family::monotone;
  unsigned n = 0;
  double epsilon = 0.1;
};

struct PerturbedFunction {
  GridFunction base;
  CounterexampleSpec spec;
  GridFunction result;
};

/// Pointwise value of psi_n; all powers taken in log space.
double psi_value(Family family, unsigned n, double x);

/// psi_n sampled at the grid nodes. n > 200 is out of range.
GridFunction psi(const CounterexampleSpec& spec, const GridPtr& grid);

/// base + epsilon * psi_n on the base grid.
PerturbedFunction perturb(const GridFunction& base, const CounterexampleSpec& spec);

/// density_sup * integral_0^1 |psi_n|, the bound on sup_z |(A psi_n)(z)|
/// for any kernel with f_{X|Z} <= density_sup.
double analytic_sup_A_psi_bound(const CounterexampleSpec& spec, double density_sup);

/// Closed-form first-order Sobolev norm of psi_n (1 for n = 0).
double analytic_sobolev_norm(const CounterexampleSpec& spec);

}  // namespace npivlab
