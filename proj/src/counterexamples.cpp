#include "npivlab/counterexamples.hpp"

#include "npivlab/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace npivlab {

namespace {

// log(2^k - 1) without forming 2^k.
double log_pow2_minus_one(double k) {
  return k * std::numbers::ln2 + std::log1p(-std::exp2(-k));
}

// log of the nonneg-family normalizer (2n+1)^{1/2} (2^{2n+1}-1)^{-1/2}.
double log_nonneg_scale(unsigned n) {
  const double two_n1 = 2.0 * n + 1.0;
  return 0.5 * std::log(two_n1) - 0.5 * log_pow2_minus_one(two_n1);
}

void check_index(unsigned n) {
  require(n <= kMaxSequenceIndex, ErrorCode::out_of_range,
          "sequence index n = " + std::to_string(n) + " exceeds " +
              std::to_string(kMaxSequenceIndex));
}

}  // namespace

std::string_view to_string(Family f) {
  return f == Family::monotone ? "monotone" : "nonneg";
}

Family family_from_string(std::string_view name) {
  if (name == "monotone") return Family::monotone;
  if (name == "nonneg") return Family::nonneg;
  fail(ErrorCode::invalid_argument, "unknown counterexample family '" + std::string(name) + "'");
}

double psi_value(Family family, unsigned n, double x) {
  check_index(n);
  const double two_n1 = 2.0 * n + 1.0;
  if (family == Family::monotone) {
    if (n == 0) return -1.0;
    return -std::exp(0.5 * std::log(two_n1) + n * std::log1p(-x));
  }
  if (n == 0) return 1.0;
  return std::exp(log_nonneg_scale(n) + n * std::log1p(x));
}

GridFunction psi(const CounterexampleSpec& spec, const GridPtr& grid) {
  check_index(spec.n);
  return GridFunction::sample(grid, [&](double x) { return psi_value(spec.family, spec.n, x); });
}

PerturbedFunction perturb(const GridFunction& base, const CounterexampleSpec& spec) {
  require(spec.epsilon > 0.0, ErrorCode::invalid_argument, "epsilon must be positive");
  const GridFunction direction = psi(spec, base.grid_ptr());
  return {base, spec, base + spec.epsilon * direction};
}

double analytic_sup_A_psi_bound(const CounterexampleSpec& spec, double density_sup) {
  require(density_sup > 0.0, ErrorCode::invalid_argument, "density_sup must be positive");
  check_index(spec.n);
  const double n = spec.n;
  if (spec.family == Family::monotone) {
    // integral (1-x)^n = 1/(n+1)
    return density_sup * std::sqrt(2.0 * n + 1.0) / (n + 1.0);
  }
  if (spec.n == 0) return density_sup;
  // integral (1+x)^n = (2^{n+1}-1)/(n+1)
  return density_sup * std::exp(log_nonneg_scale(spec.n) + log_pow2_minus_one(n + 1.0)) /
         (n + 1.0);
}

double analytic_sobolev_norm(const CounterexampleSpec& spec) {
  check_index(spec.n);
  if (spec.n == 0) return 1.0;
  const double n = spec.n;
  double seminorm_sq = n * n * (2.0 * n + 1.0) / (2.0 * n - 1.0);
  if (spec.family == Family::nonneg) {
    seminorm_sq *=
        std::exp(log_pow2_minus_one(2.0 * n - 1.0) - log_pow2_minus_one(2.0 * n + 1.0));
  }
  return std::sqrt(1.0 + seminorm_sq);
}

}  // namespace npivlab
