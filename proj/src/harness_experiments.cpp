#include "npivlab/discrete_operator.hpp"
#include "npivlab/error.hpp"
#include "npivlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace npivlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Grids {
  GridPtr x;
  GridPtr z;
  GridPtr inspection;
};

Grids make_grids(const ExperimentConfig& cfg) {
  return {make_grid(cfg.grids.quadrature, cfg.grid_rule()),
          make_grid(cfg.grids.z, cfg.grid_rule()),
          make_grid(cfg.grids.inspection, GridRule::uniform_trapezoid)};
}

void describe(ResultTable& t, const ExperimentConfig& cfg) {
  t.add_metadata("experiment", std::string(to_string(cfg.experiment)));
  t.add_metadata("version", kVersion);
  t.add_metadata("seed", std::to_string(cfg.seed));
  t.add_metadata("config", config_to_json(cfg));
}

void require_experiment(const ExperimentConfig& cfg, Experiment e) {
  validate(cfg);
  require(cfg.experiment == e, ErrorCode::config,
          "config is for experiment '" + std::string(to_string(cfg.experiment)) + "', not '" +
              std::string(to_string(e)) + "'");
}

GridFunction sample_phi0(const Dgp& dgp, const GridPtr& grid) {
  return GridFunction::sample(grid, [&](double x) { return dgp.phi0(x); });
}

std::string fmt(double v) { return format_cell(Cell{v}); }

bool has_solver(const ExperimentConfig& cfg, std::string_view s) {
  return std::find(cfg.solvers.begin(), cfg.solvers.end(), s) != cfg.solvers.end();
}

}  // namespace

ResultTable run_illposedness_demo(const ExperimentConfig& cfg) {
  require_experiment(cfg, Experiment::illposedness_demo);
  const Dgp dgp = make_dgp(cfg.dgp);
  const Grids g = make_grids(cfg);
  const DiscreteOperator a = discretize(dgp, g.x, g.z);
  const GridFunction phi0 = sample_phi0(dgp, g.x);
  const GridFunction r = apply(a, phi0);

  ResultTable t({"n", "l2_dist", "q_infty", "analytic_bound", "sup_A_psi", "sobolev_norm_phi_n",
                 "monotone_ok", "nonneg_ok", "convex_ok"});
  describe(t, cfg);
  t.add_metadata("sup_fz", fmt(dgp.sup_fz()));
  t.add_metadata("sup_fxz", fmt(dgp.sup_fxz()));

  // Shape flags use a fixed 1e-9 tolerance on raw differences.
  const ShapeConstraint checks[] = {ShapeConstraint::monotone(), ShapeConstraint::nonnegative(),
                                    ShapeConstraint::convex()};
  const std::size_t count = cfg.n_max + 1;
  std::vector<std::vector<Cell>> rows(count);
  parallel_for(count, [&](std::size_t i) {
    const auto n = static_cast<unsigned>(i);
    const CounterexampleSpec spec{cfg.family, n, cfg.epsilon};
    const PerturbedFunction p = perturb(phi0, spec);
    const GridFunction image = apply(a, psi({cfg.family, n, 1.0}, g.x));
    double sup = 0.0;
    for (double v : image.values()) sup = std::max(sup, std::abs(v));
    const double b = analytic_sup_A_psi_bound({cfg.family, n, 1.0}, dgp.sup_fxz());
    std::vector<Cell> row{static_cast<std::int64_t>(n), l2_norm(p.result - phi0),
                          q_infinity(a, p.result, r),
                          cfg.epsilon * cfg.epsilon * dgp.sup_fz() * b * b, sup,
                          sobolev_norm(p.result)};
    for (const auto& c : checks) row.emplace_back(check_shape(p.result, c, g.inspection).satisfied);
    rows[i] = std::move(row);
  });
  for (auto& row : rows) t.add_row(std::move(row));

  double worst_dist = 0.0;
  bool nonincreasing = true;
  bool shapes = true;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    worst_dist = std::max(worst_dist, std::abs(t.number(i, "l2_dist") - cfg.epsilon));
    if (i > 5 && t.number(i, "q_infty") > t.number(i - 1, "q_infty")) nonincreasing = false;
    shapes = shapes && t.number(i, "monotone_ok") != 0.0;
    if (cfg.family == Family::nonneg) {
      shapes = shapes && t.number(i, "nonneg_ok") != 0.0 && t.number(i, "convex_ok") != 0.0;
    }
  }
  t.add_postcondition("l2_dist_equals_epsilon", worst_dist <= 1e-9,
                      "max deviation " + fmt(worst_dist));
  t.add_postcondition("q_infty_nonincreasing_after_5", nonincreasing);
  const double q_first = t.number(0, "q_infty");
  const double q_last = t.number(t.row_count() - 1, "q_infty");
  t.add_postcondition("q_infty_final_below_first_over_50", q_last < q_first / 50.0,
                      "first/final = " + fmt(q_first / q_last));
  t.add_postcondition("family_shape_constraints_hold", shapes);
  return t;
}

ResultTable run_svd_report(const ExperimentConfig& cfg) {
  require_experiment(cfg, Experiment::svd_report);
  const Dgp dgp = make_dgp(cfg.dgp);
  ResultTable t({"grid_size", "k", "sigma_k", "sigma_ratio", "above_rank_tolerance"});
  describe(t, cfg);

  std::vector<SvdReport> reports(cfg.svd_sizes.size());
  parallel_for(reports.size(), [&](std::size_t i) {
    const GridPtr grid = make_grid(cfg.svd_sizes[i], cfg.grid_rule());
    reports[i] = svd_report(discretize(dgp, grid, grid));
  });
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const SvdReport& rep = reports[i];
    const std::string size = std::to_string(cfg.svd_sizes[i]);
    t.add_metadata("numerical_rank_" + size, std::to_string(rep.numerical_rank));
    t.add_metadata("decay_fit_" + size, fmt(rep.decay_fit));
    for (std::size_t k = 0; k < rep.singular_values.size(); ++k) {
      const double s = rep.singular_values[k];
      t.add_row({static_cast<std::int64_t>(cfg.svd_sizes[i]), static_cast<std::int64_t>(k + 1), s,
                 s / rep.singular_values.front(), k < rep.numerical_rank});
    }
  }

  if (reports.size() >= 2) {
    double worst = 0.0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
      const std::size_t lead = std::min<std::size_t>(
          {10, reports[0].singular_values.size(), reports[i].singular_values.size()});
      for (std::size_t k = 0; k < lead; ++k) {
        worst = std::max(worst,
                         std::abs(reports[i].singular_values[k] - reports[0].singular_values[k]));
      }
    }
    t.add_postcondition("leading_10_stable_across_sizes", worst <= 1e-8,
                        "max difference " + fmt(worst));
  }
  if (!cfg.dgp.independent && cfg.dgp.rho != 0.0) {
    bool decreasing = true;
    for (const auto& rep : reports) {
      const std::size_t lead = std::min<std::size_t>(10, rep.singular_values.size());
      for (std::size_t k = 1; k < lead; ++k) {
        decreasing = decreasing && rep.singular_values[k] < rep.singular_values[k - 1];
      }
    }
    t.add_postcondition("leading_10_strictly_decreasing", decreasing);
  }
  return t;
}

ResultTable run_estimator_comparison(const ExperimentConfig& cfg) {
  require_experiment(cfg, Experiment::estimator_comparison);
  const Dgp dgp = make_dgp(cfg.dgp);
  const Grids g = make_grids(cfg);
  const DiscreteOperator a = discretize(dgp, g.x, g.z);
  const GridFunction phi0 = sample_phi0(dgp, g.x);
  const GridFunction r0 = apply(a, phi0);
  const ConstraintSet constraints{cfg.shape_constraints(), g.inspection};

  // Cells: (solver, lambda); the constrained solver also runs at lambda = 0.
  struct Cfg {
    std::string solver;
    double lambda;
  };
  std::vector<Cfg> variants;
  if (has_solver(cfg, "naive")) variants.push_back({"naive", 0.0});
  if (has_solver(cfg, "constrained")) variants.push_back({"constrained", 0.0});
  for (double l : cfg.lambdas) {
    if (has_solver(cfg, "tir")) variants.push_back({"tir", l});
    if (has_solver(cfg, "constrained")) variants.push_back({"constrained", l});
  }
  const OperatorSvd svd = weighted_svd(a);
  auto solve = [&](const Cfg& v, const GridFunction& r) {
    TirConfig tc{v.lambda, cfg.penalty, std::nullopt};
    if (v.solver == "naive") return naive_estimate(a, svd, r);
    if (v.solver == "tir") return tir_estimate(a, r, tc);
    return constrained_estimate(a, r, tc, constraints);
  };

  const std::size_t nv = variants.size();
  const std::size_t nn = cfg.perturbation_ns.size();
  std::vector<std::optional<EstimateResult>> base(nv);
  std::vector<std::optional<EstimateResult>> moved(nv * nn);
  std::vector<GridFunction> shifts;
  for (unsigned n : cfg.perturbation_ns) {
    shifts.push_back(cfg.epsilon * apply(a, psi({cfg.family, n, 1.0}, g.x)));
  }
  parallel_for(nv * (nn + 1), [&](std::size_t i) {
    const std::size_t v = i % nv;
    const std::size_t cell = i / nv;
    if (cell == 0) {
      base[v] = solve(variants[v], r0);
    } else {
      moved[(cell - 1) * nv + v] = solve(variants[v], r0 + shifts[cell - 1]);
    }
  });

  ResultTable t({"n", "lambda", "solver", "error", "error_vs_phi_n", "data_perturbation",
                 "amplification", "amplification_bound", "kkt_residual", "condition_diagnostic",
                 "constraints_ok", "status", "iterations", "objective", "penalty"});
  describe(t, cfg);
  std::string names;
  for (const auto& c : constraints.constraints) names += (names.empty() ? "" : ";") + to_string(c);
  t.add_metadata("constraints", names);

  bool kkt_ok = true;
  bool shapes_ok = true;
  bool bound_ok = true;
  bool constrained_lambda0_far = true;
  bool tir_beats_lambda0 = true;
  std::map<unsigned, double> lambda0_error;
  std::map<unsigned, double> tir_error;
  for (std::size_t k = 0; k < nn; ++k) {
    const unsigned n = cfg.perturbation_ns[k];
    const GridFunction phi_n = perturb(phi0, {cfg.family, n, cfg.epsilon}).result;
    const double dr = z_norm(a, shifts[k]);
    for (std::size_t v = 0; v < nv; ++v) {
      const EstimateResult& e = *moved[k * nv + v];
      const Cfg& var = variants[v];
      const bool is_tir = var.solver == "tir";
      const bool is_qp = var.solver == "constrained";
      const double err = l2_norm(e.phi_hat - phi0);
      const double amp = dr > 0.0 ? l2_norm(e.phi_hat - base[v]->phi_hat) / dr : kNaN;
      const double bound = is_tir ? 1.0 / (2.0 * std::sqrt(var.lambda)) : kNaN;
      t.add_row({static_cast<std::int64_t>(n), var.lambda, var.solver, err,
                 l2_norm(e.phi_hat - phi_n), dr, amp, bound, e.kkt_residual,
                 e.condition_diagnostic, e.constraints_ok(), std::string(to_string(e.status)),
                 static_cast<std::int64_t>(e.iterations), e.objective, e.penalty});
      if (is_qp) {
        kkt_ok = kkt_ok && e.kkt_residual <= 1e-6;
        shapes_ok = shapes_ok && e.constraints_ok();
        if (var.lambda == 0.0) {
          lambda0_error[n] = err;
          if (n >= 20) constrained_lambda0_far = constrained_lambda0_far && err >= 0.5 * cfg.epsilon;
        }
      }
      if (is_tir) {
        bound_ok = bound_ok && !(amp > bound * (1.0 + 1e-8));
        if (var.lambda == cfg.lambdas.front()) tir_error[n] = err;
      }
    }
  }
  for (const auto& [n, err] : tir_error) {
    if (n >= 20 && lambda0_error.count(n)) {
      tir_beats_lambda0 = tir_beats_lambda0 && err < lambda0_error[n];
    }
  }
  if (has_solver(cfg, "constrained")) {
    t.add_postcondition("constrained_kkt_below_1e-6", kkt_ok);
    t.add_postcondition("constrained_shapes_hold", shapes_ok);
    t.add_postcondition("lambda0_constrained_error_at_least_half_epsilon", constrained_lambda0_far);
  }
  if (has_solver(cfg, "tir")) t.add_postcondition("tir_amplification_within_bound", bound_ok);
  if (has_solver(cfg, "tir") && has_solver(cfg, "constrained")) {
    t.add_postcondition("tir_error_below_lambda0_constrained", tir_beats_lambda0);
  }
  return t;
}

ResultTable run_montecarlo(const ExperimentConfig& cfg) {
  require_experiment(cfg, Experiment::montecarlo);
  const Dgp dgp = make_dgp(cfg.dgp);
  const Grids g = make_grids(cfg);
  const GridFunction phi0 = sample_phi0(dgp, g.x);
  const ConstraintSet constraints{cfg.shape_constraints(), g.inspection};

  struct Variant {
    std::string solver;
    double lambda;
  };
  std::vector<Variant> variants;
  if (has_solver(cfg, "naive")) variants.push_back({"naive", 0.0});
  for (double l : cfg.lambdas) {
    if (has_solver(cfg, "tir")) variants.push_back({"tir", l});
    if (has_solver(cfg, "constrained")) variants.push_back({"constrained", l});
  }

  // Interior error: weighted RMS of phi_hat - phi_0 over x-nodes in [0.1, 0.9].
  const auto xs = g.x->nodes();
  const auto ws = g.x->weights();
  auto interior_error = [&](const GridFunction& phi) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] < 0.1 || xs[i] > 0.9) continue;
      const double d = phi[i] - phi0[i];
      num += ws[i] * d * d;
      den += ws[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : kNaN;
  };

  struct Outcome {
    std::string status = "ok";
    double h_x = kNaN, h_z = kNaN;
    std::vector<double> interior, l2;
  };
  const std::size_t reps = cfg.replications;
  const std::size_t cells = cfg.sample_sizes.size() * reps;
  std::vector<Outcome> out(cells);
  parallel_for(cells, [&](std::size_t i) {
    const std::size_t m = cfg.sample_sizes[i / reps];
    const std::uint64_t offset = i % reps;
    Outcome& o = out[i];
    try {
      const Sample s = sample(dgp, m, cfg.seed + offset);
      const TirConfig sampled{cfg.lambdas.front(), cfg.penalty, cfg.bandwidths};
      const PluginEstimate p = sampled_plugin(s, sampled, g.x, g.z);
      o.h_x = p.h_x;
      o.h_z = p.h_z;
      const OperatorSvd svd = weighted_svd(p.op);
      for (const auto& v : variants) {
        const TirConfig tc{v.lambda, cfg.penalty, cfg.bandwidths};
        const GridFunction est = v.solver == "naive" ? naive_estimate(p.op, svd, p.r_hat).phi_hat
                                 : v.solver == "tir"
                                     ? tir_estimate(p.op, p.r_hat, tc).phi_hat
                                     : constrained_estimate(p.op, p.r_hat, tc, constraints).phi_hat;
        o.interior.push_back(interior_error(est));
        o.l2.push_back(l2_norm(est - phi0));
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::degenerate_sample) {
        o.status = "degenerate_sample";
      } else if (e.code() == ErrorCode::numerical || e.code() == ErrorCode::nonconvergence) {
        o.status = "numerical_failure";
      } else {
        throw;
      }
      o.interior.assign(variants.size(), kNaN);
      o.l2.assign(variants.size(), kNaN);
    }
  });

  ResultTable t({"row_type", "seed_offset", "m", "lambda", "solver", "status", "interior_error",
                 "interior_error_sd", "l2_error", "h_x", "h_z", "replications_ok"});
  describe(t, cfg);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    const Outcome& o = out[i];
    if (o.status != "ok") ++failed;
    for (std::size_t v = 0; v < variants.size(); ++v) {
      t.add_row({std::string("replication"), static_cast<std::int64_t>(i % reps),
                 static_cast<std::int64_t>(cfg.sample_sizes[i / reps]), variants[v].lambda,
                 variants[v].solver, o.status, o.interior[v], kNaN, o.l2[v], o.h_x, o.h_z,
                 static_cast<std::int64_t>(o.status == "ok" ? 1 : 0)});
    }
  }
  for (std::size_t mi = 0; mi < cfg.sample_sizes.size(); ++mi) {
    for (std::size_t v = 0; v < variants.size(); ++v) {
      double sum = 0.0, sum_l2 = 0.0;
      std::vector<double> vals;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const Outcome& o = out[mi * reps + rep];
        if (o.status != "ok") continue;
        vals.push_back(o.interior[v]);
        sum += o.interior[v];
        sum_l2 += o.l2[v];
      }
      const double k = static_cast<double>(vals.size());
      const double mean = vals.empty() ? kNaN : sum / k;
      double ss = 0.0;
      for (double x : vals) ss += (x - mean) * (x - mean);
      const double sd = vals.size() > 1 ? std::sqrt(ss / (k - 1.0)) : kNaN;
      t.add_row({std::string("summary"), std::int64_t{-1},
                 static_cast<std::int64_t>(cfg.sample_sizes[mi]), variants[v].lambda,
                 variants[v].solver, std::string(vals.empty() ? "no_successful_replications" : "ok"),
                 mean, sd, vals.empty() ? kNaN : sum_l2 / k, kNaN, kNaN,
                 static_cast<std::int64_t>(vals.size())});
    }
  }
  t.add_postcondition("all_replications_succeeded", failed == 0,
                      std::to_string(failed) + " failed of " + std::to_string(cells));
  return t;
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::illposedness_demo: return run_illposedness_demo(cfg);
    case Experiment::svd_report: return run_svd_report(cfg);
    case Experiment::estimator_comparison: return run_estimator_comparison(cfg);
    case Experiment::montecarlo: return run_montecarlo(cfg);
  }
  fail(ErrorCode::config, "unknown experiment");
}

}  // namespace npivlab
