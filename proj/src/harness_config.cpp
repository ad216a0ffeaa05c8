#include "npivlab/error.hpp"
#include "npivlab/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace npivlab {

using nlohmann::json;

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::illposedness_demo: return "illposedness_demo";
    case Experiment::svd_report: return "svd_report";
    case Experiment::estimator_comparison: return "estimator_comparison";
    case Experiment::montecarlo: return "montecarlo";
  }
  return {};
}

Experiment experiment_from_string(std::string_view name) {
  if (name == "illposedness_demo" || name == "demo") return Experiment::illposedness_demo;
  if (name == "svd_report" || name == "svd") return Experiment::svd_report;
  if (name == "estimator_comparison" || name == "compare") return Experiment::estimator_comparison;
  if (name == "montecarlo") return Experiment::montecarlo;
  fail(ErrorCode::config, "unknown experiment '" + std::string(name) + "'");
}

GridRule ExperimentConfig::grid_rule() const {
  if (grids.rule) return *grids.rule;
  return experiment == Experiment::svd_report ? GridRule::normal_scores
                                              : GridRule::gauss_legendre;
}

std::vector<ShapeConstraint> ExperimentConfig::shape_constraints() const {
  std::vector<ShapeConstraint> out;
  if (constraints.empty()) {
    out.push_back(ShapeConstraint::monotone(constraint_tolerance));
    if (family == Family::nonneg) {
      out.insert(out.begin(), ShapeConstraint::nonnegative(constraint_tolerance));
      out.push_back(ShapeConstraint::convex(constraint_tolerance));
    }
    return out;
  }
  for (const auto& c : constraints) out.push_back(shape_constraint_from_string(c, constraint_tolerance));
  return out;
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig cfg;
  cfg.experiment = e;
  if (e == Experiment::montecarlo) {
    cfg.solvers = {"naive", "tir"};
    cfg.lambdas = {1e-3};
  }
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCode::config, msg);
  };
  check(std::isfinite(cfg.epsilon) && cfg.epsilon > 0.0, "epsilon must be positive");
  check(std::isfinite(cfg.ball_radius) && cfg.ball_radius > 0.0, "ball_radius must be positive");
  check(cfg.epsilon < cfg.ball_radius,
        "epsilon must be smaller than ball_radius (perturbations stay inside the ball)");
  check(cfg.n_max <= kMaxSequenceIndex, "n_max must not exceed 200");
  check(cfg.replications >= 1, "replications must be at least 1");
  check(std::isfinite(cfg.dgp.rho) && std::abs(cfg.dgp.rho) < 1.0,
        "dgp.rho must satisfy |rho| < 1");
  check(std::isfinite(cfg.dgp.noise_sd) && cfg.dgp.noise_sd >= 0.0,
        "dgp.noise_sd must be nonnegative");
  check(!cfg.lambdas.empty(), "lambdas must not be empty");
  for (double l : cfg.lambdas) {
    check(std::isfinite(l) && l > 0.0, "lambda must be positive (Tikhonov regularization)");
  }
  check(cfg.grids.quadrature >= 2, "grids.quadrature must be at least 2");
  check(cfg.grids.z >= 2, "grids.z must be at least 2");
  check(cfg.grids.inspection >= 5, "grids.inspection must be at least 5");
  if (cfg.grid_rule() == GridRule::normal_scores) {
    check(cfg.grids.quadrature <= 512 && cfg.grids.z <= 512,
          "normal_scores grids are limited to 512 nodes");
  }
  check(cfg.grid_rule() != GridRule::custom, "grids.rule 'custom' is not available in configs");
  for (unsigned n : cfg.perturbation_ns) {
    check(n <= kMaxSequenceIndex, "perturbation_ns entries must not exceed 200");
  }
  check(!cfg.svd_sizes.empty(), "svd_sizes must not be empty");
  for (std::size_t s : cfg.svd_sizes) {
    check(s >= 2, "svd_sizes entries must be at least 2");
    if (cfg.grid_rule() == GridRule::normal_scores) {
      check(s <= 512, "normal_scores grids are limited to 512 nodes");
    }
  }
  for (std::size_t m : cfg.sample_sizes) check(m >= 50, "sample_sizes entries must be at least 50");
  if (cfg.bandwidths.h_x) check(*cfg.bandwidths.h_x > 0.0, "bandwidths.h_x must be positive");
  if (cfg.bandwidths.h_z) check(*cfg.bandwidths.h_z > 0.0, "bandwidths.h_z must be positive");
  check(cfg.constraint_tolerance >= 0.0, "constraint_tolerance must be nonnegative");
  check(!cfg.solvers.empty(), "solvers must not be empty");
  for (const auto& s : cfg.solvers) {
    check(s == "naive" || s == "tir" || s == "constrained",
          "unknown solver '" + s + "' (naive, tir, constrained)");
  }
  try {
    (void)cfg.shape_constraints();
  } catch (const Error& e) {
    fail(ErrorCode::config, std::string("constraints: ") + e.what());
  }
  if (cfg.dgp.phi0.kind == Phi0::Kind::table) {
    try {
      (void)make_dgp(cfg.dgp);
    } catch (const Error& e) {
      fail(ErrorCode::config, std::string("dgp.phi0: ") + e.what());
    }
  }
}

namespace {

json phi0_to_json(const Phi0& p) {
  if (p.kind != Phi0::Kind::table) return p.name();
  return {{"table_x", p.table_x}, {"table_y", p.table_y}};
}

Phi0 phi0_from_json(const json& j) {
  if (j.is_string()) return phi0_from_string(j.get<std::string>());
  Phi0 p;
  p.kind = Phi0::Kind::table;
  p.table_x = j.at("table_x").get<std::vector<double>>();
  p.table_y = j.at("table_y").get<std::vector<double>>();
  return p;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json to_json(const ExperimentConfig& c) {
  return {
      {"experiment", to_string(c.experiment)},
      {"dgp",
       {{"phi0", phi0_to_json(c.dgp.phi0)},
        {"rho", c.dgp.rho},
        {"noise_sd", c.dgp.noise_sd},
        {"independent", c.dgp.independent}}},
      {"grids",
       {{"quadrature", c.grids.quadrature},
        {"inspection", c.grids.inspection},
        {"z", c.grids.z},
        {"rule", c.grids.rule ? json(to_string(*c.grids.rule)) : json(nullptr)}}},
      {"family", to_string(c.family)},
      {"n_max", c.n_max},
      {"epsilon", c.epsilon},
      {"ball_radius", c.ball_radius},
      {"lambdas", c.lambdas},
      {"constraints", c.constraints},
      {"constraint_tolerance", c.constraint_tolerance},
      {"penalty", to_string(c.penalty)},
      {"perturbation_ns", c.perturbation_ns},
      {"svd_sizes", c.svd_sizes},
      {"sample_sizes", c.sample_sizes},
      {"bandwidths",
       {{"h_x", optional_number(c.bandwidths.h_x)}, {"h_z", optional_number(c.bandwidths.h_z)}}},
      {"solvers", c.solvers},
      {"replications", c.replications},
      {"seed", c.seed},
      {"output", c.output},
  };
}

ExperimentConfig from_full_json(const json& j) {
  ExperimentConfig c;
  c.experiment = experiment_from_string(j.at("experiment").get<std::string>());
  const json& d = j.at("dgp");
  c.dgp.phi0 = phi0_from_json(d.at("phi0"));
  c.dgp.rho = d.at("rho").get<double>();
  c.dgp.noise_sd = d.at("noise_sd").get<double>();
  c.dgp.independent = d.at("independent").get<bool>();
  const json& g = j.at("grids");
  c.grids.quadrature = g.at("quadrature").get<std::size_t>();
  c.grids.inspection = g.at("inspection").get<std::size_t>();
  c.grids.z = g.at("z").get<std::size_t>();
  if (!g.at("rule").is_null()) c.grids.rule = grid_rule_from_string(g.at("rule").get<std::string>());
  c.family = family_from_string(j.at("family").get<std::string>());
  c.n_max = j.at("n_max").get<unsigned>();
  c.epsilon = j.at("epsilon").get<double>();
  c.ball_radius = j.at("ball_radius").get<double>();
  c.lambdas = j.at("lambdas").get<std::vector<double>>();
  c.constraints = j.at("constraints").get<std::vector<std::string>>();
  c.constraint_tolerance = j.at("constraint_tolerance").get<double>();
  c.penalty = penalty_from_string(j.at("penalty").get<std::string>());
  c.perturbation_ns = j.at("perturbation_ns").get<std::vector<unsigned>>();
  c.svd_sizes = j.at("svd_sizes").get<std::vector<std::size_t>>();
  c.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
  c.bandwidths.h_x = number_or_null(j.at("bandwidths").at("h_x"));
  c.bandwidths.h_z = number_or_null(j.at("bandwidths").at("h_z"));
  c.solvers = j.at("solvers").get<std::vector<std::string>>();
  c.replications = j.at("replications").get<unsigned>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output = j.at("output").get<std::string>();
  return c;
}

void reject_unknown_keys(const json& user, const json& reference, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) fail(ErrorCode::config, "unknown config key '" + path + "'");
    if (value.is_object() && reference.at(key).is_object() && path != "dgp.phi0") {
      reject_unknown_keys(value, reference.at(key), path);
    }
  }
}

ExperimentConfig from_user_json(const json& user) {
  if (!user.is_object()) fail(ErrorCode::config, "config must be a JSON object");
  Experiment e = Experiment::illposedness_demo;
  if (user.contains("experiment")) {
    if (!user.at("experiment").is_string()) fail(ErrorCode::config, "experiment must be a string");
    e = experiment_from_string(user.at("experiment").get<std::string>());
  }
  json merged = to_json(default_config(e));
  reject_unknown_keys(user, merged, "");
  merged.merge_patch(user);
  // merge_patch drops keys patched to null; restore nullable fields.
  for (const char* k : {"h_x", "h_z"}) {
    if (!merged["bandwidths"].contains(k)) merged["bandwidths"][k] = nullptr;
  }
  if (!merged["grids"].contains("rule")) merged["grids"]["rule"] = nullptr;
  try {
    return from_full_json(merged);
  } catch (const json::exception& ex) {
    fail(ErrorCode::config, std::string("config type error: ") + ex.what());
  } catch (const Error& ex) {
    fail(ErrorCode::config, ex.what());
  }
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::config, where + ": " + ex.what());
  }
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

ExperimentConfig config_from_json(const std::string& text) {
  return from_user_json(parse_json(text, "config"));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const std::string marker = "# config: ";
  if (text.rfind("#", 0) == 0) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line) && line.rfind("#", 0) == 0) {
      if (line.rfind(marker, 0) == 0) return config_from_json(line.substr(marker.size()));
    }
    fail(ErrorCode::config, "'" + path + "' has no '# config:' line");
  }
  return from_user_json(parse_json(text, path));
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  json patch_value;
  try {
    patch_value = json::parse(value);
  } catch (const json::parse_error&) {
    patch_value = value;
  }
  json user = to_json(cfg);
  json::json_pointer ptr("/" + [&] {
    std::string p = key;
    for (char& ch : p) {
      if (ch == '.') ch = '/';
    }
    return p;
  }());
  if (!user.contains(ptr)) fail(ErrorCode::config, "unknown config key '" + key + "'");
  user[ptr] = patch_value;
  if (key == "experiment") {
    // Keep explicit fields; only the experiment tag changes.
    cfg = from_user_json(user);
    return;
  }
  try {
    cfg = from_full_json(user);
  } catch (const json::exception& ex) {
    fail(ErrorCode::config, "bad value for '" + key + "': " + ex.what());
  } catch (const Error& ex) {
    fail(ErrorCode::config, "bad value for '" + key + "': " + ex.what());
  }
}

}  // namespace npivlab
