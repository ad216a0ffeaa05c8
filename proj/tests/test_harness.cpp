#include <doctest.h>

#include "npivlab/error.hpp"
#include "npivlab/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace npivlab;

namespace {

std::string config_error(const ExperimentConfig& cfg) {
  try {
    validate(cfg);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    return e.what();
  }
  return {};
}

std::string strip_timestamp(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("# generated_at:", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("npivlab_test_" + name)).string();
}

struct ThreadEnv {
  explicit ThreadEnv(const char* v) { setenv("NPIVLAB_THREADS", v, 1); }
  ~ThreadEnv() { unsetenv("NPIVLAB_THREADS"); }
};

}  // namespace

TEST_CASE("config validation names the violated rule") {
  std::set<std::string> messages;
  ExperimentConfig c = default_config(Experiment::illposedness_demo);
  CHECK(config_error(c).empty());

  c.epsilon = 0.5;
  messages.insert(config_error(c));
  c = default_config(Experiment::illposedness_demo);
  c.n_max = 201;
  messages.insert(config_error(c));
  c = default_config(Experiment::illposedness_demo);
  c.lambdas = {1e-4, 0.0};
  messages.insert(config_error(c));
  c = default_config(Experiment::illposedness_demo);
  c.replications = 0;
  messages.insert(config_error(c));
  c = default_config(Experiment::illposedness_demo);
  c.dgp.rho = 1.0;
  messages.insert(config_error(c));
  CHECK(messages.size() == 5);
  CHECK(messages.count("") == 0);
  for (const auto& m : messages) MESSAGE(m);

  c = default_config(Experiment::illposedness_demo);
  c.epsilon = 0.6;
  CHECK(config_error(c).find("ball_radius") != std::string::npos);
  c = default_config(Experiment::illposedness_demo);
  c.lambdas = {-1.0};
  CHECK(config_error(c).find("lambda") != std::string::npos);
  c = default_config(Experiment::illposedness_demo);
  c.solvers = {"magic"};
  CHECK(config_error(c).find("magic") != std::string::npos);
  c = default_config(Experiment::illposedness_demo);
  c.constraints = {"concave"};
  CHECK(!config_error(c).empty());
}

TEST_CASE("config JSON round trip, unknown keys and overrides") {
  ExperimentConfig c = default_config(Experiment::estimator_comparison);
  c.dgp.rho = 0.9;
  c.grids.rule = GridRule::normal_scores;
  c.bandwidths.h_x = 0.07;
  c.lambdas = {1e-3, 1e-5};
  c.seed = 18446744073709551615ULL;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.seed == c.seed);

  CHECK_THROWS_AS(config_from_json(R"({"experiment":"svd_report","dgp":{"rhoo":0.1}})"), Error);
  CHECK_THROWS_AS(config_from_json(R"({"epsilon":"big"})"), Error);
  CHECK_THROWS_AS(config_from_json("{not json"), Error);

  const ExperimentConfig partial = config_from_json(R"({"experiment":"montecarlo","replications":3})");
  CHECK(partial.replications == 3);
  CHECK(partial.solvers == std::vector<std::string>{"naive", "tir"});
  CHECK(partial.grid_rule() == GridRule::gauss_legendre);
  CHECK(default_config(Experiment::svd_report).grid_rule() == GridRule::normal_scores);

  ExperimentConfig s = default_config(Experiment::illposedness_demo);
  set_config_value(s, "dgp.rho", "0.25");
  set_config_value(s, "family", "nonneg");
  set_config_value(s, "lambdas", "[0.1,0.01]");
  set_config_value(s, "grids.rule", "uniform_trapezoid");
  CHECK(s.dgp.rho == 0.25);
  CHECK(s.family == Family::nonneg);
  CHECK(s.lambdas == std::vector<double>{0.1, 0.01});
  CHECK(s.grid_rule() == GridRule::uniform_trapezoid);
  CHECK_THROWS_AS(set_config_value(s, "dgp.nope", "1"), Error);
  CHECK_THROWS_AS(set_config_value(s, "n_max", "\"many\""), Error);
}

TEST_CASE("load_config reads JSON files and emitted CSVs") {
  ExperimentConfig c = default_config(Experiment::svd_report);
  c.dgp.rho = 0.3;
  c.svd_sizes = {16, 32};
  const std::string json_path = temp_path("cfg.json");
  std::ofstream(json_path) << config_to_json(c);
  CHECK(config_to_json(load_config(json_path)) == config_to_json(c));

  const std::string csv_path = temp_path("svd.csv");
  emit_csv(run_svd_report(c), csv_path);
  const ExperimentConfig again = load_config(csv_path);
  CHECK(config_to_json(again) == config_to_json(c));
  CHECK(strip_timestamp(to_csv(run_svd_report(again))) == strip_timestamp(read_file(csv_path)));

  try {
    (void)load_config("/nonexistent/dir/cfg.json");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(std::string(e.what()).find("/nonexistent/dir/cfg.json") != std::string::npos);
  }
}

TEST_CASE("csv emission") {
  ResultTable empty({"a", "b,c"});
  empty.add_metadata("note", "line1\nline2");
  const std::string text = to_csv(empty, false);
  CHECK(text == "# note: line1 line2\na,\"b,c\"\n");
  CHECK(parse_csv(text).rows.empty());

  ResultTable t({"x", "label", "flag", "k"});
  const double values[] = {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)};
  for (double v : values) t.add_row({v, std::string("say \"hi\", then\nbye"), v > 0, std::int64_t{-7}});
  CHECK_THROWS_AS(t.add_row({1.0}), Error);
  const ParsedCsv p = parse_csv(to_csv(t));
  REQUIRE(p.rows.size() == 5);
  CHECK(p.header == std::vector<std::string>{"x", "label", "flag", "k"});
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::strtod(p.rows[i][0].c_str(), nullptr) == values[i]);
    CHECK(p.rows[i][1] == "say \"hi\", then\nbye");
    CHECK(p.rows[i][3] == "-7");
  }
  CHECK(format_cell(Cell{std::nan("")}) == "nan");

  try {
    emit_csv(t, "/nonexistent/dir/out.csv");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(std::string(e.what()).find("/nonexistent/dir/out.csv") != std::string::npos);
  }
}

TEST_CASE("illposedness demo") {
  ExperimentConfig c = default_config(Experiment::illposedness_demo);
  const ResultTable t = run_illposedness_demo(c);
  CHECK(t.row_count() == 101);
  CHECK(t.columns().size() == 9);
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    CHECK(std::abs(t.number(i, "l2_dist") - 0.1) < 1e-9);
    CHECK(t.number(i, "monotone_ok") == 1.0);
  }
  // Row n = 0: the perturbation is the constant -epsilon.
  const auto g = make_grid(c.grids.quadrature, GridRule::gauss_legendre);
  const auto shifted = GridFunction::sample(g, [](double x) { return x * x - 0.1; });
  CHECK(t.number(0, "sobolev_norm_phi_n") == doctest::Approx(sobolev_norm(shifted)).epsilon(1e-14));

  ExperimentConfig ind = c;
  ind.dgp.independent = true;
  const ResultTable ti = run_illposedness_demo(ind);
  for (std::size_t i = 0; i < ti.row_count(); ++i) {
    const double n = static_cast<double>(i);
    CHECK(std::abs(ti.number(i, "q_infty") - 0.01 * (2 * n + 1) / ((n + 1) * (n + 1))) < 1e-10);
    CHECK(ti.number(i, "q_infty") <= ti.number(i, "analytic_bound") * (1 + 1e-12));
  }

  ExperimentConfig nn = c;
  nn.family = Family::nonneg;
  const ResultTable tn = run_illposedness_demo(nn);
  for (std::size_t i = 0; i < tn.row_count(); ++i) {
    CHECK(tn.number(i, "convex_ok") == 1.0);
    CHECK(tn.number(i, "nonneg_ok") == 1.0);
  }

  ExperimentConfig bad = c;
  bad.epsilon = 0.7;
  CHECK_THROWS_AS(run_illposedness_demo(bad), Error);
  CHECK_THROWS_AS(run_svd_report(c), Error);
}

TEST_CASE("svd report") {
  ExperimentConfig c = default_config(Experiment::svd_report);
  c.dgp.independent = true;
  ResultTable t = run_svd_report(c);
  CHECK(std::abs(t.number(0, "sigma_k") - 1.0) < 1e-10);
  CHECK(t.number(1, "sigma_k") < 1e-10);

  c.dgp.independent = false;
  c.dgp.rho = 0.5;
  t = run_svd_report(c);
  CHECK(t.postconditions_ok());
  CHECK(t.row_count() == 64 + 128);
  for (std::size_t k = 1; k < 10; ++k) CHECK(t.number(k, "sigma_k") < t.number(k - 1, "sigma_k"));
  const double s10_half = t.number(9, "sigma_ratio");

  c.dgp.rho = 0.9;
  t = run_svd_report(c);
  const double s10_high = t.number(9, "sigma_ratio");
  MESSAGE("sigma_10/sigma_1: rho 0.5 -> " << s10_half << ", rho 0.9 -> " << s10_high);
  CHECK(s10_high > s10_half);
}

TEST_CASE("estimator comparison") {
  ExperimentConfig c = default_config(Experiment::estimator_comparison);
  c.grids.quadrature = 64;
  c.grids.z = 64;
  const ResultTable t = run_estimator_comparison(c);
  CHECK(t.postconditions_ok());
  std::map<std::pair<std::int64_t, std::string>, double> err;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    const auto n = static_cast<std::int64_t>(t.number(i, "n"));
    const std::string& solver = t.text(i, "solver");
    const double lambda = t.number(i, "lambda");
    const std::string key = solver + (solver == "constrained" && lambda == 0.0 ? "0" : "");
    err[{n, key}] = t.number(i, "error");
    if (solver == "naive") CHECK(t.number(i, "condition_diagnostic") > 0.0);
    if (solver == "constrained") {
      CHECK(t.number(i, "kkt_residual") <= 1e-6);
      CHECK(t.number(i, "constraints_ok") == 1.0);
    }
  }
  CHECK(err[{50, "tir"}] < err[{50, "constrained0"}]);
  double lo = INFINITY, hi = 0.0;
  for (const char* s : {"naive", "tir", "constrained", "constrained0"}) {
    lo = std::min(lo, err[{0, s}]);
    hi = std::max(hi, err[{0, s}]);
  }
  CHECK(hi <= 2.0 * lo);
}

TEST_CASE("monte carlo") {
  ExperimentConfig c = default_config(Experiment::montecarlo);
  c.dgp.noise_sd = 0.0;
  c.lambdas = {1e-3};
  c.sample_sizes = {10000};
  c.replications = 1;
  const ResultTable t = run_montecarlo(c);
  bool found = false;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    if (t.text(i, "row_type") == "replication" && t.text(i, "solver") == "tir") {
      CHECK(t.number(i, "interior_error") < 0.1);
      found = true;
    }
  }
  CHECK(found);

  ExperimentConfig d = default_config(Experiment::montecarlo);
  d.dgp.noise_sd = 0.1;
  d.sample_sizes = {1000};
  d.replications = 20;
  std::string one, four;
  {
    ThreadEnv env("1");
    one = strip_timestamp(to_csv(run_montecarlo(d)));
  }
  {
    ThreadEnv env("4");
    four = strip_timestamp(to_csv(run_montecarlo(d)));
  }
  CHECK(one == four);
  CHECK(one == strip_timestamp(to_csv(run_montecarlo(d))));

  const ResultTable s = run_montecarlo(d);
  double naive_mean = 0.0, tir_mean = 0.0;
  for (std::size_t i = 0; i < s.row_count(); ++i) {
    if (s.text(i, "row_type") != "summary") continue;
    (s.text(i, "solver") == "naive" ? naive_mean : tir_mean) = s.number(i, "interior_error");
    CHECK(s.number(i, "replications_ok") == 20.0);
  }
  CHECK(naive_mean > tir_mean);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  ThreadEnv env("3");
  CHECK(worker_count() == 3);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
