// npivlab command line: one subcommand per experiment, built on the C API.

#include "npivlab/npivlab.h"

#include <CLI11.hpp>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

namespace {

int exit_code(npiv_status s) {
  switch (s) {
    case NPIV_OK: return 0;
    case NPIV_ERR_CONFIG:
    case NPIV_ERR_INVALID_ARGUMENT:
    case NPIV_ERR_OUT_OF_RANGE: return 2;
    case NPIV_ERR_NUMERICAL:
    case NPIV_ERR_NONCONVERGENCE:
    case NPIV_ERR_DEGENERATE_SAMPLE: return 3;
    default: return 1;
  }
}

int report(npiv_status s, const char* what) {
  std::fprintf(stderr, "npivlab: %s: %s (%s)\n", what, npiv_last_error(), npiv_status_name(s));
  return exit_code(s);
}

struct Options {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  unsigned long long seed = 0;
  bool has_seed = false;
};

int run(const std::string& experiment, const Options& opt) {
  npiv_config* cfg = nullptr;
  npiv_status s = opt.config.empty() ? npiv_config_default(experiment.c_str(), &cfg)
                                     : npiv_config_load(opt.config.c_str(), &cfg);
  if (s != NPIV_OK) return report(s, "loading config");

  auto done = [&](int code) {
    npiv_config_free(cfg);
    return code;
  };

  if (!opt.config.empty()) {
    npiv_config* reference = nullptr;
    npiv_config_default(experiment.c_str(), &reference);
    const bool same = std::strcmp(npiv_config_experiment(cfg), npiv_config_experiment(reference)) == 0;
    npiv_config_free(reference);
    if (!same) {
      std::fprintf(stderr, "npivlab: config '%s' is for experiment '%s', not '%s'\n",
                   opt.config.c_str(), npiv_config_experiment(cfg), experiment.c_str());
      return done(2);
    }
  }

  for (const auto& kv : opt.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "npivlab: --set expects key=value, got '%s'\n", kv.c_str());
      return done(2);
    }
    s = npiv_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != NPIV_OK) return done(report(s, ("--set " + kv).c_str()));
  }
  if (opt.has_seed) npiv_config_set_seed(cfg, opt.seed);
  if (!opt.out.empty()) npiv_config_set_output(cfg, opt.out.c_str());

  s = npiv_config_validate(cfg);
  if (s != NPIV_OK) return done(report(s, "invalid config"));

  npiv_table* table = nullptr;
  s = npiv_run(cfg, &table);
  if (s != NPIV_OK) return done(report(s, "experiment failed"));

  const std::string path = npiv_config_output(cfg);
  s = npiv_table_write_csv(table, path.empty() ? "-" : path.c_str());
  int code = s == NPIV_OK ? 0 : report(s, "writing results");
  for (size_t i = 0; i < npiv_table_postcondition_count(table); ++i) {
    std::fprintf(stderr, "%s %s\n", npiv_table_postcondition_ok(table, i) ? "pass" : "FAIL",
                 npiv_table_postcondition_name(table, i));
  }
  if (code == 0 && !path.empty()) {
    std::fprintf(stderr, "wrote %zu rows to %s\n", npiv_table_rows(table), path.c_str());
  }
  npiv_table_free(table);
  return done(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"npivlab: ill-posedness experiments for nonparametric IV regression"};
  app.set_version_flag("--version", std::string(npiv_version()));
  app.require_subcommand(1);

  Options opt;
  const std::pair<const char*, const char*> commands[] = {
      {"demo", "counterexample sequences: distance, criterion and shape flags per n"},
      {"svd", "singular values of the discretized operator at two grid sizes"},
      {"compare", "naive, Tikhonov and shape-constrained estimators under perturbations"},
      {"montecarlo", "sampled-mode estimators over replications"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON config, or a CSV emitted earlier");
    sub->add_option("--out", opt.out, "output CSV path (default: stdout)");
    sub->add_option("--set", opt.sets, "override a config field, e.g. dgp.rho=0.9")
        ->take_all();
    sub->add_option("--seed", opt.seed, "base seed")->each([&](const std::string&) {
      opt.has_seed = true;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string chosen = app.get_subcommands().front()->get_name();
  return run(chosen, opt);
}
