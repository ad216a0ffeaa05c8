#include "npivlab/npivlab.h"

#include "npivlab/counterexamples.hpp"
#include "npivlab/error.hpp"
#include "npivlab/harness.hpp"

#include <cstring>
#include <exception>
#include <iostream>
#include <new>
#include <string>
#include <vector>

struct npiv_config {
  npivlab::ExperimentConfig cfg;
};

struct npiv_table {
  npivlab::ResultTable table;
  std::vector<std::vector<std::string>> text;
};

namespace {

thread_local std::string last_error;

npiv_status status_of(npivlab::ErrorCode c) {
  using npivlab::ErrorCode;
  switch (c) {
    case ErrorCode::invalid_argument: return NPIV_ERR_INVALID_ARGUMENT;
    case ErrorCode::grid_mismatch: return NPIV_ERR_GRID_MISMATCH;
    case ErrorCode::out_of_range: return NPIV_ERR_OUT_OF_RANGE;
    case ErrorCode::config: return NPIV_ERR_CONFIG;
    case ErrorCode::numerical: return NPIV_ERR_NUMERICAL;
    case ErrorCode::nonconvergence: return NPIV_ERR_NONCONVERGENCE;
    case ErrorCode::degenerate_sample: return NPIV_ERR_DEGENERATE_SAMPLE;
    case ErrorCode::io: return NPIV_ERR_IO;
  }
  return NPIV_ERR_INTERNAL;
}

template <class F>
npiv_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return NPIV_OK;
  } catch (const npivlab::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return NPIV_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (p == nullptr) npivlab::fail(npivlab::ErrorCode::invalid_argument, std::string(what) + " is null");
}

npiv_config* wrap(npivlab::ExperimentConfig cfg) { return new npiv_config{std::move(cfg)}; }

}  // namespace

extern "C" {

const char* npiv_version(void) { return npivlab::kVersion; }

const char* npiv_last_error(void) { return last_error.c_str(); }

const char* npiv_status_name(npiv_status s) {
  switch (s) {
    case NPIV_OK: return "ok";
    case NPIV_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case NPIV_ERR_GRID_MISMATCH: return "grid_mismatch";
    case NPIV_ERR_OUT_OF_RANGE: return "out_of_range";
    case NPIV_ERR_CONFIG: return "config";
    case NPIV_ERR_NUMERICAL: return "numerical";
    case NPIV_ERR_NONCONVERGENCE: return "nonconvergence";
    case NPIV_ERR_DEGENERATE_SAMPLE: return "degenerate_sample";
    case NPIV_ERR_IO: return "io";
    case NPIV_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

npiv_status npiv_config_default(const char* experiment, npiv_config** out) {
  return guarded([&] {
    need(experiment, "experiment");
    need(out, "out");
    *out = wrap(npivlab::default_config(npivlab::experiment_from_string(experiment)));
  });
}

npiv_status npiv_config_load(const char* path, npiv_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = wrap(npivlab::load_config(path));
  });
}

npiv_status npiv_config_parse(const char* json, npiv_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = wrap(npivlab::config_from_json(json));
  });
}

npiv_status npiv_config_set(npiv_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    npivlab::set_config_value(cfg->cfg, key, value);
  });
}

npiv_status npiv_config_set_seed(npiv_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.seed = seed;
  });
}

npiv_status npiv_config_set_output(npiv_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    cfg->cfg.output = path;
  });
}

npiv_status npiv_config_validate(const npiv_config* cfg) {
  return guarded([&] {
    need(cfg, "config");
    npivlab::validate(cfg->cfg);
  });
}

npiv_status npiv_config_to_json(const npiv_config* cfg, char* buf, size_t capacity,
                                size_t* needed) {
  return guarded([&] {
    need(cfg, "config");
    const std::string s = npivlab::config_to_json(cfg->cfg);
    if (needed) *needed = s.size() + 1;
    if (buf == nullptr || capacity == 0) return;
    if (capacity < s.size() + 1) {
      npivlab::fail(npivlab::ErrorCode::out_of_range, "buffer too small for config JSON");
    }
    std::memcpy(buf, s.c_str(), s.size() + 1);
  });
}

const char* npiv_config_output(const npiv_config* cfg) {
  return cfg ? cfg->cfg.output.c_str() : "";
}

const char* npiv_config_experiment(const npiv_config* cfg) {
  return cfg ? npivlab::to_string(cfg->cfg.experiment).data() : "";
}

void npiv_config_free(npiv_config* cfg) { delete cfg; }

npiv_status npiv_run(const npiv_config* cfg, npiv_table** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    auto* t = new npiv_table{npivlab::run_experiment(cfg->cfg), {}};
    for (const auto& row : t->table.rows()) {
      std::vector<std::string> cells;
      for (const auto& c : row) cells.push_back(npivlab::format_cell(c));
      t->text.push_back(std::move(cells));
    }
    *out = t;
  });
}

size_t npiv_table_rows(const npiv_table* t) { return t ? t->table.row_count() : 0; }

size_t npiv_table_cols(const npiv_table* t) { return t ? t->table.columns().size() : 0; }

const char* npiv_table_column_name(const npiv_table* t, size_t col) {
  if (!t || col >= t->table.columns().size()) return nullptr;
  return t->table.columns()[col].c_str();
}

npiv_status npiv_table_value(const npiv_table* t, size_t row, size_t col, double* out) {
  return guarded([&] {
    need(t, "table");
    need(out, "out");
    if (row >= t->table.row_count() || col >= t->table.columns().size()) {
      npivlab::fail(npivlab::ErrorCode::out_of_range, "cell index out of range");
    }
    *out = t->table.number(row, t->table.columns()[col]);
  });
}

const char* npiv_table_cell_text(const npiv_table* t, size_t row, size_t col) {
  if (!t || row >= t->text.size() || col >= t->text[row].size()) return nullptr;
  return t->text[row][col].c_str();
}

size_t npiv_table_postcondition_count(const npiv_table* t) {
  return t ? t->table.postconditions().size() : 0;
}

const char* npiv_table_postcondition_name(const npiv_table* t, size_t i) {
  if (!t || i >= t->table.postconditions().size()) return nullptr;
  return t->table.postconditions()[i].name.c_str();
}

int npiv_table_postcondition_ok(const npiv_table* t, size_t i) {
  if (!t || i >= t->table.postconditions().size()) return 0;
  return t->table.postconditions()[i].ok ? 1 : 0;
}

npiv_status npiv_table_write_csv(const npiv_table* t, const char* path) {
  return guarded([&] {
    need(t, "table");
    need(path, "path");
    if (std::strcmp(path, "-") == 0) {
      std::cout << npivlab::to_csv(t->table, true) << std::flush;
      return;
    }
    npivlab::emit_csv(t->table, path);
  });
}

void npiv_table_free(npiv_table* t) { delete t; }

npiv_status npiv_psi_l2_norm(const char* family, unsigned n, size_t grid_size, double* out) {
  return guarded([&] {
    need(family, "family");
    need(out, "out");
    const auto grid = npivlab::make_grid(grid_size, npivlab::GridRule::gauss_legendre);
    *out = npivlab::l2_norm(npivlab::psi({npivlab::family_from_string(family), n, 1.0}, grid));
  });
}

npiv_status npiv_sup_A_psi_bound(const char* family, unsigned n, double density_sup,
                                 double* out) {
  return guarded([&] {
    need(family, "family");
    need(out, "out");
    *out = npivlab::analytic_sup_A_psi_bound({npivlab::family_from_string(family), n, 1.0},
                                             density_sup);
  });
}

}  // extern "C"
