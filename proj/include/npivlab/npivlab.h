#ifndef NPIVLAB_H
#define NPIVLAB_H

/* C interface to npivlab. Every call that can fail returns an npiv_status;
 * npiv_last_error() then describes the failure for the calling thread.
 * Handles are opaque and owned by the caller once returned. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NPIV_API __declspec(dllexport)
#else
#define NPIV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum npiv_status {
  NPIV_OK = 0,
  NPIV_ERR_INVALID_ARGUMENT = 1,
  NPIV_ERR_GRID_MISMATCH = 2,
  NPIV_ERR_OUT_OF_RANGE = 3,
  NPIV_ERR_CONFIG = 4,
  NPIV_ERR_NUMERICAL = 5,
  NPIV_ERR_NONCONVERGENCE = 6,
  NPIV_ERR_DEGENERATE_SAMPLE = 7,
  NPIV_ERR_IO = 8,
  NPIV_ERR_INTERNAL = 9
} npiv_status;

typedef struct npiv_config npiv_config;
typedef struct npiv_table npiv_table;

NPIV_API const char* npiv_version(void);
NPIV_API const char* npiv_last_error(void);
NPIV_API const char* npiv_status_name(npiv_status status);

/* experiment: illposedness_demo (demo), svd_report (svd),
 * estimator_comparison (compare), montecarlo. */
NPIV_API npiv_status npiv_config_default(const char* experiment, npiv_config** out);
/* JSON file, or a CSV written by this library. */
NPIV_API npiv_status npiv_config_load(const char* path, npiv_config** out);
NPIV_API npiv_status npiv_config_parse(const char* json, npiv_config** out);
/* Dotted key ("dgp.rho") and a JSON value; non-JSON text is a string. */
NPIV_API npiv_status npiv_config_set(npiv_config* cfg, const char* key, const char* value);
NPIV_API npiv_status npiv_config_set_seed(npiv_config* cfg, uint64_t seed);
NPIV_API npiv_status npiv_config_set_output(npiv_config* cfg, const char* path);
NPIV_API npiv_status npiv_config_validate(const npiv_config* cfg);
/* Copies NUL-terminated JSON into buf when it fits; *needed gets the size
 * including the terminator. */
NPIV_API npiv_status npiv_config_to_json(const npiv_config* cfg, char* buf, size_t capacity,
                                         size_t* needed);
/* Output path stored in the config ("" if none). Valid until the next change. */
NPIV_API const char* npiv_config_output(const npiv_config* cfg);
/* Canonical experiment name of the config. */
NPIV_API const char* npiv_config_experiment(const npiv_config* cfg);
NPIV_API void npiv_config_free(npiv_config* cfg);

NPIV_API npiv_status npiv_run(const npiv_config* cfg, npiv_table** out);

NPIV_API size_t npiv_table_rows(const npiv_table* t);
NPIV_API size_t npiv_table_cols(const npiv_table* t);
NPIV_API const char* npiv_table_column_name(const npiv_table* t, size_t col);
/* Numeric (or boolean as 0/1) value of a cell. */
NPIV_API npiv_status npiv_table_value(const npiv_table* t, size_t row, size_t col, double* out);
/* The cell as written to CSV. */
NPIV_API const char* npiv_table_cell_text(const npiv_table* t, size_t row, size_t col);
NPIV_API size_t npiv_table_postcondition_count(const npiv_table* t);
NPIV_API const char* npiv_table_postcondition_name(const npiv_table* t, size_t i);
NPIV_API int npiv_table_postcondition_ok(const npiv_table* t, size_t i);
/* "-" writes to standard output (timestamp line included). */
NPIV_API npiv_status npiv_table_write_csv(const npiv_table* t, const char* path);
NPIV_API void npiv_table_free(npiv_table* t);

/* family: "monotone" or "nonneg". */
NPIV_API npiv_status npiv_psi_l2_norm(const char* family, unsigned n, size_t grid_size,
                                      double* out);
NPIV_API npiv_status npiv_sup_A_psi_bound(const char* family, unsigned n, double density_sup,
                                          double* out);

#ifdef __cplusplus
}
#endif

#endif
