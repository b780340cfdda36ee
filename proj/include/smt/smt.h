/* Copyright 2026 The SMT Authors
 * Licensed under the Apache License, Version 2.0
 *
 * C interface to the sparse multitask library.
 *
 * Every function returns an smt_status. On failure a human-readable message
 * is available from smt_last_error() on the calling thread until the next
 * call into the library from that thread. Strings returned through `char**`
 * out-parameters are owned by the caller and released with smt_string_free().
 */
#ifndef SMT_SMT_H_
#define SMT_SMT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SMT_BUILDING_LIBRARY)
#define SMT_API __attribute__((visibility("default")))
#else
#define SMT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum smt_status {
  SMT_OK = 0,
  SMT_ERR_CONFIG = 1,     /* invalid configuration or arguments */
  SMT_ERR_FORMAT = 2,     /* malformed or inconsistent data/files */
  SMT_ERR_NUMERIC = 3,    /* non-finite values or training divergence */
  SMT_ERR_DIMENSION = 4,  /* shape mismatch */
  SMT_ERR_INPUT = 5,      /* empty or out-of-range input */
  SMT_ERR_IO = 6,         /* filesystem failure */
  SMT_ERR_STATE = 7,      /* call sequence violated */
  SMT_ERR_INTERNAL = 8    /* unexpected failure */
} smt_status;

SMT_API const char* smt_version(void);
SMT_API const char* smt_status_name(smt_status status);
/* Message for the last failing call on this thread; "" if none. */
SMT_API const char* smt_last_error(void);
SMT_API void smt_string_free(char* s);

/* ---- experiment configuration ------------------------------------------ */

typedef struct smt_experiment smt_experiment;

/* Parses a JSON configuration; NULL or "" yields the defaults. */
SMT_API smt_status smt_experiment_create(const char* json, smt_experiment** out);
SMT_API void smt_experiment_free(smt_experiment* exp);

SMT_API smt_status smt_experiment_set_out(smt_experiment* exp, const char* dir);
SMT_API smt_status smt_experiment_set_seeds(smt_experiment* exp, const uint64_t* seeds,
                                            size_t n);
SMT_API smt_status smt_experiment_set_sparsities(smt_experiment* exp,
                                                 const double* sparsities, size_t n);
/* Method names: "dense", "lth", "snip", "ours". */
SMT_API smt_status smt_experiment_set_methods(smt_experiment* exp,
                                              const char* const* names, size_t n);
SMT_API smt_status smt_experiment_set_jobs(smt_experiment* exp, size_t jobs);
/* Seed of the synthetic generator. */
SMT_API smt_status smt_experiment_set_data_seed(smt_experiment* exp, uint64_t seed);
/* Use on-disk datasets instead of synthetic data. */
SMT_API smt_status smt_experiment_set_datasets(smt_experiment* exp, const char* mi_dir,
                                               const char* me_dir);
/* Effective configuration as JSON (after all overrides). */
SMT_API smt_status smt_experiment_to_json(const smt_experiment* exp, char** json);
SMT_API smt_status smt_experiment_out(const smt_experiment* exp, char** dir);

/* ---- datasets ------------------------------------------------------------ */

typedef struct smt_dataset smt_dataset;

SMT_API smt_status smt_dataset_load(const char* dir, smt_dataset** out);
SMT_API void smt_dataset_free(smt_dataset* data);

typedef struct smt_dataset_info {
  int task; /* 0 = MI, 1 = ME */
  size_t trials;
  size_t channels;
  size_t samples;
  size_t classes;
} smt_dataset_info;

SMT_API smt_status smt_dataset_get_info(const smt_dataset* data, smt_dataset_info* info);

/* ---- commands -------------------------------------------------------------- */

/* Writes <out>/MI and <out>/ME from the synthetic config. `paths` receives
 * the two directories separated by a newline. */
SMT_API smt_status smt_generate(const smt_experiment* exp, char** paths);

typedef struct smt_mask_info {
  size_t retained[3]; /* shared, MI head, ME head */
  size_t total[3];
} smt_mask_info;

/* Builds the seeded model and writes masks.bin + masks.json into `dir`. */
SMT_API smt_status smt_masks_generate(const smt_experiment* exp, const char* method,
                                      double sparsity, uint64_t seed, const char* dir,
                                      smt_mask_info* info);

typedef struct smt_run_info {
  int failed;             /* nonzero when training diverged */
  size_t epochs;
  double final_train_loss;
  double val_loss[2];     /* MI, ME */
  double val_accuracy[2]; /* fractions in [0, 1] */
  double val_f1[2];
} smt_run_info;

/* Trains one (method, sparsity, seed) cell and saves the run into `dir`.
 * When `masks_path` is non-NULL those masks are used instead of generating. */
SMT_API smt_status smt_train(const smt_experiment* exp, const char* method, double sparsity,
                             uint64_t seed, const char* masks_path, const char* dir,
                             smt_run_info* info);

typedef struct smt_sweep_info {
  size_t runs;
  size_t failed_runs;
  size_t report_rows;
} smt_sweep_info;

/* Runs every configured cell and writes report.csv, report.md, config.json
 * and curves/ under the output directory. Diverged runs are recorded as
 * failed rows and counted in `failed_runs`; the call still returns SMT_OK. */
SMT_API smt_status smt_sweep(const smt_experiment* exp, smt_sweep_info* info);

/* Canonical cell name, e.g. "ours_s40_seed3" (dense ignores sparsity). */
SMT_API smt_status smt_run_name(const char* method, double sparsity, uint64_t seed,
                                char** name);

/* Renders <dir>/report.csv as a markdown table. */
SMT_API smt_status smt_report_render(const char* dir, char** markdown);

#ifdef __cplusplus
}
#endif

#endif /* SMT_SMT_H_ */
