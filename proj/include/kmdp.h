/*
 * kmdp — kernelized-MDP simulator C API.
 *
 * The library core is C++; this header is the stable C surface: opaque
 * handles, integer status codes, and explicit free functions. All functions
 * are thread-compatible (distinct handles may be used from distinct threads);
 * the last-error message is thread-local.
 */

#ifndef KMDP_H
#define KMDP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define KMDP_API __declspec(dllexport)
#else
#define KMDP_API __attribute__((visibility("default")))
#endif

typedef enum kmdp_status {
    KMDP_OK = 0,
    KMDP_ERR_INVALID_ARGUMENT = 1,
    KMDP_ERR_CONFIG = 2,
    KMDP_ERR_IO = 3,
    KMDP_ERR_NUMERIC = 4,
    KMDP_ERR_PARTIAL = 5, /* some experiment cells failed; results for the rest are valid */
    KMDP_ERR_INTERNAL = 6
} kmdp_status;

typedef struct kmdp_config kmdp_config;   /* parsed experiment configuration */
typedef struct kmdp_summary kmdp_summary; /* per-(agent, seed) result rows */

KMDP_API const char* kmdp_version(void);

/* Message describing the most recent failure on this thread ("" if none). */
KMDP_API const char* kmdp_last_error(void);

/* --- configuration ------------------------------------------------------- */

KMDP_API kmdp_status kmdp_config_load(const char* path, kmdp_config** out);
KMDP_API kmdp_status kmdp_config_parse(const char* json_text, kmdp_config** out);
KMDP_API kmdp_status kmdp_config_override_seeds(kmdp_config* cfg, const uint64_t* seeds,
                                                size_t n_seeds);
KMDP_API kmdp_status kmdp_config_override_output_dir(kmdp_config* cfg, const char* dir);
KMDP_API void kmdp_config_free(kmdp_config* cfg);

/* --- experiments ----------------------------------------------------------- */

/* Runs every (agent, seed) cell; writes one per-episode CSV per cell plus
 * summary.csv under the configured output directory. Existing cell CSVs are
 * reused unless force != 0. Returns KMDP_ERR_PARTIAL when some cells failed
 * but others completed. */
KMDP_API kmdp_status kmdp_run_experiment(const kmdp_config* cfg, int force, kmdp_summary** out);

typedef struct kmdp_summary_row {
    char agent[16];
    uint64_t seed;
    double final_regret;
    double growth_p;
    double growth_ci_lo;
    double growth_ci_hi;
    double coverage_viol;
    double secs;
    int failed; /* nonzero when the cell errored; see kmdp_summary_row_error */
} kmdp_summary_row;

KMDP_API size_t kmdp_summary_size(const kmdp_summary* summary);
KMDP_API kmdp_status kmdp_summary_row_at(const kmdp_summary* summary, size_t index,
                                         kmdp_summary_row* out);
KMDP_API const char* kmdp_summary_row_error(const kmdp_summary* summary, size_t index);
KMDP_API int kmdp_summary_partial_failure(const kmdp_summary* summary);
/* Summary in the summary.csv format; free with kmdp_string_free. */
KMDP_API kmdp_status kmdp_summary_to_csv(const kmdp_summary* summary, char** out_text);
KMDP_API void kmdp_summary_free(kmdp_summary* summary);

KMDP_API void kmdp_string_free(char* text);

/* --- maximum information gain --------------------------------------------- */

/* Greedy MIG schedule gamma_hat_1..gamma_hat_t for a kernel given as a JSON
 * spec, estimated on a random mesh of `mesh_size` points over box
 * [box_lo, box_hi]^dim (index slots are drawn from their index ranges).
 * On success *out_values is a malloc'd array of length t; free with
 * kmdp_buffer_free. */
KMDP_API kmdp_status kmdp_mig_schedule(const char* kernel_json, int t, double lambda,
                                       int mesh_size, uint64_t mesh_seed, double box_lo,
                                       double box_hi, double** out_values, size_t* out_len);
KMDP_API void kmdp_buffer_free(double* values);

/* --- confidence coverage ---------------------------------------------------- */

typedef struct kmdp_coverage_report {
    int runs;
    int episodes;
    int grid_points;
    double delta;
    double reward_rate;
    double transition_rate;
    double reward_threshold;
    double transition_threshold;
    int reward_pass;
    int transition_pass;
} kmdp_coverage_report;

/* Monte-Carlo coverage of the confidence bands under RKHS ground truths
 * drawn at the configured norm bounds. zero_beta_debug forces beta = 0
 * (exercising the failure path). */
KMDP_API kmdp_status kmdp_coverage_run(const kmdp_config* cfg, int runs, int zero_beta_debug,
                                       kmdp_coverage_report* out);

/* --- selftest ---------------------------------------------------------------- */

/* Fast invariant suite; prints one "selftest.<name>=ok|fail" line per check
 * to stdout and returns the number of failed checks (< 0 on internal error). */
KMDP_API int kmdp_selftest(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* KMDP_H */
