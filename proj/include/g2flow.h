/* g2flow: flows of G2 structures on periodic grids.
 *
 * Every call returns a g2flow_status. On failure a message (and, for config
 * errors, a line number) is kept per thread until the next call. Handles are
 * opaque and must be released with their _free function.
 */
#ifndef G2FLOW_H
#define G2FLOW_H

#include <stddef.h>

#if defined(_WIN32)
#define G2FLOW_API __declspec(dllexport)
#else
#define G2FLOW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum g2flow_status {
  G2FLOW_OK = 0,
  G2FLOW_E_INVALID_ARGUMENT = 1,
  G2FLOW_E_DEGENERATE_FORM = 2,
  G2FLOW_E_METRIC_NOT_POSITIVE = 3,
  G2FLOW_E_ASYMMETRIC_H = 4,
  G2FLOW_E_NOT_CLOSED = 5,
  G2FLOW_E_STEP_FAILURE = 6,
  G2FLOW_E_INSUFFICIENT_DYNAMIC_RANGE = 7,
  G2FLOW_E_NOT_NORMALIZED = 8,
  G2FLOW_E_NON_CONVERGENCE = 9,
  G2FLOW_E_TRAJECTORY_GAP = 10,
  G2FLOW_E_UNRESOLVABLE_RADIUS = 11,
  G2FLOW_E_NO_ADMISSIBLE_BALLS = 12,
  G2FLOW_E_PARSE = 13,
  G2FLOW_E_UNKNOWN_KEY = 14,
  G2FLOW_E_DUPLICATE_KEY = 15,
  G2FLOW_E_IO = 16,
  G2FLOW_E_USAGE = 64,        /* missing inputs, unknown command, null handles */
  G2FLOW_E_CHECK_FAILED = 65, /* the command ran but a reported check failed */
  G2FLOW_E_INTERNAL = 99
} g2flow_status;

typedef struct g2flow_config g2flow_config;
typedef struct g2flow_result g2flow_result;

typedef struct g2flow_blowup {
  double C_hat;
  double exponent;
  double T_hat;
  double rate_constant;
  double rms_residual;
  size_t samples;
} g2flow_blowup;

G2FLOW_API const char* g2flow_version(void);
G2FLOW_API const char* g2flow_status_name(g2flow_status status);
/* Process exit code for a status: 0 success, 1 domain error, 2 usage error. */
G2FLOW_API int g2flow_exit_code(g2flow_status status);

/* Message of the last failure on this thread; empty when none. */
G2FLOW_API const char* g2flow_last_error(void);
/* Config line of the last failure on this thread; 0 when none. */
G2FLOW_API int g2flow_last_error_line(void);

/* Worker threads used inside numerical kernels. Never changes results. */
G2FLOW_API g2flow_status g2flow_set_threads(int n);
G2FLOW_API int g2flow_threads(void);

G2FLOW_API g2flow_status g2flow_config_parse(const char* text, g2flow_config** out);
G2FLOW_API g2flow_status g2flow_config_load(const char* path, g2flow_config** out);
G2FLOW_API g2flow_status g2flow_config_set_output(g2flow_config* cfg, const char* dir);
/* Copies the resolved "key = value" dump into buf (NUL-terminated when cap > 0)
 * and stores the full length, without the NUL, in *len. */
G2FLOW_API g2flow_status g2flow_config_resolved(const g2flow_config* cfg, char* buf, size_t cap, size_t* len);
G2FLOW_API void g2flow_config_free(g2flow_config* cfg);

/* Runs "validate", "evolve", "entropy", "collapse" or "fit-blowup". A result
 * is produced for G2FLOW_OK and G2FLOW_E_CHECK_FAILED. */
G2FLOW_API g2flow_status g2flow_run(const g2flow_config* cfg, const char* command, g2flow_result** out);
G2FLOW_API const char* g2flow_result_summary(const g2flow_result* res);
G2FLOW_API int g2flow_result_singular(const g2flow_result* res);
G2FLOW_API void g2flow_result_free(g2flow_result* res);

/* Fits lambda = C (T - t)^exponent to n samples. */
G2FLOW_API g2flow_status g2flow_fit_blowup(const double* t, const double* lambda, size_t n, g2flow_blowup* out);

#ifdef __cplusplus
}
#endif

#endif /* G2FLOW_H */
