#ifndef VLASOV_AP_H
#define VLASOV_AP_H

#include <stddef.h>

#if defined(_WIN32)
#define VAP_API __declspec(dllexport)
#else
#define VAP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vap_status {
  VAP_OK = 0,
  VAP_ERR_INVALID_ARGUMENT = 1,
  VAP_ERR_CONFIG = 2,
  VAP_ERR_NONZERO_MEAN = 3,
  VAP_ERR_STABILITY = 4,
  VAP_ERR_ZERO_FIELD = 5,
  VAP_ERR_NON_MEAN_FREE = 6,
  VAP_ERR_ZERO_REFERENCE = 7,
  VAP_ERR_IO = 8,
  VAP_ERR_BUFFER_TOO_SMALL = 9,
  VAP_ERR_INTERNAL = 10
} vap_status;

typedef struct vap_config vap_config;
typedef struct vap_sim vap_sim;

typedef struct vap_diagnostics {
  double time;
  double rms;
  double mass;
  double boundary_mass_fraction;
  double negative_mass;
} vap_diagnostics;

typedef struct vap_run_summary {
  double delta_t;
  long steps;
  double final_rms;
  double final_mass;
  double max_negative_mass;
  double max_boundary_mass_fraction;
} vap_run_summary;

/* Message of the last failure on the calling thread ("" if none). */
VAP_API const char* vap_last_error(void);
VAP_API const char* vap_status_string(vap_status status);
VAP_API long vap_warning_count(void);

VAP_API vap_status vap_config_create(vap_config** out);
VAP_API void vap_config_destroy(vap_config* config);
/* Reads a `key = value` file on top of the current values. */
VAP_API vap_status vap_config_load(vap_config* config, const char* path);
VAP_API vap_status vap_config_set(vap_config* config, const char* key, const char* value);
/* "key=value". */
VAP_API vap_status vap_config_override(vap_config* config, const char* assignment);
VAP_API vap_status vap_config_validate(const vap_config* config);
/* Writes the resolved configuration as text. *needed receives the size including the NUL. */
VAP_API vap_status vap_config_dump(const vap_config* config, char* buffer, size_t size, size_t* needed);

/* Runs the configured scheme and writes rms.csv, snapshot_<t>.csv and meta.txt. */
VAP_API vap_status vap_run(const vap_config* config, vap_run_summary* summary);
/* Writes convergence.csv and convergence_slopes.csv. Null lists with zero length fall back to the config. */
VAP_API vap_status vap_converge(const vap_config* config, const double* dt_list, size_t n_dt, const double* eps_list,
                                size_t n_eps, const int* n_list, size_t n_n, const char* cache_dir);
VAP_API vap_status vap_table(const vap_config* config, const double* eps_list, size_t n_eps, const char* cache_dir);

typedef void (*vap_selftest_callback)(const char* name, int passed, const char* detail, void* user);
VAP_API vap_status vap_selftest(vap_selftest_callback callback, void* user, int* failures);

VAP_API vap_status vap_sim_create(const vap_config* config, vap_sim** out);
VAP_API void vap_sim_destroy(vap_sim* sim);
VAP_API vap_status vap_sim_advance_to(vap_sim* sim, double t);
VAP_API double vap_sim_time(const vap_sim* sim);
VAP_API double vap_sim_delta_t(const vap_sim* sim);
VAP_API int vap_sim_grid_size(const vap_sim* sim);
/* Either buffer may be null; non-null buffers hold n*n doubles, row i = first coordinate. */
VAP_API vap_status vap_sim_readout(const vap_sim* sim, double* f_tilde, double* f_rv, size_t size);
VAP_API vap_status vap_sim_diagnostics(const vap_sim* sim, vap_diagnostics* out);

VAP_API double vap_eval_f0(double r, double v, double alpha);
VAP_API double vap_limit_solution(double t, double xi1, double xi2);
VAP_API double vap_second_order_solution(double t, double tau, double xi1, double xi2, double eps);
/* tension: "cos2sq" or "cos4". */
VAP_API vap_status vap_hamiltonian_d(double xi1, double xi2, const char* tension, double* out);

#ifdef __cplusplus
}
#endif

#endif
