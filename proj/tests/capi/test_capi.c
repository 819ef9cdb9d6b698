/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "vlasov_ap.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void count_selftest(const char* name, int passed, const char* detail, void* user) {
  (void)detail;
  int* seen = (int*)user;
  ++*seen;
  if (!passed) fprintf(stderr, "selftest %s failed\n", name);
}

static void test_config(void) {
  vap_config* cfg = NULL;
  EXPECT(vap_config_create(&cfg) == VAP_OK);
  EXPECT(vap_config_set(cfg, "epsilon", "pi/8") == VAP_OK);
  EXPECT(vap_config_override(cfg, "n_points=32") == VAP_OK);
  EXPECT(vap_config_set(cfg, "bogus", "1") == VAP_ERR_CONFIG);
  EXPECT(strstr(vap_last_error(), "bogus") != NULL);
  EXPECT(vap_config_set(cfg, "n_points", "48") == VAP_OK);
  EXPECT(vap_config_validate(cfg) == VAP_ERR_CONFIG);
  EXPECT(vap_config_set(cfg, "n_points", "32") == VAP_OK);
  EXPECT(vap_config_validate(cfg) == VAP_OK);
  EXPECT(vap_config_load(cfg, "/nonexistent/vlasov_ap.cfg") == VAP_ERR_IO);

  size_t needed = 0;
  EXPECT(vap_config_dump(cfg, NULL, 0, &needed) == VAP_ERR_BUFFER_TOO_SMALL);
  EXPECT(needed > 1);
  char* text = (char*)malloc(needed);
  EXPECT(vap_config_dump(cfg, text, needed, &needed) == VAP_OK);
  EXPECT(strstr(text, "n_points = 32") != NULL);
  free(text);

  EXPECT(vap_config_create(NULL) == VAP_ERR_INVALID_ARGUMENT);
  vap_config_destroy(cfg);
  vap_config_destroy(NULL);
}

static void test_simulation(void) {
  vap_config* cfg = NULL;
  vap_config_create(&cfg);
  vap_config_set(cfg, "n_points", "16");
  vap_config_set(cfg, "n_tau", "16");
  vap_config_set(cfg, "epsilon", "0.5");
  vap_config_set(cfg, "t_final", "0.2");

  vap_sim* sim = NULL;
  EXPECT(vap_sim_create(cfg, &sim) == VAP_OK);
  EXPECT(vap_sim_grid_size(sim) == 16);
  EXPECT(vap_sim_delta_t(sim) > 0.0);

  double f_tilde[256], f_rv[256];
  EXPECT(vap_sim_readout(sim, f_tilde, f_rv, 255) == VAP_ERR_BUFFER_TOO_SMALL);
  EXPECT(vap_sim_readout(sim, f_tilde, f_rv, 256) == VAP_OK);
  /* Node (8, 8) is the origin; f0 there is 4 / sqrt(2 pi alpha) * chi(0). */
  EXPECT(fabs(f_tilde[8 * 16 + 8] - vap_eval_f0(0.0, 0.0, 0.2)) < 1e-13);

  vap_diagnostics d0, d1;
  EXPECT(vap_sim_diagnostics(sim, &d0) == VAP_OK);
  EXPECT(vap_sim_advance_to(sim, 0.2) == VAP_OK);
  EXPECT(fabs(vap_sim_time(sim) - 0.2) < 1e-15);
  EXPECT(vap_sim_diagnostics(sim, &d1) == VAP_OK);
  EXPECT(d1.rms > 0.0);
  EXPECT(fabs(d1.mass - d0.mass) < 1e-6 * d0.mass);
  EXPECT(vap_sim_readout(sim, NULL, f_rv, 256) == VAP_OK);
  vap_sim_destroy(sim);

  vap_config_set(cfg, "n_points", "12");
  sim = NULL;
  EXPECT(vap_sim_create(cfg, &sim) == VAP_ERR_CONFIG);
  EXPECT(sim == NULL);
  vap_config_destroy(cfg);
}

static void test_run(const char* dir) {
  vap_config* cfg = NULL;
  vap_config_create(&cfg);
  vap_config_set(cfg, "n_points", "16");
  vap_config_set(cfg, "n_tau", "16");
  vap_config_set(cfg, "t_final", "0.1");
  vap_config_set(cfg, "output_dir", dir);
  vap_run_summary s;
  EXPECT(vap_run(cfg, &s) == VAP_OK);
  EXPECT(s.steps > 0);
  EXPECT(s.final_rms > 0.0);
  char path[1024];
  snprintf(path, sizeof path, "%s/meta.txt", dir);
  FILE* f = fopen(path, "r");
  EXPECT(f != NULL);
  if (f) fclose(f);

  vap_config_set(cfg, "scheme", "diffusion");
  EXPECT(vap_run(cfg, &s) == VAP_ERR_NON_MEAN_FREE);
  vap_config_destroy(cfg);
}

static void test_models(void) {
  const double pi = 3.14159265358979323846;
  EXPECT(fabs(vap_limit_solution(0.0, 0.3, -0.2) - vap_eval_f0(0.3, -0.2, 0.2)) < 1e-15);
  /* Over 2 pi the limit model turns f0 by a quarter turn; f0 is even in each variable. */
  EXPECT(fabs(vap_limit_solution(2 * pi, 0.3, -0.7) - vap_eval_f0(0.7, 0.3, 0.2)) < 1e-12);
  EXPECT(fabs(vap_second_order_solution(0.0, 0.0, 0.3, -0.2, 0.0) - vap_eval_f0(0.3, -0.2, 0.2)) < 1e-15);
  double h = 0.0;
  EXPECT(vap_hamiltonian_d(1.0, 0.0, "cos2sq", &h) == VAP_OK);
  EXPECT(fabs(h - 5.0 / 384.0) < 1e-12);
  EXPECT(vap_hamiltonian_d(1.0, 0.0, "cos3", &h) == VAP_ERR_CONFIG);
  EXPECT(vap_hamiltonian_d(1.0, 0.0, "cos2sq", NULL) == VAP_ERR_INVALID_ARGUMENT);
  EXPECT(strlen(vap_status_string(VAP_ERR_STABILITY)) > 0);
}

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : "capi_out";
  test_config();
  test_simulation();
  test_run(dir);
  test_models();
  int seen = 0, selftest_failures = -1;
  EXPECT(vap_selftest(count_selftest, &seen, &selftest_failures) == VAP_OK);
  EXPECT(seen > 0);
  EXPECT(selftest_failures == 0);
  printf("%s (%d failures)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
