#include "vlasov_ap.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "vlasov_ap/error.hpp"
#include "vlasov_ap/harness.hpp"
#include "vlasov_ap/reference.hpp"

struct vap_config {
  vlasov_ap::RunConfig value;
};

struct vap_sim {
  explicit vap_sim(const vlasov_ap::RunConfig& c) : value(c) {}
  vlasov_ap::Simulation value;
};

namespace {

thread_local std::string last_error;

vap_status to_status(vlasov_ap::ErrorCode code) {
  using vlasov_ap::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return VAP_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return VAP_ERR_CONFIG;
    case ErrorCode::NonZeroMeanInput: return VAP_ERR_NONZERO_MEAN;
    case ErrorCode::StabilityFailure: return VAP_ERR_STABILITY;
    case ErrorCode::ZeroField: return VAP_ERR_ZERO_FIELD;
    case ErrorCode::NonMeanFreeTension: return VAP_ERR_NON_MEAN_FREE;
    case ErrorCode::ZeroReference: return VAP_ERR_ZERO_REFERENCE;
    case ErrorCode::Io: return VAP_ERR_IO;
  }
  return VAP_ERR_INTERNAL;
}

template <class Fn>
vap_status guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return VAP_OK;
  } catch (const vlasov_ap::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return VAP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return VAP_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return VAP_ERR_INTERNAL;
  }
}

vap_status null_argument(const char* what) {
  last_error = std::string("null argument: ") + what;
  return VAP_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* vap_last_error(void) { return last_error.c_str(); }

const char* vap_status_string(vap_status status) {
  switch (status) {
    case VAP_OK: return "ok";
    case VAP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case VAP_ERR_CONFIG: return "configuration error";
    case VAP_ERR_NONZERO_MEAN: return "input has a nonzero torus mean";
    case VAP_ERR_STABILITY: return "stability failure";
    case VAP_ERR_ZERO_FIELD: return "advection field vanishes";
    case VAP_ERR_NON_MEAN_FREE: return "tension is not mean free";
    case VAP_ERR_ZERO_REFERENCE: return "reference norm is zero";
    case VAP_ERR_IO: return "i/o error";
    case VAP_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case VAP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

long vap_warning_count(void) { return vlasov_ap::warning_count(); }

vap_status vap_config_create(vap_config** out) {
  if (!out) return null_argument("out");
  return guard([&] { *out = new vap_config{}; });
}

void vap_config_destroy(vap_config* config) { delete config; }

vap_status vap_config_load(vap_config* config, const char* path) {
  if (!config || !path) return null_argument("config/path");
  return guard([&] { config->value = vlasov_ap::load_config(path, config->value); });
}

vap_status vap_config_set(vap_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return null_argument("config/key/value");
  return guard([&] { vlasov_ap::set_config_value(config->value, key, value); });
}

vap_status vap_config_override(vap_config* config, const char* assignment) {
  if (!config || !assignment) return null_argument("config/assignment");
  return guard([&] { vlasov_ap::apply_override(config->value, assignment); });
}

vap_status vap_config_validate(const vap_config* config) {
  if (!config) return null_argument("config");
  return guard([&] { config->value.validate(); });
}

vap_status vap_config_dump(const vap_config* config, char* buffer, size_t size, size_t* needed) {
  if (!config) return null_argument("config");
  std::string text;
  const vap_status s = guard([&] { text = vlasov_ap::format_config(config->value); });
  if (s != VAP_OK) return s;
  if (needed) *needed = text.size() + 1;
  if (!buffer || size < text.size() + 1) {
    last_error = "buffer too small for configuration text";
    return VAP_ERR_BUFFER_TOO_SMALL;
  }
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return VAP_OK;
}

vap_status vap_run(const vap_config* config, vap_run_summary* summary) {
  if (!config) return null_argument("config");
  return guard([&] {
    const vlasov_ap::RunResult r = vlasov_ap::run(config->value);
    if (summary) {
      summary->delta_t = r.delta_t;
      summary->steps = r.steps;
      summary->final_rms = r.series.empty() ? 0.0 : r.series.back().rms;
      summary->final_mass = r.series.empty() ? 0.0 : r.series.back().mass;
      summary->max_negative_mass = r.max_negative_mass;
      summary->max_boundary_mass_fraction = r.max_boundary_fraction;
    }
  });
}

vap_status vap_converge(const vap_config* config, const double* dt_list, size_t n_dt, const double* eps_list,
                        size_t n_eps, const int* n_list, size_t n_n, const char* cache_dir) {
  if (!config) return null_argument("config");
  if ((n_dt && !dt_list) || (n_eps && !eps_list) || (n_n && !n_list)) return null_argument("list");
  return guard([&] {
    std::vector<double> dts(dt_list, dt_list + n_dt);
    std::vector<double> eps(eps_list, eps_list + n_eps);
    if (eps.empty()) eps.push_back(config->value.epsilon);
    std::vector<int> ns(n_list, n_list + n_n);
    vlasov_ap::convergence_study(config->value, dts, eps, ns, cache_dir ? cache_dir : "");
  });
}

vap_status vap_table(const vap_config* config, const double* eps_list, size_t n_eps, const char* cache_dir) {
  if (!config) return null_argument("config");
  if (n_eps && !eps_list) return null_argument("eps_list");
  return guard([&] {
    vlasov_ap::table_study(config->value, std::vector<double>(eps_list, eps_list + n_eps), cache_dir ? cache_dir : "");
  });
}

vap_status vap_selftest(vap_selftest_callback callback, void* user, int* failures) {
  return guard([&] {
    const int n = vlasov_ap::selftest([&](const std::string& name, bool ok, const std::string& detail) {
      if (callback) callback(name.c_str(), ok ? 1 : 0, detail.c_str(), user);
    });
    if (failures) *failures = n;
  });
}

vap_status vap_sim_create(const vap_config* config, vap_sim** out) {
  if (!config || !out) return null_argument("config/out");
  return guard([&] { *out = new vap_sim(config->value); });
}

void vap_sim_destroy(vap_sim* sim) { delete sim; }

vap_status vap_sim_advance_to(vap_sim* sim, double t) {
  if (!sim) return null_argument("sim");
  return guard([&] { sim->value.advance_to(t); });
}

double vap_sim_time(const vap_sim* sim) { return sim ? sim->value.time() : 0.0; }
double vap_sim_delta_t(const vap_sim* sim) { return sim ? sim->value.delta_t() : 0.0; }
int vap_sim_grid_size(const vap_sim* sim) { return sim ? sim->value.config().n_points : 0; }

vap_status vap_sim_readout(const vap_sim* sim, double* f_tilde, double* f_rv, size_t size) {
  if (!sim) return null_argument("sim");
  const auto n = static_cast<size_t>(sim->value.config().n_points);
  if (size < n * n) {
    last_error = "readout buffers need n_points^2 entries";
    return VAP_ERR_BUFFER_TOO_SMALL;
  }
  return guard([&] {
    if (f_tilde) {
      const auto v = sim->value.filtered().values();
      std::memcpy(f_tilde, v.data(), v.size() * sizeof(double));
    }
    if (f_rv) {
      const auto v = sim->value.physical().values();
      std::memcpy(f_rv, v.data(), v.size() * sizeof(double));
    }
  });
}

vap_status vap_sim_diagnostics(const vap_sim* sim, vap_diagnostics* out) {
  if (!sim || !out) return null_argument("sim/out");
  return guard([&] {
    const vlasov_ap::DiagnosticsRecord d = sim->value.diagnostics();
    *out = vap_diagnostics{d.time, d.rms, d.mass, d.boundary_mass_fraction, d.negative_mass};
  });
}

double vap_eval_f0(double r, double v, double alpha) { return vlasov_ap::eval_f0(r, v, alpha); }

double vap_limit_solution(double t, double xi1, double xi2) {
  return vlasov_ap::linear_model::limit_solution(t, {xi1, xi2});
}

double vap_second_order_solution(double t, double tau, double xi1, double xi2, double eps) {
  return vlasov_ap::linear_model::second_order_solution(t, tau, {xi1, xi2}, eps);
}

vap_status vap_hamiltonian_d(double xi1, double xi2, const char* tension, double* out) {
  if (!tension || !out) return null_argument("tension/out");
  return guard([&] { *out = vlasov_ap::hamiltonian_d({xi1, xi2}, vlasov_ap::parse_tension(tension)); });
}

}  // extern "C"
