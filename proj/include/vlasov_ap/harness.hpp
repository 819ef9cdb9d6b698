#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vlasov_ap/domain.hpp"
#include "vlasov_ap/fields.hpp"

namespace vlasov_ap {

enum class Scheme { Ap, Splitting, Limit, SecondOrder, Diffusion };
enum class InitKind { Corrected, Plain };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme scheme);
InitKind parse_init(const std::string& name);
std::string to_string(InitKind init);

struct RunConfig {
  double epsilon = 0.25;
  int n_points = 128;
  int n_tau = 64;
  double xi_max = 4.0;
  double t_final = 0.0;
  Scheme scheme = Scheme::Ap;
  InitKind init = InitKind::Corrected;
  FieldMode mode = FieldMode::Linear;
  Tension tension = Tension::Cos2Squared;
  std::optional<double> delta_t;
  double cfl_safety = 1.0;
  std::string output_dir = "out";
  std::vector<double> snapshot_times;
  int rms_every = 1;

  // Splitting runs and splitting references: dt = ref_dt_factor * eps,
  // N_ref = ref_n_factor * N, composition order split_order.
  double ref_dt_factor = 0.05;
  int ref_n_factor = 2;
  int split_order = 2;

  double alpha = 0.2;
  double step_center = 1.2;
  double step_width = 0.3;

  InitialProfile profile() const { return {alpha, step_center, step_width}; }
  PhaseGrid grid() const { return PhaseGrid(n_points, xi_max); }
  // Throws Config on any inconsistency.
  void validate() const;
};

// Flat `key = value` text; `#` starts a comment. Keys are the RunConfig field
// names; lists are comma separated; `delta_t = auto` clears the override.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
// "key=value" form used by command-line overrides.
void apply_override(RunConfig& config, const std::string& assignment);
std::string format_config(const RunConfig& config);

// sqrt(sum xi1^2 max(f, 0) delta^2).
double rms(const PlaneField& f_tilde);
// sum max(-f, 0) delta^2, the mass clamped away by rms.
double negative_mass(const PlaneField& f);
double plane_mass(const PlaneField& f);

enum class Norm { L2, Linf };
// ||a - b|| / ||b||; the L2 norm is weighted by delta^2. Throws ZeroReference.
double rel_error(const PlaneField& a, const PlaneField& b, Norm norm);

struct DiagnosticsRecord {
  double time = 0.0;
  double rms = 0.0;
  double mass = 0.0;
  double boundary_mass_fraction = 0.0;
  double negative_mass = 0.0;
};

// One scheme instance advancing in time. For the analytic models advancing
// only moves the evaluation time.
class Simulation {
 public:
  explicit Simulation(const RunConfig& config);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  const RunConfig& config() const noexcept;
  double time() const noexcept;
  // Nominal step (CFL or override) for time-stepping schemes, splitting dt for splitting, 0 otherwise.
  double delta_t() const noexcept;
  long steps_taken() const noexcept;
  // Steps with dt <= delta_t(); the last step is shortened to land on t exactly.
  void advance_to(double t);
  // Single step (a shorter one if it would pass `limit`).
  void step(double limit);
  // f~ on the xi mesh and f on the (r, v) mesh at the current time.
  PlaneField filtered() const;
  PlaneField physical() const;
  DiagnosticsRecord diagnostics() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct RunResult {
  double delta_t = 0.0;
  long steps = 0;
  std::vector<DiagnosticsRecord> series;
  PlaneField final_filtered;
  PlaneField final_physical;
  double max_negative_mass = 0.0;
  double max_boundary_fraction = 0.0;
};

// Runs without touching the filesystem; `rms_times` (if non-empty) replaces the
// rms_every cadence with explicit sample times.
RunResult simulate(const RunConfig& config, const std::vector<double>& rms_times = {});
// simulate() plus rms.csv, snapshot_<t>.csv and meta.txt under output_dir.
RunResult run(const RunConfig& config);

// Fine splitting solution in the filtered frame, sampled on the run mesh.
struct ReferenceSolution {
  std::vector<double> times;
  std::vector<PlaneField> filtered;
  std::vector<double> rms;
  double delta_t = 0.0;
  int n_points = 0;
};
// `cache_dir` empty disables memoization.
ReferenceSolution splitting_reference(const RunConfig& config, const std::vector<double>& times,
                                      const std::string& cache_dir = {});
// Hash of every setting the reference depends on.
std::string reference_key(const RunConfig& config, const std::vector<double>& times);

// Designated comparison target at t_final: second-order model for linear runs
// with eps <= 0.1, fine splitting otherwise.
PlaneField designated_reference(const RunConfig& config, std::string* label = nullptr,
                                const std::string& cache_dir = {});

struct ConvergenceRow {
  double epsilon = 0.0;
  int n_points = 0;
  double delta_t = 0.0;
  double error = 0.0;
  std::string reference;
};
struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::vector<std::pair<double, double>> slopes;  // (eps, slope of log error vs log dt)
};
// Cells are eps x N x dt. Empty n_list keeps config.n_points; empty dt_list uses the CFL step.
ConvergenceResult convergence_study(const RunConfig& base, const std::vector<double>& dt_list,
                                    const std::vector<double>& eps_list, const std::vector<int>& n_list = {},
                                    const std::string& cache_dir = {}, bool write_files = true);
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

struct TableRow {
  double epsilon = 0.0;
  double ap_linf = 0.0, limit_linf = 0.0, second_order_linf = 0.0;
  double ap_l2 = 0.0, limit_l2 = 0.0, second_order_l2 = 0.0;
};
// Default eps list {1, 0.5, 0.25, 0.1, 0.01}; t_final = 2 pi unless the config sets one.
std::vector<TableRow> table_study(const RunConfig& base, const std::vector<double>& eps_list = {},
                                  const std::string& cache_dir = {}, bool write_files = true);

// Quick invariant suite; `report` receives (name, passed, detail).
using SelftestReporter = std::function<void(const std::string&, bool, const std::string&)>;
int selftest(const SelftestReporter& report);

// Worker count for sweeps: VLASOV_AP_THREADS if set, else hardware concurrency.
int sweep_workers();

}  // namespace vlasov_ap
