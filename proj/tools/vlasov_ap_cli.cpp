#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "vlasov_ap.h"

namespace {

using ConfigPtr = std::unique_ptr<vap_config, decltype(&vap_config_destroy)>;

int exit_code(vap_status s) {
  switch (s) {
    case VAP_OK: return 0;
    case VAP_ERR_CONFIG:
    case VAP_ERR_INVALID_ARGUMENT:
    case VAP_ERR_NON_MEAN_FREE: return 2;
    case VAP_ERR_STABILITY: return 3;
    default: return 1;
  }
}

int fail(vap_status s) {
  std::fprintf(stderr, "vlasov-ap: error (%s): %s\n", vap_status_string(s), vap_last_error());
  return exit_code(s);
}

// Loads the file, applies --set overrides and validates before any compute.
vap_status prepare(ConfigPtr& cfg, const std::string& path, const std::vector<std::string>& overrides) {
  vap_config* raw = nullptr;
  if (vap_status s = vap_config_create(&raw); s != VAP_OK) return s;
  cfg.reset(raw);
  if (vap_status s = vap_config_load(cfg.get(), path.c_str()); s != VAP_OK) return s;
  for (const auto& o : overrides)
    if (vap_status s = vap_config_override(cfg.get(), o.c_str()); s != VAP_OK) return s;
  return vap_config_validate(cfg.get());
}

void print_selftest(const char* name, int passed, const char* detail, void*) {
  std::printf("%s %s (%s)\n", passed ? "PASS" : "FAIL", name, detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic-preserving solver for the oscillatory paraxial Vlasov-Poisson beam"};
  app.name("vlasov-ap");
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string cache_dir;
  std::vector<double> dt_list, eps_list;
  std::vector<int> n_list;

  auto* run = app.add_subcommand("run", "Run one configuration and write rms.csv, snapshots and meta.txt");
  run->add_option("config", config_path, "key = value configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "Override a configuration value (key=value)");

  auto* converge = app.add_subcommand("converge", "Error vs time step sweep, writes convergence.csv");
  converge->add_option("config", config_path, "key = value configuration file")->required()->check(CLI::ExistingFile);
  converge->add_option("--dt", dt_list, "Time steps (comma separated); omit for the CFL step")->delimiter(',');
  converge->add_option("--eps", eps_list, "Epsilon values (comma separated)")->delimiter(',');
  converge->add_option("--n", n_list, "Grid sizes (comma separated) for CFL-locked refinement")->delimiter(',');
  converge->add_option("--reference-cache", cache_dir, "Directory memoizing reference solutions");
  converge->add_option("--set", overrides, "Override a configuration value (key=value)");

  auto* table = app.add_subcommand("table", "Error table of the AP scheme and the asymptotic models, writes table.csv");
  table->add_option("config", config_path, "key = value configuration file")->required()->check(CLI::ExistingFile);
  table->add_option("--eps", eps_list, "Epsilon values (comma separated)")->delimiter(',');
  table->add_option("--reference-cache", cache_dir, "Directory memoizing reference solutions");
  table->add_option("--set", overrides, "Override a configuration value (key=value)");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant suite");

  CLI11_PARSE(app, argc, argv);

  if (selftest->parsed()) {
    int failures = 0;
    if (vap_status s = vap_selftest(print_selftest, nullptr, &failures); s != VAP_OK) return fail(s);
    std::printf("%d failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
  }

  ConfigPtr cfg(nullptr, &vap_config_destroy);
  if (vap_status s = prepare(cfg, config_path, overrides); s != VAP_OK) return fail(s);

  if (run->parsed()) {
    vap_run_summary summary{};
    if (vap_status s = vap_run(cfg.get(), &summary); s != VAP_OK) return fail(s);
    std::printf("steps %ld, dt %.17g, final rms %.17g, mass %.17g\n", summary.steps, summary.delta_t,
                summary.final_rms, summary.final_mass);
  } else if (converge->parsed()) {
    vap_status s = vap_converge(cfg.get(), dt_list.data(), dt_list.size(), eps_list.data(), eps_list.size(),
                                n_list.data(), n_list.size(), cache_dir.empty() ? nullptr : cache_dir.c_str());
    if (s != VAP_OK) return fail(s);
  } else if (table->parsed()) {
    vap_status s = vap_table(cfg.get(), eps_list.data(), eps_list.size(), cache_dir.empty() ? nullptr : cache_dir.c_str());
    if (s != VAP_OK) return fail(s);
  }
  if (long w = vap_warning_count(); w > 0) std::fprintf(stderr, "vlasov-ap: %ld warning(s)\n", w);
  return 0;
}
