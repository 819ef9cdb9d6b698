#include <cmath>
#include <algorithm>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "../support/oracles.hpp"
#include "vlasov_ap/error.hpp"
#include "vlasov_ap/harness.hpp"
#include "vlasov_ap/reference.hpp"
#include <doctest.h>

using namespace vlasov_ap;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vlasov_ap_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

// L1-in-time distance between two sampled series (trapezoid rule).
double l1_distance(const std::vector<double>& t, const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    s += 0.5 * (t[k + 1] - t[k]) * (std::abs(a[k] - b[k]) + std::abs(a[k + 1] - b[k + 1]));
  return s;
}

std::string snapshot_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshot_%.6f.csv", t);
  return buf;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(
      "# comment line\n"
      "epsilon = 0.1   # trailing comment\n"
      "n_points = 32\n"
      "n_tau = 16\n"
      "xi_max = 3.5\n"
      "t_final = pi/16\n"
      "scheme = splitting\n"
      "init = plain\n"
      "mode = poisson\n"
      "tension = cos4\n"
      "delta_t = 2*pi/100\n"
      "cfl_safety = 0.5\n"
      "output_dir = some/dir\n"
      "snapshot_times = 0, pi/32, pi/16\n"
      "rms_every = 3\n"
      "ref_dt_factor = 0.01\n"
      "ref_n_factor = 4\n"
      "split_order = 6\n"
      "alpha = 0.3\n"
      "step_center = 1.0\n"
      "step_width = 0.2\n"
      "\n");
  CHECK(c.epsilon == 0.1);
  CHECK(c.n_points == 32);
  CHECK(c.n_tau == 16);
  CHECK(c.xi_max == 3.5);
  CHECK(c.t_final == doctest::Approx(pi / 16).epsilon(1e-15));
  CHECK(c.scheme == Scheme::Splitting);
  CHECK(c.init == InitKind::Plain);
  CHECK(c.mode == FieldMode::Poisson);
  CHECK(c.tension == Tension::Cos4);
  REQUIRE(c.delta_t.has_value());
  CHECK(*c.delta_t == doctest::Approx(2 * pi / 100).epsilon(1e-15));
  CHECK(c.cfl_safety == 0.5);
  CHECK(c.output_dir == "some/dir");
  REQUIRE(c.snapshot_times.size() == 3);
  CHECK(c.snapshot_times[1] == doctest::Approx(pi / 32).epsilon(1e-15));
  CHECK(c.rms_every == 3);
  CHECK(c.ref_dt_factor == 0.01);
  CHECK(c.ref_n_factor == 4);
  CHECK(c.split_order == 6);
  CHECK(c.alpha == 0.3);
  CHECK(c.step_center == 1.0);
  CHECK(c.step_width == 0.2);

  // Round trip through the textual form.
  const RunConfig back = parse_config(format_config(c));
  CHECK(format_config(back) == format_config(c));

  const RunConfig automatic = parse_config("delta_t = auto\n", c);
  CHECK_FALSE(automatic.delta_t.has_value());

  RunConfig o;
  apply_override(o, "epsilon=0.5");
  apply_override(o, " scheme = limit ");
  CHECK(o.epsilon == 0.5);
  CHECK(o.scheme == Scheme::Limit);
  CHECK(code_of([&] { apply_override(o, "epsilon"); }) == ErrorCode::Config);
}

TEST_CASE("config errors carry the line number") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("epsilon = 0.1\n\nbogus = 1\n").rfind("line 3:", 0) == 0);
  CHECK(message("epsilon = abc\n").rfind("line 1:", 0) == 0);
  CHECK(message("# c\nn_points\n").rfind("line 2:", 0) == 0);
  CHECK(message("scheme = euler\n").find("scheme") != std::string::npos);
  CHECK(message("n_points = 3.5\n").rfind("line 1:", 0) == 0);
  CHECK(code_of([] { load_config("/nonexistent/vlasov_ap.cfg"); }) == ErrorCode::Io);
}

TEST_CASE("config validation") {
  auto check = [](auto mutate, ErrorCode code = ErrorCode::Config) {
    RunConfig c;
    c.t_final = 1.0;
    mutate(c);
    CHECK(code_of([&] { c.validate(); }) == code);
  };
  RunConfig ok;
  ok.t_final = 1.0;
  CHECK_NOTHROW(ok.validate());
  check([](RunConfig& c) { c.epsilon = 0.0; });
  check([](RunConfig& c) { c.n_points = 96; });
  check([](RunConfig& c) { c.n_tau = 2; });
  check([](RunConfig& c) { c.xi_max = -1.0; });
  check([](RunConfig& c) { c.t_final = -0.1; });
  check([](RunConfig& c) { c.delta_t = 0.0; });
  check([](RunConfig& c) { c.cfl_safety = 1.5; });
  check([](RunConfig& c) { c.rms_every = 0; });
  check([](RunConfig& c) { c.split_order = 3; });
  check([](RunConfig& c) { c.snapshot_times = {2.0}; });
  check([](RunConfig& c) {
    c.scheme = Scheme::Limit;
    c.mode = FieldMode::Poisson;
  });
  check([](RunConfig& c) {
    c.scheme = Scheme::SecondOrder;
    c.tension = Tension::Cos4;
  });
  check([](RunConfig& c) { c.scheme = Scheme::Diffusion; }, ErrorCode::NonMeanFreeTension);
  RunConfig diffusion = ok;
  diffusion.scheme = Scheme::Diffusion;
  diffusion.tension = Tension::Cos4;
  CHECK_NOTHROW(diffusion.validate());
}

TEST_CASE("rms examples") {
  const PhaseGrid g(64, 4.0);
  PlaneField zero(g);
  CHECK(rms(zero) == 0.0);

  // Indicator of [0, 1]^2 on grid-aligned nodes.
  PlaneField box(g);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j)
      if (g.node(i) >= 0.0 && g.node(i) < 1.0 && g.node(j) >= 0.0 && g.node(j) < 1.0) box(i, j) = 1.0;
  CHECK(std::abs(rms(box) - std::sqrt(1.0 / 3.0)) <= g.delta());

  // Reflection xi1 -> -xi1 maps node i to 64 - i; node 0 (xi1 = -4) carries zero.
  PlaneField f(g), reflected(g);
  for (int i = 1; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      const double x = g.node(i), y = g.node(j);
      f(i, j) = std::exp(-(x - 0.7) * (x - 0.7) - y * y / 2);
    }
  for (int i = 1; i < 64; ++i)
    for (int j = 0; j < 64; ++j) reflected(64 - i, j) = f(i, j);
  CHECK(rms(reflected) == doctest::Approx(rms(f)).epsilon(1e-14));

  // The negative part is clamped and reported separately.
  PlaneField neg = box;
  neg(40, 40) = -2.0;
  CHECK(rms(neg) == doctest::Approx(rms(box)).epsilon(1e-15));
  CHECK(negative_mass(neg) == doctest::Approx(2.0 * g.delta() * g.delta()).epsilon(1e-15));
}

TEST_CASE("relative error examples") {
  const PhaseGrid g(16, 4.0);
  PlaneField b(g);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) b(i, j) = 1.0 + std::sin(g.node(i)) * std::cos(g.node(j));
  PlaneField two = b;
  for (double& x : two.values()) x *= 2.0;
  for (Norm n : {Norm::L2, Norm::Linf}) {
    CHECK(rel_error(b, b, n) == 0.0);
    CHECK(rel_error(two, b, n) == doctest::Approx(1.0).epsilon(1e-15));
  }
  PlaneField bumped = b;
  bumped(5, 7) += 1e-3;
  CHECK(rel_error(bumped, b, Norm::Linf) ==
        doctest::Approx(1e-3 / oracle::max_abs(b.values())).epsilon(1e-9));
  CHECK(code_of([&] { rel_error(b, PlaneField(g), Norm::L2); }) == ErrorCode::ZeroReference);
  CHECK(code_of([&] { rel_error(b, PlaneField(g), Norm::Linf); }) == ErrorCode::ZeroReference);
}

TEST_CASE("run writes its artifacts") {
  const fs::path dir = fresh_dir("artifacts");
  RunConfig c;
  c.epsilon = 0.5;
  c.n_points = 16;
  c.n_tau = 16;
  c.t_final = 0.1;
  c.snapshot_times = {0.05};
  c.output_dir = dir.string();
  const RunResult r = run(c);
  CHECK(r.steps > 0);

  const std::string series = slurp(dir / "rms.csv");
  CHECK(series.rfind("time,rms,mass,boundary_mass_fraction,negative_mass\n", 0) == 0);
  // One row per step plus the initial one.
  CHECK(std::count(series.begin(), series.end(), '\n') == r.steps + 2);

  const std::string meta = slurp(dir / "meta.txt");
  CHECK(meta.find("delta_t_used = ") != std::string::npos);
  CHECK(meta.find("epsilon = ") != std::string::npos);
  CHECK(fs::exists(dir / snapshot_name(0.05)));
  CHECK(fs::exists(dir / snapshot_name(0.1)));
  const std::string snap = slurp(dir / snapshot_name(0.1));
  CHECK(snap.rfind("xi1,xi2,f_tilde,r,v,f_rv\n", 0) == 0);
  CHECK(std::count(snap.begin(), snap.end(), '\n') == 16 * 16 + 1);

  // Config errors surface before any output is written.
  const fs::path bad_dir = fresh_dir("bad");
  RunConfig bad = c;
  bad.output_dir = bad_dir.string();
  bad.n_points = 24;
  CHECK(code_of([&] { run(bad); }) == ErrorCode::Config);
  CHECK_FALSE(fs::exists(bad_dir));
  fs::remove_all(dir);
}

TEST_CASE("limit scheme snapshot equals the limit model") {
  RunConfig c;
  c.scheme = Scheme::Limit;
  c.n_points = 32;
  c.t_final = 1.3;
  for (double eps : {1.0, 0.01}) {
    c.epsilon = eps;
    const RunResult r = simulate(c);
    const PhaseGrid g = c.grid();
    double worst = 0.0;
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j)
        worst = std::max(worst, std::abs(r.final_filtered(i, j) - linear_model::limit_solution(1.3, {g.node(i), g.node(j)})));
    CHECK(worst == 0.0);
  }
}

TEST_CASE("ap at t = 0 returns f0 for both initializations") {
  RunConfig c;
  c.n_points = 32;
  c.epsilon = 0.3;
  c.t_final = 0.0;
  const PlaneField f0 = sample_profile(c.profile(), c.grid());
  for (InitKind init : {InitKind::Corrected, InitKind::Plain}) {
    c.init = init;
    const RunResult r = simulate(c);
    CHECK(r.steps == 0);
    CHECK(oracle::max_abs_diff(r.final_filtered.values(), f0.values()) < 1e-13);
  }
}

TEST_CASE("ap and splitting agree at eps = 1") {
  RunConfig ap;
  ap.epsilon = 1.0;
  ap.n_points = 64;
  ap.t_final = pi / 16;
  RunConfig split = ap;
  split.scheme = Scheme::Splitting;
  CHECK(rel_error(simulate(ap).final_filtered, simulate(split).final_filtered, Norm::L2) <= 2e-2);
}

TEST_CASE("splitting error grows like (dt/eps)^2") {
  // Fixed dt; the fourth-order splitting with a 50x smaller step is the reference.
  std::vector<double> errors;
  for (double eps : {1.0, 0.5, 0.25}) {
    RunConfig c;
    c.scheme = Scheme::Splitting;
    c.epsilon = eps;
    c.n_points = 64;
    c.t_final = pi / 4;
    c.delta_t = 0.02;
    RunConfig ref = c;
    ref.split_order = 4;
    ref.ref_dt_factor = 0.01;
    ref.ref_n_factor = 1;
    const ReferenceSolution sol = splitting_reference(ref, {c.t_final});
    errors.push_back(rel_error(simulate(c).final_filtered, sol.filtered[0], Norm::L2));
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    CHECK(errors[k] / errors[k - 1] >= 3.0);
    CHECK(errors[k] / errors[k - 1] <= 5.0);
  }
}

TEST_CASE("runs are deterministic") {
  RunConfig c;
  c.epsilon = 0.2;
  c.n_points = 32;
  c.n_tau = 16;
  c.mode = FieldMode::Poisson;
  c.t_final = 0.2;
  c.snapshot_times = {0.1};
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  c.output_dir = a.string();
  run(c);
  c.output_dir = b.string();
  run(c);
  for (const std::string name : {std::string("rms.csv"), snapshot_name(0.1), snapshot_name(0.2)}) {
    const std::string x = slurp(a / name);
    CHECK_FALSE(x.empty());
    CHECK(x == slurp(b / name));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("filtered rms carries no fast-scale content") {
  // Hann-windowed DFT of the rms series; energy at frequencies >= 1/(2 pi eps)
  // relative to the total.
  const double eps = 0.01;
  for (Scheme scheme : {Scheme::Limit, Scheme::Ap}) {
    RunConfig c;
    c.scheme = scheme;
    c.epsilon = eps;
    c.n_points = 64;
    c.t_final = 2 * pi;
    c.delta_t = 0.02;
    const RunResult r = simulate(c);
    const int n = static_cast<int>(r.series.size());
    const double dt = r.series[1].time - r.series[0].time;
    double total = 0.0, high = 0.0;
    for (int k = 0; k <= n / 2; ++k) {
      std::complex<double> z = 0.0;
      for (int j = 0; j < n; ++j) {
        const double w = 0.5 - 0.5 * std::cos(2 * pi * j / (n - 1));
        z += w * r.series[j].rms * std::polar(1.0, -2 * pi * k * j / n);
      }
      const double energy = std::norm(z / static_cast<double>(n));
      total += energy;
      if (k / (n * dt) >= 1.0 / (2 * pi * eps)) high += energy;
    }
    CHECK(high <= 1e-6 * total);
  }
}

TEST_CASE("corrected initial data beats plain initial data in the rms") {
  RunConfig c;
  c.epsilon = 0.025;
  c.n_points = 128;
  c.t_final = pi / 2;
  c.delta_t = 0.02;
  std::vector<double> times;
  for (int k = 0; k <= 78; ++k) times.push_back(c.t_final * k / 78);
  RunConfig ref = c;
  ref.split_order = 4;
  ref.ref_dt_factor = 0.05;
  ref.ref_n_factor = 1;
  const ReferenceSolution sol = splitting_reference(ref, times);
  double err[2];
  for (int k = 0; k < 2; ++k) {
    RunConfig run_cfg = c;
    run_cfg.init = k == 0 ? InitKind::Corrected : InitKind::Plain;
    const RunResult r = simulate(run_cfg, times);
    std::vector<double> series;
    for (const auto& d : r.series) series.push_back(d.rms);
    err[k] = l1_distance(times, series, sol.rms);
  }
  CHECK(err[1] >= 3.0 * err[0]);
}

TEST_CASE("sweep worker count") {
  CHECK(sweep_workers() >= 1);
  const char* saved = std::getenv("VLASOV_AP_THREADS");
  const std::string keep = saved ? saved : "";
  setenv("VLASOV_AP_THREADS", "3", 1);
  CHECK(sweep_workers() == 3);
  setenv("VLASOV_AP_THREADS", "junk", 1);
  CHECK(sweep_workers() >= 1);
  if (saved) setenv("VLASOV_AP_THREADS", keep.c_str(), 1);
  else unsetenv("VLASOV_AP_THREADS");
}
