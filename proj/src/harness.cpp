#include "vlasov_ap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "parallel.hpp"
#include "vlasov_ap/averaging.hpp"
#include "vlasov_ap/error.hpp"
#include "vlasov_ap/reference.hpp"
#include "vlasov_ap/stepper.hpp"

namespace vlasov_ap {

namespace fs = std::filesystem;

Scheme parse_scheme(const std::string& name) {
  if (name == "ap") return Scheme::Ap;
  if (name == "splitting") return Scheme::Splitting;
  if (name == "limit") return Scheme::Limit;
  if (name == "second_order") return Scheme::SecondOrder;
  if (name == "diffusion") return Scheme::Diffusion;
  raise(ErrorCode::Config, "unknown scheme '" + name + "' (expected ap, splitting, limit, second_order or diffusion)");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Ap: return "ap";
    case Scheme::Splitting: return "splitting";
    case Scheme::Limit: return "limit";
    case Scheme::SecondOrder: return "second_order";
    case Scheme::Diffusion: return "diffusion";
  }
  return "?";
}

InitKind parse_init(const std::string& name) {
  if (name == "corrected") return InitKind::Corrected;
  if (name == "plain") return InitKind::Plain;
  raise(ErrorCode::Config, "unknown init '" + name + "' (expected corrected or plain)");
}

std::string to_string(InitKind init) { return init == InitKind::Corrected ? "corrected" : "plain"; }

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& token, const std::string& key) {
  if (token == "pi") return std::numbers::pi;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != token.size()) raise(ErrorCode::Config, "bad number '" + token + "' for " + key);
  return v;
}

// Products and quotients of numbers and `pi`, e.g. "pi/16" or "2*pi".
double parse_real(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  if (s.empty()) raise(ErrorCode::Config, "empty value for " + key);
  double value = 1.0;
  char op = '*';
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find_first_of("*/", pos);
    const std::string token = trim(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    const double x = parse_number(token, key);
    value = op == '*' ? value * x : value / x;
    if (next == std::string::npos) break;
    op = s[next];
    pos = next + 1;
  }
  return value;
}

int parse_int(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != s.size()) raise(ErrorCode::Config, "bad integer '" + s + "' for " + key);
  return static_cast<int>(v);
}

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_real(item, key));
  }
  return out;
}

void write_atomic(const fs::path& path, const std::string& content) {
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    if (!out) raise(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) raise(ErrorCode::Io, "cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

// Runs fn(0..count-1) on up to `workers` threads; the first exception is rethrown.
void run_pool(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(sweep_workers()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&] {
      detail::limit_inner_threads(1);
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

int sweep_workers() {
  if (const int n = detail::configured_threads(); n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { raise(ErrorCode::Config, msg); };
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon must be positive");
  if (n_points < 4 || !is_power_of_two(n_points)) fail("n_points must be a power of two >= 4");
  if (n_tau < 4 || !is_power_of_two(n_tau)) fail("n_tau must be a power of two >= 4");
  if (!(xi_max > 0.0) || !std::isfinite(xi_max)) fail("xi_max must be positive");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) fail("t_final must be nonnegative");
  if (delta_t && (!(*delta_t > 0.0) || !std::isfinite(*delta_t))) fail("delta_t must be positive");
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) fail("cfl_safety must lie in (0, 1]");
  if (output_dir.empty()) fail("output_dir must not be empty");
  if (rms_every < 1) fail("rms_every must be >= 1");
  if (!(ref_dt_factor > 0.0) || !std::isfinite(ref_dt_factor)) fail("ref_dt_factor must be positive");
  if (ref_n_factor < 1) fail("ref_n_factor must be >= 1");
  if (split_order != 2 && split_order != 4 && split_order != 6) fail("split_order must be 2, 4 or 6");
  if (!(alpha > 0.0) || !(step_width > 0.0)) fail("alpha and step_width must be positive");
  for (double t : snapshot_times)
    if (!(t >= 0.0 && t <= t_final)) fail("snapshot time " + fmt(t) + " outside [0, t_final]");
  if ((scheme == Scheme::Limit || scheme == Scheme::SecondOrder) &&
      (mode != FieldMode::Linear || tension != Tension::Cos2Squared))
    fail("the limit and second-order models exist for mode = linear, tension = cos2sq only");
  if (scheme == Scheme::Diffusion) {
    if (mode != FieldMode::Linear) fail("the diffusion scheme is linear only");
    const auto c = tension_fourier(tension);
    if (std::abs(c[0]) > 1e-14 || std::abs(c[2]) > 1e-14)
      raise(ErrorCode::NonMeanFreeTension, "the diffusion scheme needs a tension without modes 0 and +-2");
  }
}

void set_config_value(RunConfig& c, const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  if (key == "epsilon") c.epsilon = parse_real(value, key);
  else if (key == "n_points") c.n_points = parse_int(value, key);
  else if (key == "n_tau") c.n_tau = parse_int(value, key);
  else if (key == "xi_max") c.xi_max = parse_real(value, key);
  else if (key == "t_final") c.t_final = parse_real(value, key);
  else if (key == "scheme") c.scheme = parse_scheme(value);
  else if (key == "init") c.init = parse_init(value);
  else if (key == "mode") c.mode = parse_field_mode(value);
  else if (key == "tension") c.tension = parse_tension(value);
  else if (key == "delta_t") c.delta_t = (value == "auto" || value.empty()) ? std::nullopt : std::optional(parse_real(value, key));
  else if (key == "cfl_safety") c.cfl_safety = parse_real(value, key);
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "snapshot_times") c.snapshot_times = parse_list(value, key);
  else if (key == "rms_every") c.rms_every = parse_int(value, key);
  else if (key == "ref_dt_factor") c.ref_dt_factor = parse_real(value, key);
  else if (key == "ref_n_factor") c.ref_n_factor = parse_int(value, key);
  else if (key == "split_order") c.split_order = parse_int(value, key);
  else if (key == "alpha") c.alpha = parse_real(value, key);
  else if (key == "step_center") c.step_center = parse_real(value, key);
  else if (key == "step_width") c.step_width = parse_real(value, key);
  else raise(ErrorCode::Config, "unknown configuration key '" + key + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::stringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::Config, "line " + std::to_string(number) + ": expected 'key = value'");
    try {
      set_config_value(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      raise(e.code(), "line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::Io, "cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) raise(ErrorCode::Config, "override '" + assignment + "' is not key=value");
  set_config_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string format_config(const RunConfig& c) {
  std::ostringstream o;
  std::string snaps;
  for (std::size_t k = 0; k < c.snapshot_times.size(); ++k) snaps += (k ? ", " : "") + fmt(c.snapshot_times[k]);
  o << "epsilon = " << fmt(c.epsilon) << '\n'
    << "n_points = " << c.n_points << '\n'
    << "n_tau = " << c.n_tau << '\n'
    << "xi_max = " << fmt(c.xi_max) << '\n'
    << "t_final = " << fmt(c.t_final) << '\n'
    << "scheme = " << to_string(c.scheme) << '\n'
    << "init = " << to_string(c.init) << '\n'
    << "mode = " << to_string(c.mode) << '\n'
    << "tension = " << to_string(c.tension) << '\n'
    << "delta_t = " << (c.delta_t ? fmt(*c.delta_t) : std::string("auto")) << '\n'
    << "cfl_safety = " << fmt(c.cfl_safety) << '\n'
    << "output_dir = " << c.output_dir << '\n'
    << "snapshot_times = " << snaps << '\n'
    << "rms_every = " << c.rms_every << '\n'
    << "ref_dt_factor = " << fmt(c.ref_dt_factor) << '\n'
    << "ref_n_factor = " << c.ref_n_factor << '\n'
    << "split_order = " << c.split_order << '\n'
    << "alpha = " << fmt(c.alpha) << '\n'
    << "step_center = " << fmt(c.step_center) << '\n'
    << "step_width = " << fmt(c.step_width) << '\n';
  return o.str();
}

double rms(const PlaneField& f_tilde) {
  const PhaseGrid& grid = f_tilde.grid();
  double sum = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const double x = grid.node(i);
    for (int j = 0; j < grid.size(); ++j) sum += x * x * std::max(f_tilde(i, j), 0.0);
  }
  return std::sqrt(sum * grid.delta() * grid.delta());
}

double negative_mass(const PlaneField& f) {
  double sum = 0.0;
  for (double x : f.values()) sum += std::max(-x, 0.0);
  return sum * f.grid().delta() * f.grid().delta();
}

double plane_mass(const PlaneField& f) {
  double sum = 0.0;
  for (double x : f.values()) sum += x;
  return sum * f.grid().delta() * f.grid().delta();
}

double rel_error(const PlaneField& a, const PlaneField& b, Norm norm) {
  if (!(a.grid() == b.grid())) raise(ErrorCode::InvalidArgument, "rel_error: grids differ");
  auto va = a.values();
  auto vb = b.values();
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < va.size(); ++k) {
    const double d = va[k] - vb[k];
    if (norm == Norm::L2) {
      num += d * d;
      den += vb[k] * vb[k];
    } else {
      num = std::max(num, std::abs(d));
      den = std::max(den, std::abs(vb[k]));
    }
  }
  if (den == 0.0) raise(ErrorCode::ZeroReference, "rel_error: reference norm is zero");
  // The delta^2 weights cancel in the ratio.
  return norm == Norm::L2 ? std::sqrt(num / den) : num / den;
}

// ---------------------------------------------------------------------------

struct Simulation::Impl {
  RunConfig cfg;
  PhaseGrid grid;
  TorusGrid torus;
  TorusOps ops;
  double t = 0.0;
  double dt = 0.0;
  long steps = 0;

  std::unique_ptr<ApStepper> stepper;
  StateField state;
  MicroMacro gh;
  VectorFieldSample e_applied;
  std::unique_ptr<SplittingSolver> split;
  PlaneField f_rv;

  explicit Impl(const RunConfig& c) : cfg(c), grid(c.grid()), torus(c.n_tau), ops(torus) {
    const InitialProfile profile = cfg.profile();
    switch (cfg.scheme) {
      case Scheme::Ap: {
        stepper = std::make_unique<ApStepper>(grid, torus, cfg.tension, cfg.mode);
        state = cfg.init == InitKind::Corrected
                    ? build_initial_with_correction(cfg.tension, cfg.mode, cfg.epsilon, grid, torus, profile)
                    : build_initial_plain(grid, torus, profile);
        dt = cfg.delta_t ? *cfg.delta_t : cfl_dt(grid, stepper->field(0.0, state), cfg.cfl_safety);
        break;
      }
      case Scheme::Diffusion: {
        e_applied = applied_field_sample(cfg.tension, grid, torus);
        require_mean_free_field(e_applied, ops);
        const StateField f0 =
            cfg.init == InitKind::Corrected
                ? build_initial_with_correction(cfg.tension, FieldMode::Linear, cfg.epsilon, grid, torus, profile)
                : build_initial_plain(grid, torus, profile);
        gh = micro_macro_split(f0, ops);
        dt = cfg.delta_t ? *cfg.delta_t : cfl_dt(grid, e_applied, cfg.cfl_safety);
        break;
      }
      case Scheme::Splitting: {
        split = std::make_unique<SplittingSolver>(grid, cfg.tension, cfg.mode, cfg.epsilon, cfg.split_order);
        f_rv = sample_profile(profile, grid);
        dt = cfg.delta_t ? *cfg.delta_t : cfg.ref_dt_factor * cfg.epsilon;
        break;
      }
      case Scheme::Limit:
      case Scheme::SecondOrder:
        dt = cfg.delta_t ? *cfg.delta_t : cfl_dt(grid, applied_field_sample(cfg.tension, grid, torus), cfg.cfl_safety);
        break;
    }
  }

  double angle() const {
    return cfg.scheme == Scheme::Diffusion ? t / (cfg.epsilon * cfg.epsilon) : t / cfg.epsilon;
  }

  void step(double limit) {
    const double remaining = limit - t;
    if (!(remaining > 0.0)) return;
    const bool last = remaining <= dt * (1.0 + 1e-9);
    const double h = last ? remaining : dt;
    switch (cfg.scheme) {
      case Scheme::Ap: {
        const SchemeParams p{cfg.epsilon, h, cfg.cfl_safety};
        state = stepper->advance(state, t, p);
        break;
      }
      case Scheme::Diffusion: {
        const SchemeParams p{cfg.epsilon, h, cfg.cfl_safety};
        gh = step_diffusion(gh.macro, gh.micro, e_applied, p, ops);
        break;
      }
      case Scheme::Splitting: split->advance(f_rv, t, t + h, h); break;
      case Scheme::Limit:
      case Scheme::SecondOrder: break;
    }
    t = last ? limit : t + h;
    ++steps;
  }

  PlaneField analytic(double at_t) const {
    return cfg.scheme == Scheme::Limit ? linear_model::sample_limit(grid, at_t, cfg.profile())
                                       : linear_model::sample_second_order(grid, at_t, cfg.epsilon, cfg.profile());
  }

  PlaneField filtered() const {
    switch (cfg.scheme) {
      case Scheme::Ap: return readout_at_angle(state, angle(), ops).f_tilde;
      case Scheme::Diffusion: return readout_at_angle(micro_macro_join(gh.macro, gh.micro), angle(), ops).f_tilde;
      case Scheme::Splitting: return rotate_to_filtered(f_rv, angle());
      case Scheme::Limit:
      case Scheme::SecondOrder: return analytic(t);
    }
    return PlaneField(grid);
  }

  PlaneField physical() const {
    switch (cfg.scheme) {
      case Scheme::Ap: return readout_at_angle(state, angle(), ops).f_rv;
      case Scheme::Diffusion: return readout_at_angle(micro_macro_join(gh.macro, gh.micro), angle(), ops).f_rv;
      case Scheme::Splitting: return f_rv;
      case Scheme::Limit:
      case Scheme::SecondOrder: {
        const InitialProfile profile = cfg.profile();
        const double theta = std::fmod(angle(), kTwoPi);
        PlaneField out(grid);
        for (int i = 0; i < grid.size(); ++i)
          for (int j = 0; j < grid.size(); ++j) {
            const Point2 xi = rotate_to_xi(theta, {grid.node(i), grid.node(j)});
            out(i, j) = cfg.scheme == Scheme::Limit
                            ? linear_model::limit_solution(t, xi, profile)
                            : linear_model::second_order_solution(t, theta, xi, cfg.epsilon, profile);
          }
        return out;
      }
    }
    return PlaneField(grid);
  }

  DiagnosticsRecord diagnostics() const {
    DiagnosticsRecord d;
    d.time = t;
    if (cfg.scheme == Scheme::Splitting) {
      d.rms = rms_rv(f_rv, angle());
      d.mass = plane_mass(f_rv);
      d.boundary_mass_fraction = boundary_mass_fraction(f_rv);
      d.negative_mass = negative_mass(f_rv);
      return d;
    }
    const PlaneField ft = filtered();
    d.rms = rms(ft);
    d.negative_mass = negative_mass(ft);
    switch (cfg.scheme) {
      case Scheme::Ap: {
        const MicroMacro mm = micro_macro_split(state, ops);
        d.mass = macro_mass(mm.macro);
        d.boundary_mass_fraction = boundary_mass_fraction(mm.macro);
        break;
      }
      case Scheme::Diffusion:
        d.mass = macro_mass(gh.macro);
        d.boundary_mass_fraction = boundary_mass_fraction(gh.macro);
        break;
      default:
        d.mass = plane_mass(ft);
        d.boundary_mass_fraction = boundary_mass_fraction(ft);
    }
    return d;
  }
};

Simulation::Simulation(const RunConfig& config) {
  config.validate();
  detail::apply_thread_cap();
  impl_ = std::make_unique<Impl>(config);
}
Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

const RunConfig& Simulation::config() const noexcept { return impl_->cfg; }
double Simulation::time() const noexcept { return impl_->t; }
double Simulation::delta_t() const noexcept { return impl_->dt; }
long Simulation::steps_taken() const noexcept { return impl_->steps; }
void Simulation::step(double limit) { impl_->step(limit); }
void Simulation::advance_to(double t) {
  if (!(t >= impl_->t)) raise(ErrorCode::InvalidArgument, "cannot advance backwards in time");
  while (impl_->t < t) impl_->step(t);
}
PlaneField Simulation::filtered() const { return impl_->filtered(); }
PlaneField Simulation::physical() const { return impl_->physical(); }
DiagnosticsRecord Simulation::diagnostics() const { return impl_->diagnostics(); }

// ---------------------------------------------------------------------------

namespace {

struct Snapshot {
  double time;
  PlaneField filtered;
  PlaneField physical;
};

struct SimulationOutput {
  RunResult result;
  std::vector<Snapshot> snapshots;
};

SimulationOutput simulate_impl(const RunConfig& config, const std::vector<double>& rms_times, bool keep_snapshots) {
  Simulation sim(config);
  SimulationOutput out;
  RunResult& r = out.result;
  r.delta_t = sim.delta_t();
  bool warned = false;
  auto record = [&] {
    const DiagnosticsRecord d = sim.diagnostics();
    r.max_negative_mass = std::max(r.max_negative_mass, d.negative_mass);
    r.max_boundary_fraction = std::max(r.max_boundary_fraction, d.boundary_mass_fraction);
    if (d.boundary_mass_fraction > 1e-8 && !warned) {
      warned = true;
      warn("mass within 2 cells of the boundary reached " + fmt(d.boundary_mass_fraction) + " of the total at t = " +
           fmt(d.time));
    }
    r.series.push_back(d);
  };

  std::vector<double> snaps = config.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  auto take_snapshots = [&] {
    while (next_snap < snaps.size() && snaps[next_snap] <= sim.time()) {
      if (keep_snapshots) out.snapshots.push_back({sim.time(), sim.filtered(), sim.physical()});
      ++next_snap;
    }
  };

  std::vector<double> samples = rms_times;
  std::sort(samples.begin(), samples.end());
  std::size_t next_sample = 0;
  if (samples.empty()) record();
  else
    while (next_sample < samples.size() && samples[next_sample] <= 0.0) {
      record();
      ++next_sample;
    }
  take_snapshots();

  while (sim.time() < config.t_final) {
    double limit = config.t_final;
    if (next_snap < snaps.size()) limit = std::min(limit, snaps[next_snap]);
    if (next_sample < samples.size()) limit = std::min(limit, samples[next_sample]);
    sim.step(limit);
    if (samples.empty()) {
      if (sim.steps_taken() % config.rms_every == 0 || sim.time() >= config.t_final) record();
    } else {
      while (next_sample < samples.size() && samples[next_sample] <= sim.time()) {
        record();
        ++next_sample;
      }
    }
    take_snapshots();
  }
  r.steps = sim.steps_taken();
  r.final_filtered = sim.filtered();
  r.final_physical = sim.physical();
  if (keep_snapshots && (out.snapshots.empty() || out.snapshots.back().time < sim.time()))
    out.snapshots.push_back({sim.time(), r.final_filtered, r.final_physical});
  return out;
}

std::string snapshot_name(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshot_%.6f.csv", t);
  return buf;
}

std::string snapshot_csv(const Snapshot& s) {
  const PhaseGrid& grid = s.filtered.grid();
  std::string out = "xi1,xi2,f_tilde,r,v,f_rv\n";
  out.reserve(grid.plane_size() * 96);
  for (int i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.size(); ++j) {
      const std::string x = fmt(grid.node(i)), y = fmt(grid.node(j));
      out += x + ',' + y + ',' + fmt(s.filtered(i, j)) + ',' + x + ',' + y + ',' + fmt(s.physical(i, j)) + '\n';
    }
  return out;
}

}  // namespace

RunResult simulate(const RunConfig& config, const std::vector<double>& rms_times) {
  return simulate_impl(config, rms_times, false).result;
}

RunResult run(const RunConfig& config) {
  config.validate();
  const fs::path dir(config.output_dir);
  ensure_dir(dir);
  const long warnings_before = warning_count();
  SimulationOutput out = simulate_impl(config, {}, true);
  const RunResult& r = out.result;

  std::string series = "time,rms,mass,boundary_mass_fraction,negative_mass\n";
  for (const auto& d : r.series)
    series += fmt(d.time) + ',' + fmt(d.rms) + ',' + fmt(d.mass) + ',' + fmt(d.boundary_mass_fraction) + ',' +
              fmt(d.negative_mass) + '\n';
  write_atomic(dir / "rms.csv", series);
  for (const auto& s : out.snapshots) write_atomic(dir / snapshot_name(s.time), snapshot_csv(s));

  std::ostringstream meta;
  meta << format_config(config) << "# resolved\n"
       << "delta_t_used = " << fmt(r.delta_t) << '\n'
       << "steps = " << r.steps << '\n'
       << "lambda = " << fmt(r.delta_t / (2.0 * config.epsilon)) << '\n'
       << "max_negative_mass = " << fmt(r.max_negative_mass) << '\n'
       << "max_boundary_mass_fraction = " << fmt(r.max_boundary_fraction) << '\n'
       << "reference_n_points = " << config.n_points * config.ref_n_factor << '\n'
       << "reference_delta_t = " << fmt(config.ref_dt_factor * config.epsilon) << '\n'
       << "warnings = " << (warning_count() - warnings_before) << '\n';
  write_atomic(dir / "meta.txt", meta.str());
  return out.result;
}

// ---------------------------------------------------------------------------

namespace {

std::string reference_key_text(const RunConfig& c, const std::vector<double>& times) {
  std::ostringstream o;
  o << "mode=" << to_string(c.mode) << ";tension=" << to_string(c.tension) << ";eps=" << fmt(c.epsilon)
    << ";n=" << c.n_points << ";xi_max=" << fmt(c.xi_max) << ";ref_n=" << c.ref_n_factor
    << ";ref_dt=" << fmt(c.ref_dt_factor) << ";order=" << c.split_order << ";alpha=" << fmt(c.alpha)
    << ";center=" << fmt(c.step_center) << ";width=" << fmt(c.step_width) << ";times=";
  for (double t : times) o << fmt(t) << ',';
  return o.str();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr char kCacheMagic[8] = {'V', 'A', 'P', 'R', 'E', 'F', '1', '\n'};

template <class T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
bool get(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

std::optional<ReferenceSolution> load_cached(const fs::path& path, const std::string& key, const PhaseGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kCacheMagic)) return std::nullopt;
  std::uint64_t key_len = 0;
  if (!get(in, key_len) || key_len != key.size()) return std::nullopt;
  std::string stored(key_len, '\0');
  if (!in.read(stored.data(), static_cast<std::streamsize>(key_len)) || stored != key) return std::nullopt;
  ReferenceSolution ref;
  std::uint64_t count = 0;
  if (!get(in, count) || !get(in, ref.delta_t) || !get(in, ref.n_points)) return std::nullopt;
  ref.times.resize(count);
  ref.rms.resize(count);
  for (auto& t : ref.times)
    if (!get(in, t)) return std::nullopt;
  for (auto& x : ref.rms)
    if (!get(in, x)) return std::nullopt;
  for (std::uint64_t k = 0; k < count; ++k) {
    PlaneField f(grid);
    auto v = f.values();
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double))))
      return std::nullopt;
    ref.filtered.push_back(std::move(f));
  }
  return ref;
}

void store_cached(const fs::path& path, const std::string& key, const ReferenceSolution& ref) {
  std::string buf(kCacheMagic, 8);
  put(buf, static_cast<std::uint64_t>(key.size()));
  buf += key;
  put(buf, static_cast<std::uint64_t>(ref.times.size()));
  put(buf, ref.delta_t);
  put(buf, ref.n_points);
  for (double t : ref.times) put(buf, t);
  for (double x : ref.rms) put(buf, x);
  for (const auto& f : ref.filtered)
    buf.append(reinterpret_cast<const char*>(f.values().data()), f.values().size() * sizeof(double));
  write_atomic(path, buf);
}

}  // namespace

std::string reference_key(const RunConfig& config, const std::vector<double>& times) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(reference_key_text(config, times))));
  return buf;
}

ReferenceSolution splitting_reference(const RunConfig& config, const std::vector<double>& times,
                                      const std::string& cache_dir) {
  config.validate();
  for (std::size_t k = 0; k < times.size(); ++k)
    if (!(times[k] >= 0.0) || (k > 0 && times[k] < times[k - 1]))
      raise(ErrorCode::InvalidArgument, "reference times must be nonnegative and sorted");
  const PhaseGrid grid = config.grid();
  const std::string key = reference_key_text(config, times);
  fs::path cache_file;
  if (!cache_dir.empty()) {
    ensure_dir(cache_dir);
    cache_file = fs::path(cache_dir) / ("ref_" + reference_key(config, times) + ".bin");
    if (auto hit = load_cached(cache_file, key, grid)) return *hit;
  }

  const int factor = config.ref_n_factor;
  const PhaseGrid fine(config.n_points * factor, config.xi_max);
  const SplittingSolver solver(fine, config.tension, config.mode, config.epsilon, config.split_order);
  PlaneField f = sample_profile(config.profile(), fine);
  ReferenceSolution ref;
  ref.delta_t = config.ref_dt_factor * config.epsilon;
  ref.n_points = fine.size();
  double t = 0.0;
  for (double target : times) {
    solver.advance(f, t, target, ref.delta_t);
    t = target;
    const double theta = t / config.epsilon;
    const PlaneField rotated = rotate_to_filtered(f, theta);
    PlaneField coarse(grid);
    for (int i = 0; i < grid.size(); ++i)
      for (int j = 0; j < grid.size(); ++j) coarse(i, j) = rotated(factor * i, factor * j);
    ref.times.push_back(t);
    ref.rms.push_back(rms_rv(f, theta));
    ref.filtered.push_back(std::move(coarse));
  }
  if (!cache_file.empty()) store_cached(cache_file, key, ref);
  return ref;
}

PlaneField designated_reference(const RunConfig& config, std::string* label, const std::string& cache_dir) {
  if (config.mode == FieldMode::Linear && config.tension == Tension::Cos2Squared && config.epsilon <= 0.1) {
    if (label) *label = "second_order";
    return linear_model::sample_second_order(config.grid(), config.t_final, config.epsilon, config.profile());
  }
  if (label) *label = "splitting";
  return splitting_reference(config, {config.t_final}, cache_dir).filtered.front();
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) raise(ErrorCode::InvalidArgument, "fit_slope needs two or more points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) raise(ErrorCode::InvalidArgument, "fit_slope needs positive data");
    mx += std::log(x[k]) / n;
    my += std::log(y[k]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) raise(ErrorCode::InvalidArgument, "fit_slope: all abscissae coincide");
  return sxy / sxx;
}

ConvergenceResult convergence_study(const RunConfig& base, const std::vector<double>& dt_list,
                                    const std::vector<double>& eps_list, const std::vector<int>& n_list,
                                    const std::string& cache_dir, bool write_files) {
  base.validate();
  if (eps_list.empty()) raise(ErrorCode::Config, "convergence study needs at least one epsilon");
  std::vector<RunConfig> cells;
  const std::vector<int> ns = n_list.empty() ? std::vector<int>{base.n_points} : n_list;
  for (double eps : eps_list)
    for (int n : ns) {
      RunConfig c = base;
      c.epsilon = eps;
      c.n_points = n;
      c.snapshot_times.clear();
      if (dt_list.empty()) {
        c.delta_t.reset();
        c.validate();
        cells.push_back(c);
      } else {
        for (double dt : dt_list) {
          c.delta_t = dt;
          c.validate();
          cells.push_back(c);
        }
      }
    }

  // References first, one per distinct key.
  std::map<std::string, std::size_t> ref_index;
  std::vector<RunConfig> ref_cfgs;
  for (const auto& c : cells) {
    RunConfig r = c;
    r.delta_t.reset();
    const std::string key = reference_key_text(r, {r.t_final});
    if (ref_index.emplace(key, ref_cfgs.size()).second) ref_cfgs.push_back(r);
  }
  std::vector<PlaneField> refs(ref_cfgs.size());
  std::vector<std::string> labels(ref_cfgs.size());
  run_pool(ref_cfgs.size(), [&](std::size_t k) { refs[k] = designated_reference(ref_cfgs[k], &labels[k], cache_dir); });

  const fs::path dir(base.output_dir);
  if (write_files) ensure_dir(dir / "cells");
  ConvergenceResult result;
  result.rows.resize(cells.size());
  run_pool(cells.size(), [&](std::size_t k) {
    const RunConfig& c = cells[k];
    RunConfig r = c;
    r.delta_t.reset();
    const std::size_t ri = ref_index.at(reference_key_text(r, {r.t_final}));
    const RunResult run_result = simulate(c);
    ConvergenceRow row{c.epsilon, c.n_points, run_result.delta_t,
                       rel_error(run_result.final_filtered, refs[ri], Norm::L2), labels[ri]};
    if (write_files)
      write_atomic(dir / "cells" / ("cell_" + std::to_string(k) + ".csv"),
                   "epsilon,n_points,delta_t,error,reference\n" + fmt(row.epsilon) + ',' +
                       std::to_string(row.n_points) + ',' + fmt(row.delta_t) + ',' + fmt(row.error) + ',' +
                       row.reference + '\n');
    result.rows[k] = row;
  });

  for (double eps : eps_list) {
    std::vector<double> x, y;
    for (const auto& row : result.rows)
      if (row.epsilon == eps) {
        x.push_back(row.delta_t);
        y.push_back(row.error);
      }
    bool distinct = false;
    for (double v : x) distinct = distinct || v != x.front();
    if (x.size() >= 2 && distinct) result.slopes.emplace_back(eps, fit_slope(x, y));
  }

  if (write_files) {
    std::string csv = "epsilon,n_points,delta_t,error,reference\n";
    for (const auto& row : result.rows)
      csv += fmt(row.epsilon) + ',' + std::to_string(row.n_points) + ',' + fmt(row.delta_t) + ',' + fmt(row.error) +
             ',' + row.reference + '\n';
    write_atomic(dir / "convergence.csv", csv);
    std::string slopes = "epsilon,slope\n";
    for (const auto& [eps, s] : result.slopes) slopes += fmt(eps) + ',' + fmt(s) + '\n';
    write_atomic(dir / "convergence_slopes.csv", slopes);
  }
  return result;
}

std::vector<TableRow> table_study(const RunConfig& base, const std::vector<double>& eps_list_in,
                                  const std::string& cache_dir, bool write_files) {
  base.validate();
  if (base.mode != FieldMode::Linear || base.tension != Tension::Cos2Squared)
    raise(ErrorCode::Config, "the error table is defined for mode = linear, tension = cos2sq");
  const std::vector<double> eps_list =
      eps_list_in.empty() ? std::vector<double>{1.0, 0.5, 0.25, 0.1, 0.01} : eps_list_in;
  const double t_final = base.t_final > 0.0 ? base.t_final : kTwoPi;
  std::vector<TableRow> rows(eps_list.size());
  run_pool(eps_list.size(), [&](std::size_t k) {
    RunConfig c = base;
    c.epsilon = eps_list[k];
    c.t_final = t_final;
    c.scheme = Scheme::Ap;
    c.init = InitKind::Corrected;
    c.snapshot_times.clear();
    c.validate();
    RunConfig rc = c;
    rc.delta_t.reset();
    const PlaneField ref = splitting_reference(rc, {t_final}, cache_dir).filtered.front();
    const PlaneField ap = simulate(c).final_filtered;
    const PlaneField lim = linear_model::sample_limit(c.grid(), t_final, c.profile());
    const PlaneField so = linear_model::sample_second_order(c.grid(), t_final, c.epsilon, c.profile());
    rows[k] = TableRow{c.epsilon,
                       rel_error(ap, ref, Norm::Linf),
                       rel_error(lim, ref, Norm::Linf),
                       rel_error(so, ref, Norm::Linf),
                       rel_error(ap, ref, Norm::L2),
                       rel_error(lim, ref, Norm::L2),
                       rel_error(so, ref, Norm::L2)};
  });
  if (write_files) {
    ensure_dir(base.output_dir);
    std::string csv = "epsilon,ap_linf,limit_linf,second_order_linf,ap_l2,limit_l2,second_order_l2\n";
    for (const auto& r : rows)
      csv += fmt(r.epsilon) + ',' + fmt(r.ap_linf) + ',' + fmt(r.limit_linf) + ',' + fmt(r.second_order_linf) + ',' +
             fmt(r.ap_l2) + ',' + fmt(r.limit_l2) + ',' + fmt(r.second_order_l2) + '\n';
    write_atomic(fs::path(base.output_dir) / "table.csv", csv);
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> band_limited(std::mt19937_64& rng, const TorusGrid& torus, int kmax, bool zero_mean) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(kmax + 1), b(kmax + 1);
  for (int k = 0; k <= kmax; ++k) {
    a[k] = u(rng);
    b[k] = u(rng);
  }
  if (zero_mean) a[0] = 0.0;
  std::vector<double> g(torus.size());
  for (int l = 0; l < torus.size(); ++l) {
    const double tau = torus.node(l);
    for (int k = 0; k <= kmax; ++k) g[l] += a[k] * std::cos(k * tau) + (k ? b[k] * std::sin(k * tau) : 0.0);
  }
  return g;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace

int selftest(const SelftestReporter& report) {
  int failures = 0;
  auto check = [&](const std::string& name, double value, double tol) {
    const bool ok = std::isfinite(value) && value <= tol;
    if (!ok) ++failures;
    char detail[96];
    std::snprintf(detail, sizeof detail, "measured %.3g, tolerance %.3g", value, tol);
    report(name, ok, detail);
  };
  auto guarded = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      ++failures;
      report(name, false, std::string("threw: ") + e.what());
    }
  };
  std::mt19937_64 rng(20240607);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const TorusGrid torus(64);
  const TorusOps ops(torus);

  guarded("rotation round trip", [&] {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double tau = u(rng);
      const Point2 p{u(rng), u(rng)};
      const Point2 q = rotate_to_rv(tau, rotate_to_xi(tau, p));
      worst = std::max({worst, std::abs(q.x - p.x), std::abs(q.y - p.y)});
    }
    check("rotation round trip", worst, 1e-14);
  });

  guarded("torus operator identities", [&] {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto g = band_limited(rng, torus, 20, false);
      const auto fl = ops.fluctuation(g);
      const auto u1 = ops.inv_L(fl);
      worst = std::max(worst, std::abs(ops.project_mean(u1)));
      worst = std::max(worst, max_abs_diff(ops.spectral_derivative(u1), fl));
      const double lambda = 0.37 + trial;
      const auto w = ops.solve_implicit_tau(g, lambda);
      const auto dw = ops.spectral_derivative(w);
      std::vector<double> back(g.size());
      for (std::size_t l = 0; l < g.size(); ++l) back[l] = w[l] + lambda * dw[l];
      worst = std::max(worst, max_abs_diff(back, g));
    }
    check("torus operator identities", worst, 1e-12);
  });

  guarded("averaged applied field", [&] {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const Point2 xi{u(rng), u(rng)};
      const Point2 m = averaged_field(xi, Tension::Cos2Squared, ops);
      worst = std::max({worst, std::abs(m.x + xi.y / 4), std::abs(m.y - xi.x / 4)});
    }
    check("averaged applied field", worst, 1e-13);
  });

  guarded("initial correction matches (D1 + D0) xi", [&] {
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const Point2 xi{u(rng), u(rng)};
      std::vector<double> e1(64), e2(64);
      for (int l = 0; l < 64; ++l) {
        const Point2 e = applied_field(Tension::Cos2Squared, torus.node(l), xi);
        e1[l] = e.x;
        e2[l] = e.y;
      }
      const auto s1 = ops.antiderivative_from_zero(ops.fluctuation(e1));
      const auto s2 = ops.antiderivative_from_zero(ops.fluctuation(e2));
      for (int l = 0; l < 64; ++l) {
        const Point2 s = (linear_model::d1(torus.node(l)) + linear_model::d0())(xi);
        worst = std::max({worst, std::abs(s.x - s1[l]), std::abs(s.y - s2[l])});
      }
    }
    check("initial correction matches (D1 + D0) xi", worst, 1e-12);
  });

  guarded("Hamiltonian and skew diffusion matrix", [&] {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Point2 xi{u(rng), u(rng)};
      const double closed = hamiltonian_d(xi, Tension::Cos2Squared);
      const double exact = 5.0 / 384.0 * (xi.x * xi.x + xi.y * xi.y);
      const Mat2 d = diffusion_matrix(xi, Tension::Cos2Squared, ops);
      worst = std::max({worst, std::abs(closed - exact),
                        std::abs(hamiltonian_d_quadrature(xi, Tension::Cos2Squared, ops) - closed),
                        std::abs(d.a12 + d.a21), std::abs(d.a11), std::abs(d.a22), std::abs(d.a12 - closed)});
    }
    check("Hamiltonian and skew diffusion matrix", worst, 1e-12);
  });

  guarded("AP step conserves mass", [&] {
    const PhaseGrid grid(32, 4.0);
    const TorusGrid small(16);
    const ApStepper stepper(grid, small, Tension::Cos2Squared, FieldMode::Linear);
    StateField f = build_initial_with_correction(Tension::Cos2Squared, FieldMode::Linear, 0.1, grid, small, {});
    const TorusOps sops(small);
    const double m0 = macro_mass(micro_macro_split(f, sops).macro);
    for (int n = 0; n < 5; ++n) f = stepper.advance(f, 0.05 * n, {0.1, 0.05, 1.0});
    const double m1 = macro_mass(micro_macro_split(f, sops).macro);
    check("AP step conserves mass", std::abs(m1 - m0) / std::abs(m0), 1e-10);
  });

  guarded("micro-macro form equals full form", [&] {
    const PhaseGrid grid(16, 4.0);
    const TorusGrid small(16);
    const TorusOps sops(small);
    const ApStepper stepper(grid, small, Tension::Cos2Squared, FieldMode::Linear);
    const StateField f = build_initial_with_correction(Tension::Cos2Squared, FieldMode::Linear, 0.05, grid, small, {});
    const SchemeParams p{0.05, 0.1, 1.0};
    const MicroMacro a = micro_macro_split(stepper.advance(f, 0.0, p), sops);
    const MicroMacro b = stepper.advance_micro_macro(micro_macro_split(f, sops), 0.0, p);
    check("micro-macro form equals full form",
          std::max(max_abs_diff(a.macro.values(), b.macro.values()), max_abs_diff(a.micro.values(), b.micro.values())),
          1e-12);
  });

  guarded("spectral rotation", [&] {
    const PhaseGrid grid(64, 4.0);
    const InitialProfile profile;
    const PlaneField f = sample_profile(profile, grid);
    const double theta = 0.7;
    const PlaneField g = rotate_to_filtered(f, theta);
    double worst = 0.0;
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 64; ++j)
        worst = std::max(worst, std::abs(g(i, j) - profile(rotate_to_rv(theta, {grid.node(i), grid.node(j)}))));
    check("spectral rotation", worst / profile(0.0, 0.0), 1e-6);
  });

  guarded("splitting conserves mass", [&] {
    const PhaseGrid grid(64, 4.0);
    const SplittingSolver solver(grid, Tension::Cos2Squared, FieldMode::Poisson, 0.5, 2);
    PlaneField f = sample_profile({}, grid);
    const double m0 = plane_mass(f);
    solver.advance(f, 0.0, 0.1, 0.025);
    check("splitting conserves mass", std::abs(plane_mass(f) - m0) / m0, 1e-12);
  });

  return failures;
}

}  // namespace vlasov_ap
