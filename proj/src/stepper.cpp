#include "vlasov_ap/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parallel.hpp"
#include "vlasov_ap/error.hpp"

namespace vlasov_ap {

void SchemeParams::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) raise(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (!(delta_t > 0.0) || !std::isfinite(delta_t)) raise(ErrorCode::InvalidArgument, "delta_t must be positive");
  if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) raise(ErrorCode::InvalidArgument, "cfl_safety must lie in (0, 1]");
}

namespace {

void require_finite(const StateField& f, const char* stage) {
  if (!f.all_finite()) raise(ErrorCode::StabilityFailure, std::string("non-finite values after ") + stage);
}

}  // namespace

StateField flux(const VectorFieldSample& e, const StateField& f) {
  if (!f.same_shape(e.e1) || !f.same_shape(e.e2)) raise(ErrorCode::InvalidArgument, "flux: shape mismatch");
  const int n = f.n();
  const int nt = f.n_tau();
  const double inv = 1.0 / (2.0 * f.grid().delta());
  StateField out(f.grid(), f.torus());
  const double* fv = f.values().data();
  const double* e1 = e.e1.values().data();
  const double* e2 = e.e2.values().data();
  double* ov = out.values().data();
  const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(n) * nt;
  const std::ptrdiff_t dj = nt;

  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::ptrdiff_t o = i * di + j * dj;
      double* dst = ov + o;
      std::fill(dst, dst + nt, 0.0);
      if (i + 1 < n)
        for (int l = 0; l < nt; ++l) dst[l] += e1[o + di + l] * fv[o + di + l];
      if (i > 0)
        for (int l = 0; l < nt; ++l) dst[l] -= e1[o - di + l] * fv[o - di + l];
      if (j + 1 < n)
        for (int l = 0; l < nt; ++l) dst[l] += e2[o + dj + l] * fv[o + dj + l];
      if (j > 0)
        for (int l = 0; l < nt; ++l) dst[l] -= e2[o - dj + l] * fv[o - dj + l];
      for (int l = 0; l < nt; ++l) dst[l] *= inv;
    }
  return out;
}

StateField four_point_average(const StateField& f) {
  const int n = f.n();
  const int nt = f.n_tau();
  StateField out(f.grid(), f.torus());
  const double* fv = f.values().data();
  double* ov = out.values().data();
  const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(n) * nt;
  const std::ptrdiff_t dj = nt;

  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::ptrdiff_t o = i * di + j * dj;
      double* dst = ov + o;
      std::fill(dst, dst + nt, 0.0);
      if (i + 1 < n)
        for (int l = 0; l < nt; ++l) dst[l] += fv[o + di + l];
      if (i > 0)
        for (int l = 0; l < nt; ++l) dst[l] += fv[o - di + l];
      if (j + 1 < n)
        for (int l = 0; l < nt; ++l) dst[l] += fv[o + dj + l];
      if (j > 0)
        for (int l = 0; l < nt; ++l) dst[l] += fv[o - dj + l];
      for (int l = 0; l < nt; ++l) dst[l] *= 0.25;
    }
  return out;
}

PlaneField four_point_average(const PlaneField& f) {
  const int n = f.n();
  PlaneField out(f.grid());
  auto value = [&](int i, int j) { return (i < 0 || i >= n || j < 0 || j >= n) ? 0.0 : f(i, j); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = 0.25 * (value(i + 1, j) + value(i - 1, j) + value(i, j + 1) + value(i, j - 1));
  return out;
}

StateField step_half(const StateField& f_n, const VectorFieldSample& e_n, const SchemeParams& p,
                     const TorusOps& ops) {
  p.validate();
  StateField rhs = four_point_average(f_n);
  const StateField phi = flux(e_n, f_n);
  {
    auto r = rhs.values();
    auto q = phi.values();
    const double c = 0.5 * p.delta_t;
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= c * q[k];
  }
  StateField out(f_n.grid(), f_n.torus());
  const int n = f_n.n();
  const double lambda = p.lambda();
  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ops.solve_implicit_tau(rhs.pencil(i, j), lambda, out.pencil(i, j));
  require_finite(out, "the half step");
  return out;
}

StateField step_full(const StateField& f_n, const StateField& f_half, const VectorFieldSample& e_half,
                     const SchemeParams& p, const TorusOps& ops) {
  p.validate();
  StateField forcing = flux(e_half, f_half);
  for (double& x : forcing.values()) x *= p.delta_t;
  StateField out(f_n.grid(), f_n.torus());
  const int n = f_n.n();
  const double lambda = p.lambda();
  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ops.solve_symmetric(f_n.pencil(i, j), forcing.pencil(i, j), lambda, out.pencil(i, j));
  require_finite(out, "the full step");
  return out;
}

ApStepper::ApStepper(const PhaseGrid& grid, const TorusGrid& torus, Tension tension, FieldMode mode)
    : grid_(grid),
      torus_(torus),
      tension_(tension),
      mode_(mode),
      ops_(torus),
      applied_(applied_field_sample(tension, grid, torus)) {}

VectorFieldSample ApStepper::field(double /*t*/, const StateField& f) const {
  if (mode_ == FieldMode::Linear) return applied_;
  VectorFieldSample e = self_field_xi(f);
  auto a1 = e.e1.values();
  auto a2 = e.e2.values();
  auto b1 = applied_.e1.values();
  auto b2 = applied_.e2.values();
  for (std::size_t k = 0; k < a1.size(); ++k) {
    a1[k] += b1[k];
    a2[k] += b2[k];
  }
  return e;
}

StateField ApStepper::advance(const StateField& f_n, double t_n, const SchemeParams& p) const {
  const VectorFieldSample e_n = field(t_n, f_n);
  const StateField f_half = step_half(f_n, e_n, p, ops_);
  const VectorFieldSample e_half = field(t_n + 0.5 * p.delta_t, f_half);
  return step_full(f_n, f_half, e_half, p, ops_);
}

MicroMacro ApStepper::advance_micro_macro(const MicroMacro& state, double t_n, const SchemeParams& p) const {
  p.validate();
  const int n = grid_.size();
  const double lambda = p.lambda();
  const double dt = p.delta_t;

  const StateField f_n = micro_macro_join(state.macro, state.micro);
  const MicroMacro phi_n = micro_macro_split(flux(field(t_n, f_n), f_n), ops_);

  MicroMacro half{four_point_average(state.macro), StateField(grid_, torus_)};
  {
    StateField rhs = four_point_average(state.micro);
    auto r = rhs.values();
    auto q = phi_n.micro.values();
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= 0.5 * dt * q[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        half.macro(i, j) -= 0.5 * dt * phi_n.macro(i, j);
        ops_.solve_implicit_tau(rhs.pencil(i, j), lambda, half.micro.pencil(i, j));
      }
  }

  const StateField f_half = micro_macro_join(half.macro, half.micro);
  const MicroMacro phi_half = micro_macro_split(flux(field(t_n + 0.5 * dt, f_half), f_half), ops_);

  MicroMacro next{PlaneField(grid_), StateField(grid_, torus_)};
  StateField forcing = phi_half.micro;
  for (double& x : forcing.values()) x *= dt;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      next.macro(i, j) = state.macro(i, j) - dt * phi_half.macro(i, j);
      ops_.solve_symmetric(state.micro.pencil(i, j), forcing.pencil(i, j), lambda, next.micro.pencil(i, j));
    }
  require_finite(next.micro, "the micro-macro step");
  return next;
}

StateField advance(const StateField& f_n, double t_n, const SchemeParams& p, FieldMode mode, Tension tension) {
  const ApStepper stepper(f_n.grid(), f_n.torus(), tension, mode);
  return stepper.advance(f_n, t_n, p);
}

double cfl_dt(const PhaseGrid& grid, const VectorFieldSample& e0, double safety) {
  if (!(safety > 0.0 && safety <= 1.0)) raise(ErrorCode::InvalidArgument, "cfl safety must lie in (0, 1]");
  double emax = 0.0;
  for (double x : e0.e1.values()) emax = std::max(emax, std::abs(x));
  for (double x : e0.e2.values()) emax = std::max(emax, std::abs(x));
  if (!std::isfinite(emax)) raise(ErrorCode::InvalidArgument, "cfl: non-finite field");
  if (emax == 0.0) raise(ErrorCode::ZeroField, "cfl: the advection field vanishes; give delta_t explicitly");
  return safety * grid.delta() / emax;
}

StateField build_initial_plain(const PhaseGrid& grid, const TorusGrid& torus, const InitialProfile& profile) {
  return StateField::broadcast(sample_profile(profile, grid), torus);
}

StateField build_initial_with_correction(Tension tension, FieldMode mode, double eps, const PhaseGrid& grid,
                                         const TorusGrid& torus, const InitialProfile& profile) {
  if (!(eps >= 0.0)) raise(ErrorCode::InvalidArgument, "epsilon must be nonnegative");
  const StateField plain = build_initial_plain(grid, torus, profile);
  const VectorFieldSample e0 = total_field(0.0, plain, tension, mode);
  const TorusOps ops(torus);
  StateField out(grid, torus);
  const int n = grid.size();
  const int nt = torus.size();

  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i) {
    std::vector<double> fluct(nt), s1(nt), s2(nt);
    for (int j = 0; j < n; ++j) {
      ops.fluctuation(e0.e1.pencil(i, j), fluct);
      ops.antiderivative_from_zero(fluct, s1);
      ops.fluctuation(e0.e2.pencil(i, j), fluct);
      ops.antiderivative_from_zero(fluct, s2);
      auto dst = out.pencil(i, j);
      for (int l = 0; l < nt; ++l) dst[l] = profile(grid.node(i) - eps * s1[l], grid.node(j) - eps * s2[l]);
    }
  }
  return out;
}

void require_mean_free_field(const VectorFieldSample& e, const TorusOps& ops) {
  const int n = e.e1.n();
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      worst = std::max({worst, std::abs(ops.project_mean(e.e1.pencil(i, j))),
                        std::abs(ops.project_mean(e.e2.pencil(i, j)))});
  if (worst > 1e-10) {
    std::ostringstream msg;
    msg << "diffusion scaling needs a mean-free field; max |Pi E| = " << worst;
    raise(ErrorCode::NonMeanFreeTension, msg.str());
  }
}

MicroMacro step_diffusion(const PlaneField& g_n, const StateField& h_n, const VectorFieldSample& e,
                          const SchemeParams& p, const TorusOps& ops) {
  p.validate();
  const int n = g_n.n();
  const double eps = p.epsilon;
  const double dt = p.delta_t;
  const double lambda = dt / (2.0 * eps * eps);
  const PhaseGrid& grid = g_n.grid();
  const TorusGrid& torus = h_n.torus();

  // G^{n+1/2} = avg(G^n) - dt/(2 eps) Pi Phi(h^n)
  const MicroMacro phi_h = micro_macro_split(flux(e, h_n), ops);
  PlaneField g_half = four_point_average(g_n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g_half(i, j) -= dt / (2.0 * eps) * phi_h.macro(i, j);

  // h^{n+1/2} = (I + lambda d_tau)^{-1} [avg(h^n) - dt/(2 eps) (I - Pi) Phi(G^{n+1/2} + h^n)]
  StateField h_half(grid, torus);
  {
    const MicroMacro phi = micro_macro_split(flux(e, micro_macro_join(g_half, h_n)), ops);
    StateField rhs = four_point_average(h_n);
    auto r = rhs.values();
    auto q = phi.micro.values();
    for (std::size_t k = 0; k < r.size(); ++k) r[k] -= dt / (2.0 * eps) * q[k];
    VLASOV_AP_PARALLEL_FOR
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) ops.solve_implicit_tau(rhs.pencil(i, j), lambda, h_half.pencil(i, j));
  }

  // G^{n+1} = G^n - dt/eps Pi Phi(h^{n+1/2})
  MicroMacro next{PlaneField(grid), StateField(grid, torus)};
  {
    const MicroMacro phi = micro_macro_split(flux(e, h_half), ops);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) next.macro(i, j) = g_n(i, j) - dt / eps * phi.macro(i, j);
  }

  // h^{n+1}: symmetric stiff term, forcing built from the already known G^{n+1}.
  {
    PlaneField g_mid(grid);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g_mid(i, j) = 0.5 * (next.macro(i, j) + g_n(i, j));
    MicroMacro phi = micro_macro_split(flux(e, micro_macro_join(g_mid, h_half)), ops);
    for (double& x : phi.micro.values()) x *= dt / eps;
    VLASOV_AP_PARALLEL_FOR
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        ops.solve_symmetric(h_n.pencil(i, j), phi.micro.pencil(i, j), lambda, next.micro.pencil(i, j));
  }
  require_finite(next.micro, "the diffusion step");
  return next;
}

Readout readout_at_angle(const StateField& f, double angle, const TorusOps& ops) {
  const PhaseGrid& grid = f.grid();
  const int n = grid.size();
  const int nt = f.n_tau();
  double theta = std::fmod(angle, kTwoPi);
  if (theta < 0.0) theta += kTwoPi;

  Readout out{PlaneField(grid), PlaneField(grid)};
  const double node_pos = theta / f.torus().delta();
  const double nearest = std::round(node_pos);
  if (std::abs(node_pos - nearest) < 1e-12) {
    const int l = static_cast<int>(nearest) % nt;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.f_tilde(i, j) = f.at(l, i, j);
  } else {
    // The trigonometric interpolant is linear in the samples: precompute weights.
    std::vector<double> unit(nt, 0.0), weights(nt);
    for (int l = 0; l < nt; ++l) {
      unit[l] = 1.0;
      weights[l] = ops.eval_at_tau(unit, theta);
      unit[l] = 0.0;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        auto p = f.pencil(i, j);
        double sum = 0.0;
        for (int l = 0; l < nt; ++l) sum += weights[l] * p[l];
        out.f_tilde(i, j) = sum;
      }
  }
  const BilinearInterpolator interp(out.f_tilde);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.f_rv(i, j) = interp(rotate_to_xi(theta, {grid.node(i), grid.node(j)}));
  return out;
}

Readout readout(const StateField& f, double t, double eps, const TorusOps& ops) {
  return readout_at_angle(f, t / eps, ops);
}

double macro_mass(const PlaneField& macro) {
  double sum = 0.0;
  for (double x : macro.values()) sum += x;
  return sum * macro.grid().delta() * macro.grid().delta();
}

double boundary_mass_fraction(const PlaneField& plane, int cells) {
  const int n = plane.n();
  double total = 0.0;
  double edge = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = std::abs(plane(i, j));
      total += a;
      if (i < cells || j < cells || i >= n - cells || j >= n - cells) edge += a;
    }
  return total > 0.0 ? edge / total : 0.0;
}

}  // namespace vlasov_ap
