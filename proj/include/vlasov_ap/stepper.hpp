#pragma once

#include "vlasov_ap/averaging.hpp"
#include "vlasov_ap/domain.hpp"
#include "vlasov_ap/fields.hpp"

namespace vlasov_ap {

struct SchemeParams {
  double epsilon = 1.0;
  double delta_t = 0.01;
  double cfl_safety = 1.0;

  // Stiffness ratio of the implicit tau solves, dt / (2 eps).
  double lambda() const noexcept { return delta_t / (2.0 * epsilon); }
  void validate() const;
};

// Centered-difference approximation of (E . grad_xi) F with zero ghost values.
StateField flux(const VectorFieldSample& e, const StateField& f);
// Mean of the four nearest neighbours, zero ghost values.
StateField four_point_average(const StateField& f);
PlaneField four_point_average(const PlaneField& f);

// First stage: (I + dt/(2 eps) d_tau) F^{n+1/2} = avg(F^n) - dt/2 Phi^n(F^n).
StateField step_half(const StateField& f_n, const VectorFieldSample& e_n, const SchemeParams& p,
                     const TorusOps& ops);
// Second stage: F^{n+1} = F^n - dt Phi^{n+1/2}(F^{n+1/2}) - dt/(2 eps) d_tau (F^n + F^{n+1}).
StateField step_full(const StateField& f_n, const StateField& f_half, const VectorFieldSample& e_half,
                     const SchemeParams& p, const TorusOps& ops);

// Owns the pieces that stay fixed during a run: the tau operators and the
// applied field sampled on the mesh.
class ApStepper {
 public:
  ApStepper(const PhaseGrid& grid, const TorusGrid& torus, Tension tension, FieldMode mode);

  const PhaseGrid& grid() const noexcept { return grid_; }
  const TorusGrid& torus() const noexcept { return torus_; }
  const TorusOps& ops() const noexcept { return ops_; }
  Tension tension() const noexcept { return tension_; }
  FieldMode mode() const noexcept { return mode_; }
  const VectorFieldSample& applied() const noexcept { return applied_; }

  // Total advection field for the state f at time t.
  VectorFieldSample field(double t, const StateField& f) const;
  // One full step t_n -> t_n + dt. Throws StabilityFailure on non-finite output.
  StateField advance(const StateField& f_n, double t_n, const SchemeParams& p) const;
  // The same step written on (Pi F, (I - Pi) F).
  MicroMacro advance_micro_macro(const MicroMacro& state, double t_n, const SchemeParams& p) const;

 private:
  PhaseGrid grid_;
  TorusGrid torus_;
  Tension tension_;
  FieldMode mode_;
  TorusOps ops_;
  VectorFieldSample applied_;
};

StateField advance(const StateField& f_n, double t_n, const SchemeParams& p, FieldMode mode, Tension tension);

// dt = safety * delta / max over the mesh of max(|E1|, |E2|).
double cfl_dt(const PhaseGrid& grid, const VectorFieldSample& e0, double safety);

// F0(tau, xi) = f0(xi - eps int_0^tau (I - Pi) E(0, s, xi) ds). In Poisson mode
// the self field is taken from the uncorrected data f0.
StateField build_initial_with_correction(Tension tension, FieldMode mode, double eps, const PhaseGrid& grid,
                                         const TorusGrid& torus, const InitialProfile& profile = {});
// F0(tau, xi) = f0(xi).
StateField build_initial_plain(const PhaseGrid& grid, const TorusGrid& torus, const InitialProfile& profile = {});

// Throws NonMeanFreeTension when Pi E exceeds 1e-10 anywhere on the mesh.
void require_mean_free_field(const VectorFieldSample& e, const TorusOps& ops);

// Micro-macro stepper for the diffusion scaling
//   d_t F + (1/eps) E . grad F = -(1/eps^2) d_tau F,  Pi E = 0.
MicroMacro step_diffusion(const PlaneField& g_n, const StateField& h_n, const VectorFieldSample& e,
                          const SchemeParams& p, const TorusOps& ops);

struct Readout {
  PlaneField f_tilde;  // on the xi mesh
  PlaneField f_rv;     // on the (r, v) mesh
};

// Reads F at the fast angle t/eps (mod 2pi) and rotates back to (r, v).
Readout readout(const StateField& f, double t, double eps, const TorusOps& ops);
Readout readout_at_angle(const StateField& f, double angle, const TorusOps& ops);

// Sum over the plane of Pi F times delta^2.
double macro_mass(const PlaneField& macro);
// Share of |mass| lying within `cells` cells of the mesh boundary.
double boundary_mass_fraction(const PlaneField& plane, int cells = 2);

}  // namespace vlasov_ap
