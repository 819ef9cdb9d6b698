#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "vlasov_ap/domain.hpp"

namespace vlasov_ap {

// Spectral operators on 2pi-periodic samples at the TorusGrid nodes.
//
// All operators act on one pencil (a length n_tau sample). The Nyquist mode
// k = n_tau/2 is treated as the real cosine cos(n_tau*tau/2): after applying a
// complex symbol its coefficient is projected back onto the real axis.
//
// Instances are cheap to copy and safe to share between threads; scratch
// buffers are thread local.
class TorusOps {
 public:
  explicit TorusOps(const TorusGrid& torus);

  const TorusGrid& torus() const noexcept { return torus_; }
  int size() const noexcept { return torus_.size(); }

  // Pi g: the average over the torus.
  double project_mean(std::span<const double> g) const;
  // (I - Pi) g.
  void fluctuation(std::span<const double> g, std::span<double> out) const;
  // Zero-mean u with du/dtau = g. Throws NonZeroMeanInput if Pi g != 0.
  void inv_L(std::span<const double> g, std::span<double> out) const;
  // tau -> int_0^tau g(s) ds, exactly zero at tau_0. Throws NonZeroMeanInput.
  void antiderivative_from_zero(std::span<const double> g, std::span<double> out) const;
  // u with (I + lambda d/dtau) u = rhs; lambda >= 0.
  void solve_implicit_tau(std::span<const double> rhs, double lambda, std::span<double> out) const;
  void spectral_derivative(std::span<const double> g, std::span<double> out) const;
  // Trigonometric interpolant of g evaluated at an arbitrary angle.
  double eval_at_tau(std::span<const double> g, double tau) const;

  // out = (I + lambda D)^{-1} [ (I - lambda D) base - forcing ], the symmetric
  // treatment of the stiff term in the second stage of the stepper.
  void solve_symmetric(std::span<const double> base, std::span<const double> forcing, double lambda,
                       std::span<double> out) const;

  // Vector-returning conveniences.
  std::vector<double> fluctuation(std::span<const double> g) const;
  std::vector<double> inv_L(std::span<const double> g) const;
  std::vector<double> antiderivative_from_zero(std::span<const double> g) const;
  std::vector<double> solve_implicit_tau(std::span<const double> rhs, double lambda) const;
  std::vector<double> spectral_derivative(std::span<const double> g) const;

  // Unnormalized real-to-complex transform (n/2 + 1 coefficients) and its
  // normalized inverse.
  void forward(std::span<const double> g, std::span<std::complex<double>> coeffs) const;
  void inverse(std::span<const std::complex<double>> coeffs, std::span<double> out) const;

 private:
  struct Plans;

  void require_mean_free(std::span<const double> g) const;

  TorusGrid torus_;
  std::shared_ptr<const Plans> plans_;
};

// Macro/micro decomposition G = Pi F, h = (I - Pi) F.
struct MicroMacro {
  PlaneField macro;
  StateField micro;
};

MicroMacro micro_macro_split(const StateField& f, const TorusOps& ops);
StateField micro_macro_join(const PlaneField& macro, const StateField& micro);

}  // namespace vlasov_ap
