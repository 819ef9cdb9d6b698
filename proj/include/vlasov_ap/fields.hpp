#pragma once

#include <complex>
#include <string>
#include <vector>

#include "vlasov_ap/domain.hpp"

namespace vlasov_ap {

// 2pi-periodic amplitude a(tau) of the focusing field.
enum class Tension {
  Cos2Squared,  // a = cos^2(2 tau)
  Cos4,         // a = cos(4 tau); no Fourier content at 0 or +-2
};

enum class FieldMode { Linear, Poisson };

Tension parse_tension(const std::string& name);
std::string to_string(Tension tension);
FieldMode parse_field_mode(const std::string& name);
std::string to_string(FieldMode mode);

double tension_value(Tension tension, double tau) noexcept;
// int_{t0}^{t1} a(s / eps) ds in closed form.
double tension_integral(Tension tension, double eps, double t0, double t1) noexcept;
// Coefficients c_k, k = 0..K, of a(tau) = sum_k c_k e^{ik tau} (c_{-k} = conj c_k).
std::vector<std::complex<double>> tension_fourier(Tension tension);

// a(tau) (xi1 cos tau + xi2 sin tau) (-sin tau, cos tau).
Point2 applied_field(Tension tension, double tau, Point2 xi) noexcept;

// E(t, tau_l, xi_ij) on the StateField mesh.
struct VectorFieldSample {
  StateField e1;
  StateField e2;
};

VectorFieldSample applied_field_sample(Tension tension, const PhaseGrid& grid, const TorusGrid& torus);

// Radial profile on the r mesh r_i = -xi_max + i*delta (same as PhaseGrid),
// plus the value at r = +xi_max which is not a mesh node.
struct RadialProfile {
  PhaseGrid grid{2, 1.0};
  std::vector<double> values;
  double outer = 0.0;
};

// rho(r_i) = delta * sum_j f(r_i, v_j).
RadialProfile density_rv(const PlaneField& f_rv);
// E(r) = (1/r) int_0^r s rho(s) ds by cumulative trapezoid on r >= 0, odd
// extension to r < 0, E(0) = 0.
RadialProfile radial_field(const RadialProfile& rho);
// Odd piecewise-linear evaluation; beyond xi_max uses the exterior law E ~ 1/r.
double radial_field_at(const RadialProfile& field, double r) noexcept;

// Bilinear interpolation on a PlaneField with zero ghost values outside the
// mesh (index -1 and N read 0).
class BilinearInterpolator {
 public:
  explicit BilinearInterpolator(const PlaneField& plane) : plane_(&plane) {}
  double operator()(Point2 p) const noexcept;

 private:
  const PlaneField* plane_;
};

// Self-consistent field in the xi frame: per tau slice, rotate to (r, v) by
// bilinear interpolation, integrate the radial Poisson equation, and map the
// field back along (-sin tau, cos tau).
VectorFieldSample self_field_xi(const StateField& f);

// Applied field plus, in Poisson mode, the self-consistent field of f. The
// applied field does not depend on t; the argument is kept for the contract.
VectorFieldSample total_field(double t, const StateField& f, Tension tension, FieldMode mode);

}  // namespace vlasov_ap
