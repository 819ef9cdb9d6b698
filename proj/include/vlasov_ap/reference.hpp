#pragma once

#include <vector>

#include "vlasov_ap/averaging.hpp"
#include "vlasov_ap/domain.hpp"
#include "vlasov_ap/fields.hpp"

namespace vlasov_ap {

struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }
  Point2 operator()(Point2 p) const noexcept { return {a11 * p.x + a12 * p.y, a21 * p.x + a22 * p.y}; }
  Mat2 operator*(const Mat2& b) const noexcept {
    return {a11 * b.a11 + a12 * b.a21, a11 * b.a12 + a12 * b.a22, a21 * b.a11 + a22 * b.a21,
            a21 * b.a12 + a22 * b.a22};
  }
  Mat2 operator+(const Mat2& b) const noexcept { return {a11 + b.a11, a12 + b.a12, a21 + b.a21, a22 + b.a22}; }
  Mat2 operator*(double s) const noexcept { return {s * a11, s * a12, s * a21, s * a22}; }
  Mat2 transpose() const noexcept { return {a11, a21, a12, a22}; }
};

// Closed-form asymptotic models of the linear problem with a = cos^2(2 tau).
namespace linear_model {

inline constexpr double kOmega0 = 0.25;
inline constexpr double kOmega1 = 5.0 / 192.0;

// (1/12) diag(-1, 1).
Mat2 d0() noexcept;
// Zero-mean, D1(0) = -D0, D1(pi/2) = D0.
Mat2 d1(double tau) noexcept;
double omega(double eps) noexcept;
// exp(theta J) as a matrix, exp(theta J) xi = rotate_to_rv(theta, xi).
Mat2 rotation(double theta) noexcept;

// f0(exp(t omega0 J) xi).
double limit_solution(double t, Point2 xi, const InitialProfile& profile = {});
// f0((I - eps D0) exp(t omega J) (I - eps D1(tau)) xi).
double second_order_solution(double t, double tau, Point2 xi, double eps, const InitialProfile& profile = {});

// Samples in the filtered frame at time t; the second-order model is read at tau = t / eps.
PlaneField sample_limit(const PhaseGrid& grid, double t, const InitialProfile& profile = {});
PlaneField sample_second_order(const PhaseGrid& grid, double t, double eps, const InitialProfile& profile = {});

}  // namespace linear_model

// Fourier coefficients A_k, k = 0..K, of both components of the applied field
// at a fixed xi.
struct FieldFourier {
  std::vector<std::complex<double>> e1;
  std::vector<std::complex<double>> e2;
};
FieldFourier applied_field_fourier(Tension tension, Point2 xi);

// Hamiltonian of the first-order correction, 2 Im sum_{k>=1} A_{k,1} conj(A_{k,2}) / k.
double hamiltonian_d(Point2 xi, Tension tension);
// Same quantity by quadrature: Pi((I - Pi) E2 * int_0^tau (I - Pi) E1).
double hamiltonian_d_quadrature(Point2 xi, Tension tension, const TorusOps& ops);
// D_ij = -Pi(E_i L^{-1}(I - Pi) E_j), sampled on the torus of ops.
Mat2 diffusion_matrix(Point2 xi, Tension tension, const TorusOps& ops);
// Pi E(., xi) on the torus of ops.
Point2 averaged_field(Point2 xi, Tension tension, const TorusOps& ops);

// Symmetric compositions of the Strang step. Order 2 is plain Strang; orders 4
// and 6 are triple-jump compositions of the next lower order.
std::vector<double> composition_coefficients(int order);

// Strang-type splitting for the unfiltered problem on the (r, v) mesh, with
// periodic spectral shifts:
//   r-flow  f(r, v) <- f(r - v s / eps, v)
//   v-kick  f(r, v) <- f(r, v - dv(r)),  dv = s (E_f(r) - r/eps) + r int a(u/eps) du
// The self field is frozen during each kick at the state it starts from.
class SplittingSolver {
 public:
  SplittingSolver(const PhaseGrid& grid, Tension tension, FieldMode mode, double epsilon, int order = 2);

  const PhaseGrid& grid() const noexcept { return grid_; }
  double epsilon() const noexcept { return epsilon_; }
  int order() const noexcept { return order_; }

  // One composite step from t to t + dt.
  void step(PlaneField& f, double t, double dt) const;
  // t0 -> t1 in ceil((t1 - t0) / dt_max) equal steps; consecutive r-flows are merged.
  // Returns the number of steps taken.
  long advance(PlaneField& f, double t0, double t1, double dt_max) const;

  // f(r, v) <- f(r - v s / eps, v).
  void flow_r(PlaneField& f, double s) const;
  // Kick over [t, t + s].
  void kick_v(PlaneField& f, double t, double s) const;

 private:
  PhaseGrid grid_;
  Tension tension_;
  FieldMode mode_;
  double epsilon_;
  int order_;
  std::vector<double> gammas_;
  TorusOps line_ops_;
};

// Periodic spectral shift of a uniformly sampled line of length `period`:
// u(x) <- u(x - d). The Nyquist mode is kept real.
void spectral_shift(std::span<double> line, double d, double period, const TorusOps& ops);

// g(xi) = f(rotate_to_rv(theta, xi)) on the same mesh: exact quarter turns
// followed by three spectral shears.
PlaneField rotate_to_filtered(const PlaneField& f_rv, double theta);

// sqrt(sum (r cos theta - v sin theta)^2 max(f, 0) delta^2): the filtered-frame
// RMS evaluated on the (r, v) mesh.
double rms_rv(const PlaneField& f_rv, double theta);

}  // namespace vlasov_ap
