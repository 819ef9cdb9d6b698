#include "vlasov_ap/reference.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "parallel.hpp"
#include "vlasov_ap/error.hpp"

namespace vlasov_ap {

namespace linear_model {

Mat2 d0() noexcept { return {-1.0 / 12.0, 0.0, 0.0, 1.0 / 12.0}; }

Mat2 d1(double tau) noexcept {
  const double c2 = std::cos(2 * tau), c6 = std::cos(6 * tau);
  const double s2 = std::sin(2 * tau), s4 = std::sin(4 * tau), s6 = std::sin(6 * tau);
  return Mat2{3 * c2 + c6, 9 * s2 - 3 * s4 + s6, 9 * s2 + 3 * s4 + s6, -3 * c2 - c6} * (1.0 / 48.0);
}

double omega(double eps) noexcept { return kOmega0 + eps * kOmega1; }

Mat2 rotation(double theta) noexcept {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c, s, -s, c};
}

double limit_solution(double t, Point2 xi, const InitialProfile& profile) {
  return profile(rotation(t * kOmega0)(xi));
}

double second_order_solution(double t, double tau, Point2 xi, double eps, const InitialProfile& profile) {
  const Mat2 left = Mat2::identity() + d0() * (-eps);
  const Mat2 right = Mat2::identity() + d1(tau) * (-eps);
  return profile((left * rotation(t * omega(eps)) * right)(xi));
}

PlaneField sample_limit(const PhaseGrid& grid, double t, const InitialProfile& profile) {
  PlaneField out(grid);
  for (int i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.size(); ++j) out(i, j) = limit_solution(t, {grid.node(i), grid.node(j)}, profile);
  return out;
}

PlaneField sample_second_order(const PhaseGrid& grid, double t, double eps, const InitialProfile& profile) {
  if (!(eps > 0.0)) return sample_limit(grid, t, profile);
  PlaneField out(grid);
  const double tau = std::fmod(t / eps, kTwoPi);
  for (int i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.size(); ++j)
      out(i, j) = second_order_solution(t, tau, {grid.node(i), grid.node(j)}, eps, profile);
  return out;
}

}  // namespace linear_model

FieldFourier applied_field_fourier(Tension tension, Point2 xi) {
  using C = std::complex<double>;
  const std::vector<C> c = tension_fourier(tension);
  const int ka = static_cast<int>(c.size()) - 1;
  const int kmax = ka + 2;
  // Trigonometric factors of E / a, indexed -2..2:
  //   E1 / a = -(xi1 cos sin + xi2 sin^2),  E2 / a = xi1 cos^2 + xi2 cos sin.
  const C p1[5] = {C(xi.y / 4, -xi.x / 4), 0.0, -xi.y / 2, 0.0, C(xi.y / 4, xi.x / 4)};
  const C p2[5] = {C(xi.x / 4, xi.y / 4), 0.0, xi.x / 2, 0.0, C(xi.x / 4, -xi.y / 4)};
  auto coeff_a = [&](int m) -> C {
    if (std::abs(m) > ka) return 0.0;
    return m >= 0 ? c[m] : std::conj(c[-m]);
  };
  FieldFourier out{std::vector<C>(kmax + 1), std::vector<C>(kmax + 1)};
  for (int k = 0; k <= kmax; ++k)
    for (int q = -2; q <= 2; ++q) {
      out.e1[k] += coeff_a(k - q) * p1[q + 2];
      out.e2[k] += coeff_a(k - q) * p2[q + 2];
    }
  return out;
}

double hamiltonian_d(Point2 xi, Tension tension) {
  const FieldFourier a = applied_field_fourier(tension, xi);
  double sum = 0.0;
  for (std::size_t k = 1; k < a.e1.size(); ++k) sum += (a.e1[k] * std::conj(a.e2[k])).imag() / static_cast<double>(k);
  return 2.0 * sum;
}

namespace {

struct FieldPencils {
  std::vector<double> e1, e2;
};

FieldPencils sample_pencils(Point2 xi, Tension tension, const TorusGrid& torus) {
  FieldPencils p{std::vector<double>(torus.size()), std::vector<double>(torus.size())};
  for (int l = 0; l < torus.size(); ++l) {
    const Point2 e = applied_field(tension, torus.node(l), xi);
    p.e1[l] = e.x;
    p.e2[l] = e.y;
  }
  return p;
}

double mean_of_product(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) s += a[l] * b[l];
  return s / static_cast<double>(a.size());
}

}  // namespace

double hamiltonian_d_quadrature(Point2 xi, Tension tension, const TorusOps& ops) {
  const FieldPencils p = sample_pencils(xi, tension, ops.torus());
  const std::vector<double> s1 = ops.antiderivative_from_zero(ops.fluctuation(p.e1));
  return mean_of_product(ops.fluctuation(p.e2), s1);
}

Mat2 diffusion_matrix(Point2 xi, Tension tension, const TorusOps& ops) {
  const FieldPencils p = sample_pencils(xi, tension, ops.torus());
  const std::vector<double> u1 = ops.inv_L(ops.fluctuation(p.e1));
  const std::vector<double> u2 = ops.inv_L(ops.fluctuation(p.e2));
  return {-mean_of_product(p.e1, u1), -mean_of_product(p.e1, u2), -mean_of_product(p.e2, u1),
          -mean_of_product(p.e2, u2)};
}

Point2 averaged_field(Point2 xi, Tension tension, const TorusOps& ops) {
  const FieldPencils p = sample_pencils(xi, tension, ops.torus());
  return {ops.project_mean(p.e1), ops.project_mean(p.e2)};
}

std::vector<double> composition_coefficients(int order) {
  if (order < 2 || order % 2 != 0 || order > 6)
    raise(ErrorCode::InvalidArgument, "splitting order must be 2, 4 or 6");
  std::vector<double> g{1.0};
  for (int p = 2; p < order; p += 2) {
    const double root = std::pow(2.0, 1.0 / (p + 1));
    const double outer = 1.0 / (2.0 - root);
    const double inner = -root / (2.0 - root);
    std::vector<double> next;
    for (double w : {outer, inner, outer})
      for (double x : g) next.push_back(w * x);
    g = std::move(next);
  }
  return g;
}

void spectral_shift(std::span<double> line, double d, double period, const TorusOps& ops) {
  const int n = ops.size();
  thread_local std::vector<std::complex<double>> coeffs;
  coeffs.resize(n / 2 + 1);
  ops.forward(line, coeffs);
  const double base = kTwoPi / period;
  // Powers of the first-harmonic phase, resynchronized every 16 modes.
  const std::complex<double> step = std::polar(1.0, -base * d);
  std::complex<double> phase = 1.0;
  for (int m = 1; m < n / 2; ++m) {
    phase = (m % 16 == 0) ? std::polar(1.0, -base * m * d) : phase * step;
    coeffs[m] *= phase;
  }
  coeffs[n / 2] *= std::cos(base * (n / 2) * d);
  ops.inverse(coeffs, line);
}

SplittingSolver::SplittingSolver(const PhaseGrid& grid, Tension tension, FieldMode mode, double epsilon, int order)
    : grid_(grid), tension_(tension), mode_(mode), epsilon_(epsilon), order_(order),
      gammas_(composition_coefficients(order)), line_ops_(TorusGrid(grid.size())) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) raise(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (grid.size() % 2 != 0) raise(ErrorCode::InvalidArgument, "splitting needs an even number of points");
}

void SplittingSolver::flow_r(PlaneField& f, double s) const {
  if (s == 0.0) return;
  const int n = grid_.size();
  const double period = 2.0 * grid_.xi_max();
  VLASOV_AP_PARALLEL_FOR
  for (int j = 0; j < n; ++j) {
    thread_local std::vector<double> line;
    line.resize(n);
    for (int i = 0; i < n; ++i) line[i] = f(i, j);
    spectral_shift(line, grid_.node(j) * s / epsilon_, period, line_ops_);
    for (int i = 0; i < n; ++i) f(i, j) = line[i];
  }
}

void SplittingSolver::kick_v(PlaneField& f, double t, double s) const {
  const int n = grid_.size();
  const double period = 2.0 * grid_.xi_max();
  std::vector<double> self(n, 0.0);
  if (mode_ == FieldMode::Poisson) self = radial_field(density_rv(f)).values;
  const double tension_part = tension_integral(tension_, epsilon_, t, t + s);
  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i) {
    const double r = grid_.node(i);
    const double dv = s * (self[i] - r / epsilon_) + r * tension_part;
    auto row = f.values().subspan(static_cast<std::size_t>(i) * n, n);
    spectral_shift(row, dv, period, line_ops_);
  }
}

void SplittingSolver::step(PlaneField& f, double t, double dt) const { advance(f, t, t + dt, dt); }

long SplittingSolver::advance(PlaneField& f, double t0, double t1, double dt_max) const {
  if (!(dt_max > 0.0)) raise(ErrorCode::InvalidArgument, "splitting: dt must be positive");
  if (!(t1 >= t0)) raise(ErrorCode::InvalidArgument, "splitting: t1 < t0");
  if (t1 == t0) return 0;
  const long steps = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / dt_max - 1e-9)));
  const double dt = (t1 - t0) / static_cast<double>(steps);
  double pending = 0.0;
  for (long n = 0; n < steps; ++n) {
    double t = t0 + static_cast<double>(n) * dt;
    for (double g : gammas_) {
      const double h = g * dt;
      pending += 0.5 * h;
      flow_r(f, pending);
      pending = 0.5 * h;
      kick_v(f, t, h);
      t += h;
    }
  }
  flow_r(f, pending);
  for (double x : f.values())
    if (!std::isfinite(x)) raise(ErrorCode::StabilityFailure, "splitting: non-finite values");
  return steps;
}

PlaneField rotate_to_filtered(const PlaneField& f_rv, double theta) {
  const PhaseGrid& grid = f_rv.grid();
  const int n = grid.size();
  if (n % 2 != 0) raise(ErrorCode::InvalidArgument, "rotation needs an even number of points");
  const double quarter = std::numbers::pi / 2;
  const double turns = std::round(theta / quarter);
  const double rest = theta - turns * quarter;
  int q = static_cast<int>(std::fmod(turns, 4.0));
  if (q < 0) q += 4;

  PlaneField g = f_rv;
  for (int k = 0; k < q; ++k) {
    PlaneField next(grid);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) next(i, j) = g(j, (n - i) % n);
    g = std::move(next);
  }
  if (std::abs(rest) < 1e-15) return g;

  const double a = std::tan(rest / 2);
  const double b = -std::sin(rest);
  const double period = 2.0 * grid.xi_max();
  const TorusOps ops{TorusGrid(n)};
  auto shear_x = [&](PlaneField& h) {
    VLASOV_AP_PARALLEL_FOR
    for (int j = 0; j < n; ++j) {
      std::vector<double> line(n);
      for (int i = 0; i < n; ++i) line[i] = h(i, j);
      spectral_shift(line, -a * grid.node(j), period, ops);
      for (int i = 0; i < n; ++i) h(i, j) = line[i];
    }
  };
  shear_x(g);
  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i)
    spectral_shift(g.values().subspan(static_cast<std::size_t>(i) * n, n), -b * grid.node(i), period, ops);
  shear_x(g);
  return g;
}

double rms_rv(const PlaneField& f_rv, double theta) {
  const PhaseGrid& grid = f_rv.grid();
  const double c = std::cos(theta), s = std::sin(theta);
  double sum = 0.0;
  for (int i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.size(); ++j) {
      const double x = grid.node(i) * c - grid.node(j) * s;
      sum += x * x * std::max(f_rv(i, j), 0.0);
    }
  return std::sqrt(sum * grid.delta() * grid.delta());
}

}  // namespace vlasov_ap
