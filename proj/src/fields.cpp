#include "vlasov_ap/fields.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "parallel.hpp"
#include "vlasov_ap/error.hpp"

namespace vlasov_ap {

Tension parse_tension(const std::string& name) {
  if (name == "cos2sq") return Tension::Cos2Squared;
  if (name == "cos4") return Tension::Cos4;
  raise(ErrorCode::Config, "unknown tension '" + name + "' (expected cos2sq or cos4)");
}

std::string to_string(Tension tension) { return tension == Tension::Cos2Squared ? "cos2sq" : "cos4"; }

FieldMode parse_field_mode(const std::string& name) {
  if (name == "linear") return FieldMode::Linear;
  if (name == "poisson") return FieldMode::Poisson;
  raise(ErrorCode::Config, "unknown mode '" + name + "' (expected linear or poisson)");
}

std::string to_string(FieldMode mode) { return mode == FieldMode::Linear ? "linear" : "poisson"; }

double tension_value(Tension tension, double tau) noexcept {
  switch (tension) {
    case Tension::Cos2Squared: {
      const double c = std::cos(2.0 * tau);
      return c * c;
    }
    case Tension::Cos4: return std::cos(4.0 * tau);
  }
  return 0.0;
}

double tension_integral(Tension tension, double eps, double t0, double t1) noexcept {
  // sin(4 t1/eps) - sin(4 t0/eps) without cancellation for short intervals.
  const double half_sum = 2.0 * (t1 + t0) / eps;
  const double half_diff = 2.0 * (t1 - t0) / eps;
  const double sin_diff = 2.0 * std::cos(half_sum) * std::sin(half_diff);
  switch (tension) {
    case Tension::Cos2Squared: return 0.5 * (t1 - t0) + eps / 8.0 * sin_diff;
    case Tension::Cos4: return eps / 4.0 * sin_diff;
  }
  return 0.0;
}

std::vector<std::complex<double>> tension_fourier(Tension tension) {
  std::vector<std::complex<double>> c(5, 0.0);
  switch (tension) {
    case Tension::Cos2Squared:
      c[0] = 0.5;
      c[4] = 0.25;
      break;
    case Tension::Cos4: c[4] = 0.5; break;
  }
  return c;
}

Point2 applied_field(Tension tension, double tau, Point2 xi) noexcept {
  const double c = std::cos(tau);
  const double s = std::sin(tau);
  const double amp = tension_value(tension, tau) * (xi.x * c + xi.y * s);
  return {-amp * s, amp * c};
}

VectorFieldSample applied_field_sample(Tension tension, const PhaseGrid& grid, const TorusGrid& torus) {
  VectorFieldSample e{StateField(grid, torus), StateField(grid, torus)};
  const int n = grid.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < torus.size(); ++l) {
        const Point2 v = applied_field(tension, torus.node(l), {grid.node(i), grid.node(j)});
        e.e1.at(l, i, j) = v.x;
        e.e2.at(l, i, j) = v.y;
      }
  return e;
}

RadialProfile density_rv(const PlaneField& f_rv) {
  const PhaseGrid& grid = f_rv.grid();
  RadialProfile rho{grid, std::vector<double>(grid.size(), 0.0), 0.0};
  for (int i = 0; i < grid.size(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < grid.size(); ++j) sum += f_rv(i, j);
    rho.values[i] = grid.delta() * sum;
  }
  // r = +xi_max is the mirror of node 0.
  rho.outer = rho.values[0];
  return rho;
}

namespace {

void check_evenness(const RadialProfile& rho) {
  static std::atomic<bool> reported{false};
  const int n = rho.grid.size();
  const int mid = n / 2;
  double scale = 0.0;
  double worst = 0.0;
  for (double x : rho.values) scale = std::max(scale, std::abs(x));
  for (int k = 1; k < mid; ++k) worst = std::max(worst, std::abs(rho.values[mid + k] - rho.values[mid - k]));
  if (scale > 0.0 && worst > 1e-8 * scale && !reported.exchange(true)) {
    std::ostringstream msg;
    msg << "density is not even in r (max asymmetry " << worst / scale << " relative); reported once";
    warn(msg.str());
  }
}

}  // namespace

RadialProfile radial_field(const RadialProfile& rho) {
  const PhaseGrid& grid = rho.grid;
  const int n = grid.size();
  if (n % 2 != 0) raise(ErrorCode::InvalidArgument, "radial field needs an even number of r nodes");
  check_evenness(rho);
  const int mid = n / 2;
  const double h = grid.delta();
  RadialProfile e{grid, std::vector<double>(n, 0.0), 0.0};

  // Positive half r_k = k h for k = 0..mid, the last one being +xi_max.
  auto rho_pos = [&](int k) { return k < mid ? rho.values[mid + k] : rho.outer; };
  double cumulative = 0.0;
  double prev = 0.0;  // s * rho(s) at the previous node
  for (int k = 1; k <= mid; ++k) {
    const double s = k * h;
    const double cur = s * rho_pos(k);
    cumulative += 0.5 * h * (prev + cur);
    prev = cur;
    const double value = cumulative / s;
    if (k < mid) {
      e.values[mid + k] = value;
      e.values[mid - k] = -value;
    } else {
      e.outer = value;
      e.values[0] = -value;
    }
  }
  e.values[mid] = 0.0;
  return e;
}

double radial_field_at(const RadialProfile& field, double r) noexcept {
  const PhaseGrid& grid = field.grid;
  const int mid = grid.size() / 2;
  const double h = grid.delta();
  const double x = std::abs(r);
  const double sign = r < 0.0 ? -1.0 : 1.0;
  if (x >= grid.xi_max()) return sign * field.outer * grid.xi_max() / x;
  const double pos = x / h;
  const int k = std::min(static_cast<int>(pos), mid - 1);
  const double w = pos - k;
  const double lo = field.values[mid + k];
  const double hi = (k + 1 < mid) ? field.values[mid + k + 1] : field.outer;
  return sign * ((1.0 - w) * lo + w * hi);
}

double BilinearInterpolator::operator()(Point2 p) const noexcept {
  const PlaneField& f = *plane_;
  const PhaseGrid& grid = f.grid();
  const int n = grid.size();
  const double fx = (p.x + grid.xi_max()) / grid.delta();
  const double fy = (p.y + grid.xi_max()) / grid.delta();
  if (!(fx > -1.0 && fx < n && fy > -1.0 && fy < n)) return 0.0;
  const int i0 = static_cast<int>(std::floor(fx));
  const int j0 = static_cast<int>(std::floor(fy));
  const double wx = fx - i0;
  const double wy = fy - j0;
  auto value = [&](int i, int j) { return (i < 0 || i >= n || j < 0 || j >= n) ? 0.0 : f(i, j); };
  return (1.0 - wx) * ((1.0 - wy) * value(i0, j0) + wy * value(i0, j0 + 1)) +
         wx * ((1.0 - wy) * value(i0 + 1, j0) + wy * value(i0 + 1, j0 + 1));
}

VectorFieldSample self_field_xi(const StateField& f) {
  const PhaseGrid& grid = f.grid();
  const TorusGrid& torus = f.torus();
  const int n = grid.size();
  VectorFieldSample out{StateField(grid, torus), StateField(grid, torus)};

  VLASOV_AP_PARALLEL_FOR
  for (int l = 0; l < torus.size(); ++l) {
    const double tau = torus.node(l);
    const double c = std::cos(tau);
    const double s = std::sin(tau);
    const PlaneField plane = f.slice(l);
    const BilinearInterpolator interp(plane);
    PlaneField f_rv(grid);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f_rv(i, j) = interp(rotate_to_xi(tau, {grid.node(i), grid.node(j)}));
    const RadialProfile e_r = radial_field(density_rv(f_rv));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double r = grid.node(i) * c + grid.node(j) * s;
        const double e = radial_field_at(e_r, r);
        out.e1.at(l, i, j) = -s * e;
        out.e2.at(l, i, j) = c * e;
      }
  }
  return out;
}

VectorFieldSample total_field(double /*t*/, const StateField& f, Tension tension, FieldMode mode) {
  VectorFieldSample e = applied_field_sample(tension, f.grid(), f.torus());
  if (mode == FieldMode::Poisson) {
    const VectorFieldSample self = self_field_xi(f);
    auto a1 = e.e1.values();
    auto a2 = e.e2.values();
    auto b1 = self.e1.values();
    auto b2 = self.e2.values();
    for (std::size_t k = 0; k < a1.size(); ++k) {
      a1[k] += b1[k];
      a2[k] += b2[k];
    }
  }
  return e;
}

}  // namespace vlasov_ap
