#include "vlasov_ap/domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vlasov_ap/error.hpp"

namespace vlasov_ap {

PhaseGrid::PhaseGrid(int n_points, double xi_max)
    : n_(n_points), xi_max_(xi_max), delta_(2.0 * xi_max / n_points) {
  if (n_points < 2) raise(ErrorCode::InvalidArgument, "phase grid needs at least 2 points per direction");
  if (!(xi_max > 0.0) || !std::isfinite(xi_max)) raise(ErrorCode::InvalidArgument, "xi_max must be positive");
}

TorusGrid::TorusGrid(int n_tau) : n_(n_tau), delta_(kTwoPi / n_tau) {
  if (n_tau < 2 || n_tau % 2 != 0)
    raise(ErrorCode::InvalidArgument, "n_tau must be a positive even integer, got " + std::to_string(n_tau));
}

PlaneField::PlaneField(const PhaseGrid& grid, double fill) : grid_(grid), data_(grid.plane_size(), fill) {}

StateField::StateField(const PhaseGrid& grid, const TorusGrid& torus, double fill)
    : grid_(grid), torus_(torus), data_(grid.plane_size() * torus.size(), fill) {}

PlaneField StateField::slice(int l) const {
  PlaneField plane(grid_);
  const int n = grid_.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) plane(i, j) = at(l, i, j);
  return plane;
}

void StateField::set_slice(int l, const PlaneField& plane) {
  const int n = grid_.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) at(l, i, j) = plane(i, j);
}

StateField StateField::broadcast(const PlaneField& plane, const TorusGrid& torus) {
  StateField out(plane.grid(), torus);
  const int n = plane.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto p = out.pencil(i, j);
      std::fill(p.begin(), p.end(), plane(i, j));
    }
  return out;
}

bool StateField::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Point2 rotate_to_xi(double tau, Point2 rv) noexcept {
  const double c = std::cos(tau);
  const double s = std::sin(tau);
  return {rv.x * c - rv.y * s, rv.x * s + rv.y * c};
}

Point2 rotate_to_rv(double tau, Point2 xi) noexcept {
  const double c = std::cos(tau);
  const double s = std::sin(tau);
  return {xi.x * c + xi.y * s, -xi.x * s + xi.y * c};
}

double InitialProfile::chi(double r) const noexcept {
  // erfc form keeps relative accuracy in the tail; |r| makes evenness exact.
  const double x = std::abs(r);
  return 0.5 * (std::erfc((x - step_center) / step_width) - std::erfc((x + step_center) / step_width));
}

double InitialProfile::operator()(double r, double v) const noexcept {
  const double norm = 4.0 / std::sqrt(kTwoPi * alpha);
  return norm * chi(r) * std::exp(-v * v / (2.0 * alpha));
}

double eval_f0(double r, double v, double alpha) noexcept { return InitialProfile{alpha}(r, v); }

PlaneField sample_profile(const InitialProfile& profile, const PhaseGrid& grid) {
  PlaneField out(grid);
  for (int i = 0; i < grid.size(); ++i)
    for (int j = 0; j < grid.size(); ++j) out(i, j) = profile(grid.node(i), grid.node(j));
  return out;
}

}  // namespace vlasov_ap
