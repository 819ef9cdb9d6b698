#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace vlasov_ap {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Uniform N x N mesh of [-xi_max, xi_max)^2. Node i sits at -xi_max + i*delta;
// the right endpoint is not a node. The same mesh is used for (r, v).
class PhaseGrid {
 public:
  PhaseGrid(int n_points, double xi_max);

  int size() const noexcept { return n_; }
  double xi_max() const noexcept { return xi_max_; }
  double delta() const noexcept { return delta_; }
  double node(int i) const noexcept { return -xi_max_ + i * delta_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(n_) * n_; }

  bool operator==(const PhaseGrid&) const = default;

 private:
  int n_;
  double xi_max_;
  double delta_;
};

// Uniform mesh of the fast angle on [0, 2pi).
class TorusGrid {
 public:
  explicit TorusGrid(int n_tau);

  int size() const noexcept { return n_; }
  double delta() const noexcept { return delta_; }
  double node(int l) const noexcept { return l * delta_; }

  bool operator==(const TorusGrid&) const = default;

 private:
  int n_;
  double delta_;
};

// Scalar field on the (xi1, xi2) or (r, v) plane, indexed [i][j] with i along
// the first coordinate.
class PlaneField {
 public:
  PlaneField() = default;
  explicit PlaneField(const PhaseGrid& grid, double fill = 0.0);

  const PhaseGrid& grid() const noexcept { return grid_; }
  int n() const noexcept { return grid_.size(); }

  double& operator()(int i, int j) noexcept { return data_[static_cast<std::size_t>(i) * grid_.size() + j]; }
  double operator()(int i, int j) const noexcept { return data_[static_cast<std::size_t>(i) * grid_.size() + j]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

 private:
  PhaseGrid grid_{2, 1.0};
  std::vector<double> data_;
};

// Sample of a function of (tau, xi1, xi2). Logically indexed [l][i][j]; the
// storage keeps tau innermost so every (i, j) pencil is contiguous.
class StateField {
 public:
  StateField() = default;
  StateField(const PhaseGrid& grid, const TorusGrid& torus, double fill = 0.0);

  const PhaseGrid& grid() const noexcept { return grid_; }
  const TorusGrid& torus() const noexcept { return torus_; }
  int n() const noexcept { return grid_.size(); }
  int n_tau() const noexcept { return torus_.size(); }

  double& at(int l, int i, int j) noexcept { return data_[offset(i, j) + l]; }
  double at(int l, int i, int j) const noexcept { return data_[offset(i, j) + l]; }

  std::span<double> pencil(int i, int j) noexcept {
    return {data_.data() + offset(i, j), static_cast<std::size_t>(torus_.size())};
  }
  std::span<const double> pencil(int i, int j) const noexcept {
    return {data_.data() + offset(i, j), static_cast<std::size_t>(torus_.size())};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  // Copies out / in the slice tau = tau_l.
  PlaneField slice(int l) const;
  void set_slice(int l, const PlaneField& plane);

  // Same tensor broadcast from a tau-independent plane.
  static StateField broadcast(const PlaneField& plane, const TorusGrid& torus);

  bool all_finite() const noexcept;
  bool same_shape(const StateField& other) const noexcept {
    return grid_ == other.grid_ && torus_ == other.torus_;
  }

 private:
  std::size_t offset(int i, int j) const noexcept {
    return (static_cast<std::size_t>(i) * grid_.size() + j) * torus_.size();
  }

  PhaseGrid grid_{2, 1.0};
  TorusGrid torus_{2};
  std::vector<double> data_;
};

// (r, v) -> xi = exp(-tau J)(r, v).
Point2 rotate_to_xi(double tau, Point2 rv) noexcept;
// xi -> (r, v) = exp(tau J) xi; inverse of rotate_to_xi.
Point2 rotate_to_rv(double tau, Point2 xi) noexcept;

// Gaussian in v times a smoothed step in r. Defaults reproduce the beam's
// initial distribution; other shapes are pluggable through the parameters.
struct InitialProfile {
  double alpha = 0.2;
  double step_center = 1.2;
  double step_width = 0.3;

  double operator()(double r, double v) const noexcept;
  double operator()(Point2 p) const noexcept { return (*this)(p.x, p.y); }
  // Smoothed indicator of |r| <= step_center.
  double chi(double r) const noexcept;
};

double eval_f0(double r, double v, double alpha) noexcept;

// Samples the profile on the plane, treating the plane coordinates as (r, v).
PlaneField sample_profile(const InitialProfile& profile, const PhaseGrid& grid);

}  // namespace vlasov_ap
