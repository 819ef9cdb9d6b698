#include "vlasov_ap/averaging.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "parallel.hpp"
#include "vlasov_ap/error.hpp"

namespace vlasov_ap {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Scratch {
  std::vector<double> real;
  std::vector<std::complex<double>> spec;
  std::vector<std::complex<double>> spec2;
};

Scratch& scratch(int n) {
  thread_local Scratch s;
  if (static_cast<int>(s.real.size()) < n) {
    s.real.resize(n);
    s.spec.resize(n / 2 + 1);
    s.spec2.resize(n / 2 + 1);
  }
  return s;
}

double sup_norm(std::span<const double> g) {
  double m = 0.0;
  for (double x : g) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

struct TorusOps::Plans {
  int n = 0;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

TorusOps::TorusOps(const TorusGrid& torus) : torus_(torus) {
  // Plans are shared per size and live for the whole process.
  static std::map<int, std::shared_ptr<const Plans>> cache;
  std::lock_guard lock(planner_mutex());
  auto& slot = cache[torus.size()];
  if (!slot) {
    const int n = torus.size();
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    auto plans = std::make_shared<Plans>();
    plans->n = n;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    plans->r2c = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), flags);
    plans->c2r = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(out.data()), in.data(),
                                      flags | FFTW_DESTROY_INPUT);
    slot = std::move(plans);
  }
  plans_ = slot;
}

void TorusOps::forward(std::span<const double> g, std::span<std::complex<double>> coeffs) const {
  const int n = size();
  auto& s = scratch(n);
  std::copy(g.begin(), g.begin() + n, s.real.begin());
  fftw_execute_dft_r2c(plans_->r2c, s.real.data(), reinterpret_cast<fftw_complex*>(coeffs.data()));
}

void TorusOps::inverse(std::span<const std::complex<double>> coeffs, std::span<double> out) const {
  const int n = size();
  auto& s = scratch(n);
  std::copy(coeffs.begin(), coeffs.begin() + n / 2 + 1, s.spec2.begin());
  fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(s.spec2.data()), out.data());
  const double scale = 1.0 / n;
  for (int l = 0; l < n; ++l) out[l] *= scale;
}

double TorusOps::project_mean(std::span<const double> g) const {
  double sum = 0.0;
  for (int l = 0; l < size(); ++l) sum += g[l];
  return sum / size();
}

void TorusOps::fluctuation(std::span<const double> g, std::span<double> out) const {
  const double mean = project_mean(g);
  for (int l = 0; l < size(); ++l) out[l] = g[l] - mean;
}

void TorusOps::require_mean_free(std::span<const double> g) const {
  const double mean = project_mean(g);
  const double tol = 1e-12 * sup_norm(g.first(size()));
  if (std::abs(mean) > tol) {
    std::ostringstream msg;
    msg << "L^-1 applied to a sample with mean " << mean << " (tolerance " << tol << ")";
    raise(ErrorCode::NonZeroMeanInput, msg.str());
  }
}

void TorusOps::inv_L(std::span<const double> g, std::span<double> out) const {
  require_mean_free(g);
  const int n = size();
  auto& s = scratch(n);
  forward(g, s.spec);
  s.spec[0] = 0.0;
  for (int k = 1; k < n / 2; ++k) s.spec[k] /= std::complex<double>(0.0, k);
  // i/k times a real Nyquist coefficient is purely imaginary.
  s.spec[n / 2] = 0.0;
  inverse(s.spec, out);
}

void TorusOps::antiderivative_from_zero(std::span<const double> g, std::span<double> out) const {
  inv_L(g, out);
  const double origin = out[0];
  for (int l = 0; l < size(); ++l) out[l] -= origin;
  out[0] = 0.0;
}

void TorusOps::solve_implicit_tau(std::span<const double> rhs, double lambda, std::span<double> out) const {
  if (!(lambda >= 0.0)) raise(ErrorCode::InvalidArgument, "implicit tau solve needs lambda >= 0");
  const int n = size();
  auto& s = scratch(n);
  forward(rhs, s.spec);
  for (int k = 1; k < n / 2; ++k) s.spec[k] /= std::complex<double>(1.0, lambda * k);
  const double nyq = 0.5 * n;
  s.spec[n / 2] = (s.spec[n / 2] / std::complex<double>(1.0, lambda * nyq)).real();
  inverse(s.spec, out);
}

void TorusOps::spectral_derivative(std::span<const double> g, std::span<double> out) const {
  const int n = size();
  auto& s = scratch(n);
  forward(g, s.spec);
  s.spec[0] = 0.0;
  for (int k = 1; k < n / 2; ++k) s.spec[k] *= std::complex<double>(0.0, k);
  s.spec[n / 2] = 0.0;
  inverse(s.spec, out);
}

void TorusOps::solve_symmetric(std::span<const double> base, std::span<const double> forcing, double lambda,
                               std::span<double> out) const {
  const int n = size();
  auto& s = scratch(n);
  std::vector<std::complex<double>>& fb = s.spec;
  thread_local std::vector<std::complex<double>> ff;
  ff.resize(n / 2 + 1);
  forward(base, fb);
  forward(forcing, ff);
  fb[0] -= ff[0];
  for (int k = 1; k < n / 2; ++k) {
    const std::complex<double> explicit_part(1.0, -lambda * k);
    const std::complex<double> implicit_part(1.0, lambda * k);
    fb[k] = (explicit_part * fb[k] - ff[k]) / implicit_part;
  }
  const double nyq = 0.5 * n;
  fb[n / 2] = ((std::complex<double>(1.0, -lambda * nyq) * fb[n / 2] - ff[n / 2]) /
               std::complex<double>(1.0, lambda * nyq))
                  .real();
  inverse(fb, out);
}

double TorusOps::eval_at_tau(std::span<const double> g, double tau) const {
  const int n = size();
  auto& s = scratch(n);
  forward(g, s.spec);
  double value = s.spec[0].real();
  for (int k = 1; k < n / 2; ++k) {
    const std::complex<double> phase(std::cos(k * tau), std::sin(k * tau));
    value += 2.0 * (s.spec[k] * phase).real();
  }
  value += s.spec[n / 2].real() * std::cos(0.5 * n * tau);
  return value / n;
}

std::vector<double> TorusOps::fluctuation(std::span<const double> g) const {
  std::vector<double> out(size());
  fluctuation(g, out);
  return out;
}

std::vector<double> TorusOps::inv_L(std::span<const double> g) const {
  std::vector<double> out(size());
  inv_L(g, out);
  return out;
}

std::vector<double> TorusOps::antiderivative_from_zero(std::span<const double> g) const {
  std::vector<double> out(size());
  antiderivative_from_zero(g, out);
  return out;
}

std::vector<double> TorusOps::solve_implicit_tau(std::span<const double> rhs, double lambda) const {
  std::vector<double> out(size());
  solve_implicit_tau(rhs, lambda, out);
  return out;
}

std::vector<double> TorusOps::spectral_derivative(std::span<const double> g) const {
  std::vector<double> out(size());
  spectral_derivative(g, out);
  return out;
}

MicroMacro micro_macro_split(const StateField& f, const TorusOps& ops) {
  MicroMacro mm{PlaneField(f.grid()), StateField(f.grid(), f.torus())};
  const int n = f.n();
  VLASOV_AP_PARALLEL_FOR
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto src = f.pencil(i, j);
      const double mean = ops.project_mean(src);
      mm.macro(i, j) = mean;
      auto dst = mm.micro.pencil(i, j);
      for (std::size_t l = 0; l < src.size(); ++l) dst[l] = src[l] - mean;
    }
  return mm;
}

StateField micro_macro_join(const PlaneField& macro, const StateField& micro) {
  StateField out(micro.grid(), micro.torus());
  const int n = micro.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto src = micro.pencil(i, j);
      auto dst = out.pencil(i, j);
      for (std::size_t l = 0; l < src.size(); ++l) dst[l] = macro(i, j) + src[l];
    }
  return out;
}

}  // namespace vlasov_ap
