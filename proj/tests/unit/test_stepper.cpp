#include <cmath>
#include <numbers>
#include <random>

#include "../support/oracles.hpp"
#include <doctest.h>
#include "vlasov_ap/error.hpp"

using namespace vlasov_ap;
using std::numbers::pi;

namespace {

StateField random_state(const PhaseGrid& g, const TorusGrid& t, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  StateField f(g, t);
  for (double& x : f.values()) x = u(rng);
  return f;
}

VectorFieldSample constant_field(const PhaseGrid& g, const TorusGrid& t, double e1, double e2) {
  return {StateField(g, t, e1), StateField(g, t, e2)};
}

bool interior(const PhaseGrid& g, int i, int j) { return i > 0 && j > 0 && i + 1 < g.size() && j + 1 < g.size(); }

}  // namespace

TEST_CASE("flux examples") {
  const PhaseGrid g(8, 4.0);
  const TorusGrid t(4);
  VectorFieldSample rot{StateField(g, t), StateField(g, t)};
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        rot.e1.at(l, i, j) = -g.node(j);
        rot.e2.at(l, i, j) = g.node(i);
      }
  const StateField a = flux(rot, StateField(g, t, 2.0));
  StateField lin(g, t);
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) lin.at(l, i, j) = g.node(i);
  const StateField b = flux(constant_field(g, t, 1.7, 0.0), lin);
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        if (interior(g, i, j)) {
          CHECK(a.at(l, i, j) == 0.0);
          CHECK(b.at(l, i, j) == doctest::Approx(1.7).epsilon(1e-15));
        }
  const StateField f = random_state(g, t, 1);
  const VectorFieldSample e{random_state(g, t, 2), random_state(g, t, 3)};
  CHECK(oracle::max_abs_diff(flux(e, f).values(), oracle::flux_loop(e, f).values()) < 1e-14);
}

TEST_CASE("four-point average examples") {
  const PhaseGrid g(8, 4.0);
  const TorusGrid t(4);
  const StateField c = four_point_average(StateField(g, t, 2.0));
  CHECK(c.at(1, 3, 4) == 2.0);
  CHECK(c.at(1, 0, 4) == 1.5);
  CHECK(c.at(2, 7, 7) == 1.0);
  StateField lin(g, t);
  for (int l = 0; l < 4; ++l)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) lin.at(l, i, j) = 3 * g.node(i) - 1;
  const StateField la = four_point_average(lin);
  for (int i = 1; i < 7; ++i)
    for (int j = 1; j < 7; ++j) CHECK(la.at(0, i, j) == doctest::Approx(lin.at(0, i, j)).epsilon(1e-15));
  const StateField f = random_state(g, t, 4);
  CHECK(oracle::max_abs_diff(four_point_average(f).values(), oracle::average_loop(f).values()) < 1e-15);
  // Plane version agrees slice by slice.
  const PlaneField p = four_point_average(f.slice(2));
  CHECK(oracle::max_abs_diff(p.values(), four_point_average(f).slice(2).values()) == 0.0);
}

TEST_CASE("half step examples") {
  const PhaseGrid g(8, 4.0);
  const TorusGrid t(16);
  const TorusOps ops(t);
  const VectorFieldSample zero = constant_field(g, t, 0.0, 0.0);
  const StateField flat = StateField::broadcast(sample_profile(InitialProfile{}, g), t);
  const SchemeParams p{0.1, 0.05, 1.0};
  CHECK(oracle::max_abs_diff(step_half(flat, zero, p, ops).values(), four_point_average(flat).values()) < 1e-15);

  StateField wave(g, t);
  for (int l = 0; l < 16; ++l)
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) wave.at(l, i, j) = std::cos(t.node(l));
  const StateField h = step_half(wave, zero, p, ops);
  const double lambda = p.lambda();
  for (int l = 0; l < 16; ++l) {
    const double expect = (std::polar(1.0, t.node(l)) / std::complex<double>(1.0, lambda)).real();
    CHECK(std::abs(h.at(l, 3, 3) - expect) < 1e-12);
  }
  // Small dt leaves the average.
  const SchemeParams tiny{0.1, 1e-12, 1.0};
  const VectorFieldSample e = applied_field_sample(Tension::Cos2Squared, g, t);
  CHECK(oracle::max_abs_diff(step_half(flat, e, tiny, ops).values(), four_point_average(flat).values()) < 1e-10);
}

TEST_CASE("full step examples") {
  const PhaseGrid g(16, 4.0);
  const TorusGrid t(8);
  const TorusOps ops(t);
  const VectorFieldSample zero = constant_field(g, t, 0.0, 0.0);
  const StateField flat = StateField::broadcast(sample_profile(InitialProfile{}, g), t);
  const SchemeParams p{0.1, 0.05, 1.0};
  CHECK(oracle::max_abs_diff(step_full(flat, step_half(flat, zero, p, ops), zero, p, ops).values(), flat.values()) ==
        0.0);

  // Non-stiff limit: classical two-step Lax-Wendroff slice by slice.
  const VectorFieldSample e = applied_field_sample(Tension::Cos2Squared, g, t);
  const StateField f = build_initial_with_correction(Tension::Cos2Squared, FieldMode::Linear, 0.3, g, t);
  const SchemeParams slow{1e30, 0.03, 1.0};
  const StateField half = step_half(f, e, slow, ops);
  const StateField next = step_full(f, half, e, slow, ops);
  StateField lw_half = oracle::average_loop(f);
  const StateField phi0 = oracle::flux_loop(e, f);
  for (std::size_t k = 0; k < lw_half.values().size(); ++k) lw_half.values()[k] -= 0.015 * phi0.values()[k];
  StateField lw = f;
  const StateField phi1 = oracle::flux_loop(e, lw_half);
  for (std::size_t k = 0; k < lw.values().size(); ++k) lw.values()[k] -= 0.03 * phi1.values()[k];
  CHECK(oracle::max_abs_diff(next.values(), lw.values()) < 1e-13);

  // Mode 0 is untouched by the tau terms.
  const SchemeParams stiff{0.01, 0.03, 1.0};
  const StateField h2 = step_half(f, e, stiff, ops);
  const StateField n2 = step_full(f, h2, e, stiff, ops);
  const StateField phi = flux(e, h2);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      std::vector<double> base(8);
      for (int l = 0; l < 8; ++l) base[l] = f.at(l, i, j) - 0.03 * phi.at(l, i, j);
      CHECK(std::abs(ops.project_mean(n2.pencil(i, j)) - ops.project_mean(base)) < 1e-14);
    }
}

TEST_CASE("advance: linear field, mass, stability failure") {
  const PhaseGrid g(64, 4.0);
  const TorusGrid t(16);
  const ApStepper stepper(g, t, Tension::Cos2Squared, FieldMode::Linear);
  StateField f = build_initial_with_correction(Tension::Cos2Squared, FieldMode::Linear, 0.2, g, t);
  const VectorFieldSample e = stepper.field(0.0, f);
  CHECK(oracle::max_abs_diff(e.e1.values(), stepper.field(1.0, StateField(g, t)).e1.values()) == 0.0);
  const SchemeParams p{0.2, cfl_dt(g, e, 1.0), 1.0};
  const double m0 = macro_mass(micro_macro_split(f, stepper.ops()).macro);
  for (int n = 0; n < 10; ++n) f = stepper.advance(f, n * p.delta_t, p);
  CHECK(std::abs(macro_mass(micro_macro_split(f, stepper.ops()).macro) - m0) <= 1e-10 * m0);
  // The free function matches the stepper object.
  const StateField f0 = build_initial_plain(g, t);
  CHECK(oracle::max_abs_diff(advance(f0, 0.0, p, FieldMode::Linear, Tension::Cos2Squared).values(),
                             stepper.advance(f0, 0.0, p).values()) == 0.0);

  StateField bad = f0;
  bad.at(0, 5, 5) = INFINITY;
  try {
    stepper.advance(bad, 0.0, p);
    FAIL("expected a stability failure");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::StabilityFailure);
  }
  CHECK_THROWS_AS(SchemeParams({0.0, 0.1, 1.0}).validate(), Error);
  CHECK_THROWS_AS(SchemeParams({0.1, -0.1, 1.0}).validate(), Error);
  CHECK_THROWS_AS(SchemeParams({0.1, 0.1, 1.5}).validate(), Error);
}

TEST_CASE("stiff tau transport is second order in time") {
  // E = 0 leaves d_t F + (1/eps) d_tau F = 0, solved by F(tau - t/eps).
  const PhaseGrid g(8, 4.0);
  const TorusGrid t(16);
  const double eps = 0.1, t_end = 0.5;
  const ApStepper stepper(g, t, Tension::Cos2Squared, FieldMode::Linear);
  auto shape = [](double tau) { return std::cos(tau) + 0.3 * std::sin(2 * tau); };
  std::vector<double> errors;
  for (double dt : {0.02, 0.01, 0.005}) {
    StateField f(g, t);
    for (int l = 0; l < 16; ++l)
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) f.at(l, i, j) = shape(t.node(l));
    const SchemeParams p{eps, dt, 1.0};
    const VectorFieldSample zero = constant_field(g, t, 0.0, 0.0);
    const int steps = static_cast<int>(std::lround(t_end / dt));
    for (int n = 0; n < steps; ++n) f = step_full(f, step_half(f, zero, p, stepper.ops()), zero, p, stepper.ops());
    double err = 0.0;
    for (int l = 0; l < 16; ++l) err = std::max(err, std::abs(f.at(l, 3, 4) - shape(t.node(l) - t_end / eps)));
    errors.push_back(err);
  }
  CHECK(std::log(errors[0] / errors[1]) / std::log(2.0) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::log(errors[1] / errors[2]) / std::log(2.0) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("one-step error is third order in dt on a resolved mesh") {
  // The averaged half step adds an O(dt^2) defect that vanishes with the mesh,
  // so the dt^3 term is visible only once the data is well resolved.
  const PhaseGrid g(128, 4.0);
  const TorusGrid t(16);
  const ApStepper stepper(g, t, Tension::Cos2Squared, FieldMode::Linear);
  StateField f(g, t);
  for (int l = 0; l < 16; ++l)
    for (int i = 0; i < 128; ++i)
      for (int j = 0; j < 128; ++j) {
        const double x = g.node(i), y = g.node(j);
        f.at(l, i, j) = std::exp(-(x * x + y * y) / 2) * (1 + 0.1 * std::cos(t.node(l)));
      }
  std::vector<double> dts, diffs;
  for (double dt : {0.04, 0.02, 0.01}) {
    const SchemeParams full{1.0, dt, 1.0}, half{1.0, dt / 2, 1.0};
    const StateField one = stepper.advance(f, 0.0, full);
    const StateField two = stepper.advance(stepper.advance(f, 0.0, half), dt / 2, half);
    dts.push_back(dt);
    diffs.push_back(oracle::max_abs_diff(one.values(), two.values()));
  }
  CHECK(std::log(diffs[0] / diffs[2]) / std::log(dts[0] / dts[2]) >= 2.7);
}

TEST_CASE("CFL step") {
  const PhaseGrid g(128, 4.0);
  const TorusGrid t(4);
  CHECK(cfl_dt(g, constant_field(g, t, 1.0, -0.5), 1.0) == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(cfl_dt(g, constant_field(g, t, 2.0, -0.5), 1.0) == doctest::Approx(0.03125).epsilon(1e-15));
  CHECK(cfl_dt(g, constant_field(g, t, 1.0, 0.0), 0.5) == doctest::Approx(0.03125).epsilon(1e-15));
  const double beam_dt = cfl_dt(g, applied_field_sample(Tension::Cos2Squared, g, TorusGrid(64)), 1.0);
  CHECK(beam_dt > 0.01);
  CHECK(beam_dt < 0.04);
  try {
    cfl_dt(g, constant_field(g, t, 0.0, 0.0), 1.0);
    FAIL("expected ZeroField");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroField);
  }
}

TEST_CASE("initial data") {
  const PhaseGrid g(32, 4.0);
  const TorusGrid t(64);
  const TorusOps ops(t);
  const InitialProfile prof;
  const PlaneField f0 = sample_profile(prof, g);
  const StateField c = build_initial_with_correction(Tension::Cos2Squared, FieldMode::Linear, 0.4, g, t);
  CHECK(oracle::max_abs_diff(c.slice(0).values(), f0.values()) == 0.0);
  for (double x : c.values()) CHECK(x >= 0.0);
  // D1(pi/2) = D0, so the displacement at tau = pi/2 is 2 D0 xi = (-xi1/6, xi2/6).
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      const double x = g.node(i), y = g.node(j);
      CHECK(std::abs(c.at(16, i, j) - prof(x + 0.4 * x / 6, y - 0.4 * y / 6)) < 1e-10);
    }
  const StateField plain = build_initial_plain(g, t);
  const StateField zero_eps = build_initial_with_correction(Tension::Cos2Squared, FieldMode::Linear, 0.0, g, t);
  CHECK(oracle::max_abs_diff(plain.values(), zero_eps.values()) == 0.0);
  const MicroMacro mm = micro_macro_split(plain, ops);
  // Exact up to the FFT round trip.
  CHECK(oracle::max_abs(mm.micro.values()) < 1e-14 * oracle::max_abs(f0.values()));
  CHECK(oracle::max_abs_diff(mm.macro.values(), f0.values()) < 1e-14 * oracle::max_abs(f0.values()));
  // Poisson mode adds the self field of f0 to the displacement.
  const StateField cp = build_initial_with_correction(Tension::Cos2Squared, FieldMode::Poisson, 0.4, g, t);
  CHECK(oracle::max_abs_diff(cp.slice(0).values(), f0.values()) == 0.0);
  CHECK(oracle::max_abs_diff(cp.values(), c.values()) > 1e-3);
}

TEST_CASE("micro-macro form equals the direct form") {
  const PhaseGrid g(32, 4.0);
  const TorusGrid t(16);
  for (FieldMode mode : {FieldMode::Linear, FieldMode::Poisson}) {
    const ApStepper stepper(g, t, Tension::Cos2Squared, mode);
    StateField f = build_initial_with_correction(Tension::Cos2Squared, mode, 0.05, g, t);
    MicroMacro mm = micro_macro_split(f, stepper.ops());
    const SchemeParams p{0.05, 0.04, 1.0};
    for (int n = 0; n < 5; ++n) {
      f = stepper.advance(f, n * p.delta_t, p);
      mm = stepper.advance_micro_macro(mm, n * p.delta_t, p);
    }
    CHECK(oracle::max_abs_diff(micro_macro_join(mm.macro, mm.micro).values(), f.values()) < 1e-12);
  }
}

TEST_CASE("diffusion stepper") {
  // N = 64 keeps the initial mass off the zero-inflow boundary.
  const PhaseGrid g(64, 4.0);
  const TorusGrid t(32);
  const TorusOps ops(t);
  const VectorFieldSample e = applied_field_sample(Tension::Cos4, g, t);
  CHECK_NOTHROW(require_mean_free_field(e, ops));
  try {
    require_mean_free_field(applied_field_sample(Tension::Cos2Squared, g, t), ops);
    FAIL("expected NonMeanFreeTension");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::NonMeanFreeTension);
  }
  const StateField f0 = build_initial_with_correction(Tension::Cos4, FieldMode::Linear, 0.05, g, t);
  MicroMacro mm = micro_macro_split(f0, ops);
  const SchemeParams p{0.05, 0.01, 1.0};
  const double m0 = macro_mass(mm.macro);
  for (int n = 0; n < 5; ++n) {
    mm = step_diffusion(mm.macro, mm.micro, e, p, ops);
    double worst = 0.0;
    for (int i = 0; i < g.size(); ++i)
      for (int j = 0; j < g.size(); ++j) worst = std::max(worst, std::abs(ops.project_mean(mm.micro.pencil(i, j))));
    CHECK(worst < 1e-13);
  }
  CHECK(std::abs(macro_mass(mm.macro) - m0) < 1e-10 * m0);
}

TEST_CASE("readout") {
  const PhaseGrid g(16, 4.0);
  const TorusGrid t(32);
  const TorusOps ops(t);
  StateField f(g, t);
  // At most six harmonics in tau.
  auto value = [&](double tau, int i, int j) {
    const double x = g.node(i), y = g.node(j);
    return std::exp(-(x * x + y * y)) * (1 + 0.3 * std::cos(tau) + 0.2 * x * std::sin(3 * tau) + 0.1 * std::cos(6 * tau));
  };
  for (int l = 0; l < 32; ++l)
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) f.at(l, i, j) = value(t.node(l), i, j);

  const Readout at_zero = readout(f, 4 * pi * 0.1, 0.1, ops);
  CHECK(oracle::max_abs_diff(at_zero.f_tilde.values(), f.slice(0).values()) == 0.0);
  CHECK(oracle::max_abs_diff(at_zero.f_rv.values(), at_zero.f_tilde.values()) < 1e-12);

  const double angle = 1.2345;
  const Readout r = readout_at_angle(f, angle, ops);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) CHECK(std::abs(r.f_tilde(i, j) - value(angle, i, j)) < 1e-10);
  // f_rv is the bilinear interpolant of f_tilde at the rotated node.
  const BilinearInterpolator in(r.f_tilde);
  CHECK(r.f_rv(5, 9) == in(rotate_to_xi(angle, {g.node(5), g.node(9)})));

  const StateField flat = StateField::broadcast(sample_profile(InitialProfile{}, g), t);
  const Readout rf = readout(flat, 0.77, 0.01, ops);
  CHECK(oracle::max_abs_diff(rf.f_tilde.values(), micro_macro_split(flat, ops).macro.values()) < 1e-13);
}

TEST_CASE("mass diagnostics") {
  const PhaseGrid g(8, 4.0);
  PlaneField p(g, 0.0);
  p(4, 4) = 2.0;
  CHECK(macro_mass(p) == 2.0);
  CHECK(boundary_mass_fraction(p) == 0.0);
  p(0, 3) = 2.0;
  CHECK(boundary_mass_fraction(p) == doctest::Approx(0.5));
}
