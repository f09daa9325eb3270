#include "test_util.hpp"

#include "ssprep/qubit.hpp"
#include "ssprep/spike.hpp"
#include "ssprep/ttss.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ssprep;

namespace {

cmat proj(Index d, Index k) {
  cmat m = cmat::Zero(d, d);
  m(k, k) = 1.0;
  return m;
}

Liouvillian damping(double rate) {
  cmat sm = cmat::Zero(2, 2);
  sm(0, 1) = 1.0;
  return build_lindbladian(cmat::Zero(2, 2), {{sm, rate}});
}

QubitModel unit_qubit(double g, double beta) {
  QubitModel m;
  m.g = g;
  m.beta = beta;
  return m;
}

void expect_valid(const TTSSRecord& r) {
  EXPECT_GT(r.tau, 0.0);
  EXPECT_LE(r.residual, 1e-3 * r.epsilon);
  EXPECT_EQ(r.flags & kFlagResidual, 0u);
}

}  // namespace

TEST(Relaxation, AmplitudeDampingLogHundred) {
  // TND(t) = e^{-t}, so t = ln(1/eps).
  const TTSSRecord r = ttss_relax(damping(1.0), DensityMatrix(proj(2, 1)), proj(2, 0), 1e-2);
  expect_valid(r);
  EXPECT_NEAR(r.tau, std::log(100.0), 1e-4 * std::log(100.0));
  EXPECT_EQ(r.method, TTSSMethod::relaxation);
}

TEST(Relaxation, MinimalityOnMonotoneDistance) {
  const Liouvillian l = davies_generator(HamiltonianSpec::from_matrix(pauli_z() * 0.5), pauli_y(), {0.4, 2.0});
  const DensityMatrix rho0 = DensityMatrix::maximally_mixed(2);
  const TTSSRecord r = ttss_relax(l, rho0, 1e-2);
  expect_valid(r);
  const DensityMatrix ss = steady_state(l);
  EXPECT_GT(trace_norm_distance(propagate_relax(l, rho0, 0.9 * r.tau), ss), 1e-2);
}

TEST(Relaxation, ClosedFormOnRandomRates) {
  std::uniform_real_distribution<double> rate(0.05, 5.0), eps(1e-4, 0.3);
  for (int k = 0; k < 10; ++k) {
    const double gamma = rate(test::rng()), e = eps(test::rng());
    const TTSSRecord r = ttss_relax(damping(gamma), DensityMatrix(proj(2, 1)), proj(2, 0), e);
    EXPECT_NEAR(r.tau, std::log(1.0 / e) / gamma, 1e-4 * std::log(1.0 / e) / gamma);
  }
}

TEST(AdiabaticTtss, ConvergedStartReturnsProbe) {
  const Liouvillian l = damping(1.0);
  const Schedule sched = Schedule::constant(l, 1.0, DensityMatrix(proj(2, 0)));
  TTSSOptions opt;
  opt.t_probe = 0.25;
  const TTSSRecord adia = ttss_adia(sched, 1e-2, opt);
  EXPECT_TRUE(adia.flags & kFlagAlreadyConverged);
  EXPECT_EQ(adia.tau, 0.25);
  const TTSSRecord inst = ttss_instantaneous(sched, 1e-2, opt);
  EXPECT_TRUE(inst.flags & kFlagAlreadyConverged);
  EXPECT_EQ(inst.tau, 0.25);
}

TEST(AdiabaticTtss, QubitResidualAndMinimality) {
  const Schedule sched = qubit_schedule(unit_qubit(0.5, 10.0), 1.0);
  const TTSSRecord r = ttss_adia(sched, 1e-2);
  expect_valid(r);
  EXPECT_EQ(r.method, TTSSMethod::adiabatic);
  const Trajectory shorter = propagate_adiabatic(sched.with_tau(0.9 * r.tau));
  EXPECT_GT(trace_norm_distance(shorter.final_rho, sched.steady_at(1.0)), 1e-2);
}

TEST(Instantaneous, StricterThanFinalState) {
  const std::vector<Schedule> schedules = {qubit_schedule(unit_qubit(0.5, 10.0), 1.0),
                                           qubit_schedule(unit_qubit(1.5, 40.0), 1.0),
                                           spike_schedule({4, 1.0, 1.0}, 1.0)};
  for (const Schedule& sched : schedules) {
    for (double eps : {1e-1, 1e-2}) {
      const TTSSRecord adia = ttss_adia(sched, eps);
      const TTSSRecord inst = ttss_instantaneous(sched, eps);
      expect_valid(inst);
      EXPECT_GE(inst.tau, adia.tau * (1.0 - 1e-4)) << "eps=" << eps;
    }
  }
}

TEST(Solver, FirstDownCrossingAndNonMonotoneFlag) {
  // Rises between the first two probes, then decays.
  const auto d = [](double t) { return t < 2.0 ? 0.5 : t < 4.0 ? 0.7 : 0.7 * std::exp(-(t - 4.0)); };
  const TTSSRecord r = solve_ttss(d, 1e-2, 1.0, 1e6, TTSSMethod::adiabatic);
  EXPECT_TRUE(r.flags & kFlagNonMonotone);
  EXPECT_NEAR(r.tau, 4.0 + std::log(70.0), 1e-4 * r.tau);
}

TEST(Solver, TimeoutWithoutCrossing) {
  try {
    solve_ttss([](double) { return 1.0; }, 1e-2, 1.0, 100.0, TTSSMethod::relaxation);
    FAIL() << "expected timeout";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::timeout);
  }
}

TEST(Estimates, RelaxFormula) {
  const long double expected = std::log(std::sqrt(2.0L) / 1e-2L) / 0.5L;
  EXPECT_NEAR(estimate_relax(0.5, std::sqrt(2.0), 1e-2), static_cast<double>(expected), 1e-12);
  EXPECT_NEAR(estimate_relax(0.5, std::sqrt(2.0), 1e-2), 9.903, 5e-4);
  EXPECT_EQ(estimate_relax(0.7, 0.3, 0.3), 0.0);
}

TEST(Estimates, AdiaFormula) { EXPECT_DOUBLE_EQ(estimate_adia(3.0, 1e-2), 300.0); }

TEST(Fits, ExactPowerLaw) {
  const std::vector<double> xs = {1, 2, 3, 5, 8};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(2.0 * x * x * x);
  const ScalingEstimate e = fit_power_law(xs, ys);
  EXPECT_NEAR(e.exponent, 3.0, 1e-12);
  EXPECT_NEAR(e.prefactor, 2.0, 1e-12);
  EXPECT_NEAR(e.r_squared, 1.0, 1e-12);
  EXPECT_EQ(e.points, 5u);
}

TEST(Fits, LinearFitRecoversLine) {
  const LinearFit f = fit_linear({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
}

TEST(Fits, RSquaredInUnitInterval) {
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<double> xs, ys;
  for (int i = 1; i <= 20; ++i) {
    xs.push_back(i);
    ys.push_back(std::pow(i, 1.7) * std::exp(noise(test::rng())));
  }
  const ScalingEstimate e = fit_power_law(xs, ys);
  EXPECT_GE(e.r_squared, 0.0);
  EXPECT_LE(e.r_squared, 1.0);
}

TEST(Fits, RejectsNonPositiveInputs) {
  try {
    fit_power_law({1, 2, 3}, {1, -2, 3});
    FAIL() << "expected domain error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::domain);
  }
}

TEST(Fits, RejectsTooFewPoints) { EXPECT_THROW(fit_power_law({1, 2}, {1, 2}), Error); }
