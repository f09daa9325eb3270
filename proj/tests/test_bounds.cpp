#include "test_util.hpp"

#include "ssprep/bounds.hpp"
#include "ssprep/qubit.hpp"
#include "ssprep/spike.hpp"
#include "ssprep/ttss.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ssprep;
using ssprep::test::max_abs;

namespace {

QubitModel unit_qubit(double g, double beta) {
  QubitModel m;
  m.g = g;
  m.beta = beta;
  return m;
}

Liouvillian unit_davies(double g, double beta) {
  cmat h = cmat::Zero(2, 2);
  h << -0.5, 0, 0, 0.5;
  return davies_generator(HamiltonianSpec::from_matrix(h), pauli_y(), {g, beta});
}

cmat ket_bra(Index d, Index r, Index c) {
  cmat m = cmat::Zero(d, d);
  m(r, c) = 1.0;
  return m;
}

DaviesPath qubit_path(const QubitModel& m) {
  return {[m](double s) { return m.hamiltonian(s); }, pauli_y(), m.bath()};
}

// Global phases on every eigenvector column.
HamiltonianSpec rephased(HamiltonianSpec spec, std::mt19937_64& g) {
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  for (Index k = 0; k < spec.dim(); ++k) spec.vectors.col(k) *= std::polar(1.0, phase(g));
  return spec;
}

}  // namespace

TEST(Resolvent, QubitCoherenceEigenvector) {
  const Liouvillian l = unit_davies(1.0, 1.0);
  const ReducedResolvent s(l);
  const double gamma = 0.5 * ohmic_gamma(1.0, {1.0, 1.0}) * (1.0 + std::exp(-1.0));
  // |1><0| with E_1 - E_0 = 1 rotates as e^{-i t}.
  const cplx lambda10(-gamma, -1.0);
  EXPECT_LE(max_abs(s.apply(ket_bra(2, 1, 0)) - ket_bra(2, 1, 0) / lambda10), 1e-12);
}

TEST(Resolvent, AnnihilatesSteadyState) {
  for (int trial = 0; trial < 5; ++trial) {
    const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(3));
    const Liouvillian l = davies_generator(spec, test::random_hermitian(3), {0.5, 1.5});
    EXPECT_LE(max_abs(ReducedResolvent(l).apply(steady_state(l).matrix())), 1e-10);
  }
}

TEST(Resolvent, ResolventIdentities) {
  for (int trial = 0; trial < 5; ++trial) {
    const Index d = 2 + trial % 3;
    const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(d));
    const Liouvillian l = davies_generator(spec, test::random_hermitian(d), {0.5, 1.5});
    const ReducedResolvent r(l);
    const cmat s = r.matrix(), p0 = r.projector(), lm = r.generator().matrix;
    const cmat id = cmat::Identity(s.rows(), s.cols());
    EXPECT_LE(max_abs(s * p0), 1e-9);
    EXPECT_LE(max_abs(p0 * s), 1e-9);
    EXPECT_LE(max_abs(s * lm + p0 - id), 1e-8);
    EXPECT_LE(max_abs(lm * s + p0 - id), 1e-8);
    const cvec v = vectorize(test::random_matrix(d));
    EXPECT_LE((s * (lm * v) + p0 * v - v).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Resolvent, DegenerateNullSpaceRejected) {
  cmat h = cmat::Zero(2, 2);
  h(1, 1) = 1.0;
  EXPECT_THROW(ReducedResolvent(build_lindbladian(h, {})), Error);
}

TEST(AdiabaticB, ConstantScheduleIsZero) {
  const Liouvillian l = unit_davies(0.5, 2.0);
  const AdiabaticBound b = adiabatic_B(Schedule::constant(l, 1.0, steady_state(l)), uniform_grid(21));
  EXPECT_LE(b.total(), 1e-9);
}

TEST(AdiabaticB, SoundOnQubit) {
  const Schedule sched = qubit_schedule(unit_qubit(1.0, 10.0), 1.0);
  const double b = adiabatic_B(sched, uniform_grid(101)).total();
  ASSERT_GT(b, 0.0);
  for (double tau : {10.0, 100.0, 1000.0, 10000.0}) {
    const Trajectory traj = propagate_adiabatic(sched.with_tau(tau));
    EXPECT_LE(trace_norm_distance(traj.final_rho, sched.steady_at(1.0)), b / tau) << "tau=" << tau;
  }
}

TEST(AdiabaticB, BoundsAdiabaticTtss) {
  const std::vector<Schedule> schedules = {qubit_schedule(unit_qubit(0.5, 10.0), 1.0),
                                           spike_schedule({4, 1.0, 1.0}, 1.0)};
  for (const Schedule& sched : schedules) {
    const double b = adiabatic_B(sched, uniform_grid(101)).total();
    EXPECT_LE(ttss_adia(sched, 1e-2).tau, estimate_adia(b, 1e-2));
  }
}

TEST(AdiabaticB, IntegrandSampledOnGrid) {
  const auto grid = uniform_grid(51);
  const AdiabaticBound b = adiabatic_B(qubit_schedule(unit_qubit(0.3, 5.0), 1.0), grid);
  ASSERT_EQ(b.s.size(), grid.size());
  ASSERT_EQ(b.integrand.size(), grid.size());
  for (double v : b.integrand) EXPECT_GE(v, 0.0);
  EXPECT_LE(b.integral, b.max_integrand + 1e-12);
  EXPECT_NEAR(b.integral, simpson(b.s, b.integrand), 1e-14);
}

TEST(ZeroT, DiagonalPerturbationGivesZero) {
  const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(4));
  const cmat a = test::random_hermitian(4);
  const SpectralDensity bath{0.3, std::numeric_limits<double>::infinity()};
  const cvec lambda = coherence_eigenvalues(spec, a, bath);
  rvec shifts(4);
  shifts << 0.3, -1.1, 0.4, 2.0;
  const cmat hprime = spec.vectors * shifts.cast<cplx>().asDiagonal() * spec.vectors.adjoint();
  const SrhopNorm n = zero_T_srhop_norm(spec, hprime, lambda);
  EXPECT_LE(n.full, 1e-12);
  EXPECT_LE(n.leading, 1e-12);
}

TEST(ZeroT, QubitFullSumEqualsLeadingTerm) {
  const QubitModel m = unit_qubit(0.4, std::numeric_limits<double>::infinity());
  for (double s : {0.1, 0.5, 0.9}) {
    const HamiltonianSpec spec = HamiltonianSpec::from_matrix(m.hamiltonian(s));
    const cmat hprime = m.hamiltonian(1.0) - m.hamiltonian(0.0);
    const SrhopNorm n = zero_T_srhop_norm(spec, hprime, coherence_eigenvalues(spec, pauli_y(), m.bath()));
    EXPECT_NEAR(n.full, n.leading, 1e-14 * n.full);
    EXPECT_FALSE(n.argmax_not_first);
  }
}

TEST(ZeroT, SrhopNormMatchesFiniteBetaNumerics) {
  // At beta = 200, ||S rho'||_1 from the numerical resolvent and the Gibbs
  // derivative approaches the zero-temperature sum.
  const double beta = 200.0, h = 1e-5;
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const cmat h0 = test::random_hermitian(4), h1 = test::random_hermitian(4), a = test::random_hermitian(4);
    const auto spec_at = [&](double s) { return HamiltonianSpec::from_matrix(h0 + s * h1); };
    const HamiltonianSpec spec = spec_at(0.5);
    if (spec.energies(1) - spec.energies(0) < 0.2) continue;  // keep beta * gap well above thermal scale
    const SpectralDensity bath{0.4, beta};
    const cmat rho_prime = (gibbs_state(spec_at(0.5 + h), beta) - gibbs_state(spec_at(0.5 - h), beta)) / (2.0 * h);
    const double numeric = trace_norm(ReducedResolvent(davies_generator(spec, a, bath)).apply(rho_prime));
    const double analytic = zero_T_srhop_norm(spec, h1, coherence_eigenvalues(spec, a, bath)).full;
    EXPECT_NEAR(numeric, analytic, 0.05 * analytic) << "trial " << trial;
    ++checked;
  }
  EXPECT_GE(checked, 3);
}

TEST(ZeroT, ProportionalPerturbationGivesZero) {
  const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(3));
  const cmat a = test::random_hermitian(3);
  const SpectralDensity bath{0.5, std::numeric_limits<double>::infinity()};
  const cvec lambda = coherence_eigenvalues(spec, a, bath);
  const cmat hprime = 0.7 * spec.matrix;
  EXPECT_LE(zero_T_eps(spec, hprime, lambda(1)), 1e-12);
  const ZeroTExact exact = zero_T_error_exact({spec, hprime, cmat::Zero(3, 3), lambda, cvec::Zero(3)});
  EXPECT_LE(exact.value, 1e-12);
}

TEST(ZeroT, ExactFormIsPhaseInvariant) {
  for (int trial = 0; trial < 10; ++trial) {
    const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(4));
    const cmat a = test::random_hermitian(4), hp = test::random_hermitian(4), hpp = test::random_hermitian(4);
    const SpectralDensity bath{0.5, std::numeric_limits<double>::infinity()};
    const cvec lambda = coherence_eigenvalues(spec, a, bath);
    cvec dlambda = cvec::Zero(4);
    for (Index l = 1; l < 4; ++l) dlambda(l) = cplx(0.1 * l, -0.2);
    const double base = zero_T_error_exact({spec, hp, hpp, lambda, dlambda}).value;
    const double turned = zero_T_error_exact({rephased(spec, test::rng()), hp, hpp, lambda, dlambda}).value;
    EXPECT_NEAR(base, turned, 1e-10 * std::max(1.0, base));
  }
}

TEST(ZeroT, QubitLeadingAndExactWithinFactorTwo) {
  for (double g : {0.1, 0.5, 1.0}) {
    const ZeroTBoundReport r =
        zero_T_bound(qubit_path(unit_qubit(g, std::numeric_limits<double>::infinity())), uniform_grid(101));
    for (size_t i = 0; i < r.s.size(); ++i) {
      if (r.eps_exact[i] <= 1e-12) continue;
      const double ratio = r.eps_leading[i] / r.eps_exact[i];
      EXPECT_GE(ratio, 0.5) << "g=" << g << " s=" << r.s[i];
      EXPECT_LE(ratio, 2.0) << "g=" << g << " s=" << r.s[i];
    }
  }
}

TEST(ZeroT, MeanNeverExceedsMax) {
  for (double g : {0.05, 0.3, 1.5}) {
    const ZeroTBoundReport r = zero_T_bound(qubit_path(unit_qubit(g, 40.0)), uniform_grid(101));
    EXPECT_LE(r.B_int, r.B_max);
    EXPECT_GT(r.B_int, 0.0);
  }
  const cmat h0 = test::random_hermitian(3), h1 = test::random_hermitian(3);
  const ZeroTBoundReport r = zero_T_bound({[=](double s) { cmat h = (1.0 - s) * h0 + s * h1; return h; },
                                           test::random_hermitian(3), {0.3, 100.0}},
                                          uniform_grid(101));
  EXPECT_LE(r.B_int, r.B_max);
}

TEST(FiniteT, Values) {
  EXPECT_NEAR(finite_T_correction(1.0, 0.1), 100.0 * std::exp(-10.0), 1e-15);
  EXPECT_NEAR(finite_T_correction(1.0, 0.1), 4.54e-3, 1e-5);
  EXPECT_NEAR(finite_T_correction(1.0, 0.025), 1600.0 * std::exp(-40.0), 1e-27);
  EXPECT_NEAR(finite_T_correction(1.0, 0.025), 6.8e-15, 0.05e-15);
  EXPECT_EQ(finite_T_correction(1.0, 0.0), 0.0);
  EXPECT_LT(finite_T_correction(1.0, 0.01), finite_T_correction(1.0, 0.025));
}

TEST(Simpson, ExactOnCubics) {
  std::vector<double> s, f;
  for (double x : uniform_grid(11)) {
    s.push_back(x);
    f.push_back(4.0 * x * x * x - x + 2.0);
  }
  EXPECT_NEAR(simpson(s, f), 1.0 - 0.5 + 2.0, 1e-14);
}
