#include "test_util.hpp"

#include "ssprep/spectral.hpp"
#include "ssprep/superop.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace ssprep;
using ssprep::test::max_abs;

namespace {

cmat sigma_minus() {
  cmat m = cmat::Zero(2, 2);
  m(0, 1) = 1.0;  // |0><1|
  return m;
}

cmat proj(Index d, Index k) {
  cmat m = cmat::Zero(d, d);
  m(k, k) = 1.0;
  return m;
}

}  // namespace

TEST(Vectorize, ColumnStackingOfDiagonal) {
  const cvec v = vectorize(cmat::Identity(2, 2) / 2.0);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v(0), cplx(0.5));
  EXPECT_EQ(v(1), cplx(0.0));
  EXPECT_EQ(v(2), cplx(0.0));
  EXPECT_EQ(v(3), cplx(0.5));
}

TEST(Vectorize, RoundTripIsExact) {
  const cmat h = test::random_hermitian(3);
  EXPECT_EQ(devectorize(vectorize(h)), h);
}

TEST(Vectorize, SandwichMatchesKronecker) {
  const cmat a = test::random_matrix(2), b = test::random_matrix(2), rho = test::random_matrix(2);
  EXPECT_LE((vectorize(a * rho * b) - kron(b.transpose(), a) * vectorize(rho)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Vectorize, RejectsNonSquareLength) { EXPECT_THROW(devectorize(cvec::Zero(5)), Error); }

TEST(Lindblad, AmplitudeDampingOfExcitedState) {
  const Liouvillian l = build_lindbladian(cmat::Zero(2, 2), {{sigma_minus(), 1.0}});
  const cmat out = l.apply(proj(2, 1));
  EXPECT_LE(max_abs(out - (proj(2, 0) - proj(2, 1))), 1e-15);
}

TEST(Lindblad, CoherentPartOfSigmaZOnSigmaX) {
  cmat sz = cmat::Zero(2, 2), sx = cmat::Zero(2, 2), sy = cmat::Zero(2, 2);
  sz << 1, 0, 0, -1;
  sx << 0, 1, 1, 0;
  sy << 0, cplx(0, -1), cplx(0, 1), 0;
  const Liouvillian l = build_lindbladian(sz, {});
  EXPECT_LE(max_abs(l.apply(sx) - 2.0 * sy), 1e-15);
}

TEST(Lindblad, TracePreservationOnRandomInputs) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const Index d = 2 + k % 3;
    const Liouvillian l = build_lindbladian(
        test::random_hermitian(d), {{test::random_matrix(d), u(test::rng())}, {test::random_matrix(d), u(test::rng())}});
    EXPECT_LE(std::abs(l.apply(test::random_hermitian(d)).trace()), 1e-12);
    const cvec unit = vectorize(cmat::Identity(d, d));
    EXPECT_LE((unit.transpose() * l.matrix).cwiseAbs().maxCoeff(), 1e-10 * norm_inf(l.matrix));
  }
}

TEST(Lindblad, HermiticityPreservation) {
  for (int k = 0; k < 20; ++k) {
    const Index d = 3;
    const Liouvillian l = build_lindbladian(test::random_hermitian(d), {{test::random_matrix(d), 0.7}});
    const cmat out = l.apply(test::random_hermitian(d));
    EXPECT_LE(max_abs(out - out.adjoint()), 1e-10);
  }
}

TEST(Lindblad, RejectsNonHermitianHamiltonian) {
  EXPECT_THROW(build_lindbladian(test::random_matrix(2), {}), Error);
}

TEST(Ohmic, ZeroFrequencyLimit) {
  const SpectralDensity sd{0.3, 2.5};
  EXPECT_NEAR(ohmic_gamma(0.0, sd), 2.0 * std::numbers::pi * 0.09 / 2.5, 1e-15);
  EXPECT_NEAR(ohmic_gamma(1e-9, sd), ohmic_gamma(0.0, sd), 1e-9);
}

TEST(Ohmic, KmsRatio) {
  const SpectralDensity sd{1.0, 2.0};
  EXPECT_NEAR(ohmic_gamma(-0.7, sd) / ohmic_gamma(0.7, sd), std::exp(-2.0 * 0.7), 1e-14);
}

TEST(Ohmic, ValueAtUnitParameters) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const auto expected = static_cast<double>(2.0L * pi / (1.0L - std::exp(-1.0L)));
  EXPECT_NEAR(ohmic_gamma(1.0, {1.0, 1.0}), expected, 1e-13);
}

TEST(Ohmic, KmsAndPositivityOnRandomInputs) {
  std::uniform_real_distribution<double> w(0.01, 20.0), b(0.05, 20.0), g(0.01, 2.0);
  for (int k = 0; k < 100; ++k) {
    const SpectralDensity sd{g(test::rng()), b(test::rng())};
    const double om = w(test::rng());
    const double up = ohmic_gamma(om, sd), down = ohmic_gamma(-om, sd);
    EXPECT_GE(down, 0.0);
    EXPECT_LE(std::abs(down - std::exp(-sd.beta * om) * up), 1e-12 * up);
  }
}

TEST(Ohmic, RejectsNonPositiveBeta) { EXPECT_THROW(ohmic_gamma(1.0, {1.0, 0.0}), Error); }

TEST(Bohr, QubitFrequencies) {
  cmat h = cmat::Zero(2, 2);
  h << -0.5, 0, 0, 0.5;
  const auto groups = bohr_frequencies(HamiltonianSpec::from_matrix(h), 1e-9);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_NEAR(groups[0].omega, -1.0, 1e-15);
  EXPECT_NEAR(groups[1].omega, 0.0, 1e-15);
  EXPECT_NEAR(groups[2].omega, 1.0, 1e-15);
  EXPECT_EQ(groups[1].pairs.size(), 2u);
}

TEST(Bohr, DegenerateLevelsJoinZeroGroup) {
  cmat h = cmat::Zero(3, 3);
  h.diagonal() << 0.0, 1.0, 1.0;
  const auto groups = bohr_frequencies(HamiltonianSpec::from_matrix(h), 1e-9);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[1].omega, 0.0);
  EXPECT_EQ(groups[1].pairs.size(), 5u);  // three diagonal pairs plus (1,2), (2,1)
  EXPECT_EQ(groups[0].pairs.size(), 2u);
}

TEST(Bohr, HarmonicSpectrumSharesGaps) {
  cmat h = cmat::Zero(3, 3);
  h(1, 1) = 1.0;
  h(2, 2) = 2.0;
  const auto groups = bohr_frequencies(HamiltonianSpec::from_matrix(h), 1e-9);
  const auto one = std::find_if(groups.begin(), groups.end(), [](const BohrGroup& g) { return std::abs(g.omega - 1.0) < 1e-12; });
  ASSERT_NE(one, groups.end());
  EXPECT_EQ(one->pairs.size(), 2u);
}

TEST(Davies, QubitSpectrumMatchesClosedForm) {
  cmat h = cmat::Zero(2, 2), a = cmat::Zero(2, 2);
  h << -0.5, 0, 0, 0.5;
  a << 0, cplx(0, -1), cplx(0, 1), 0;
  const SpectralDensity sd{1.0, 1.0};
  const Liouvillian l = davies_generator(HamiltonianSpec::from_matrix(h), a, sd);
  const double two_gamma = ohmic_gamma(1.0, sd) * (1.0 + std::exp(-1.0));
  const auto values = liouvillian_eigenvalues(l);
  ASSERT_EQ(values.size(), 4u);
  EXPECT_LE(std::abs(values[0]), 1e-12);
  EXPECT_LE(std::abs(values[1] - cplx(-two_gamma / 2, -1.0)), 1e-12);
  EXPECT_LE(std::abs(values[2] - cplx(-two_gamma / 2, 1.0)), 1e-12);
  EXPECT_LE(std::abs(values[3] - cplx(-two_gamma, 0.0)), 1e-12);
}

TEST(Davies, CommutingCouplingOnlyDephases) {
  cmat h = cmat::Zero(3, 3), a = cmat::Zero(3, 3);
  h.diagonal() << 0.0, 0.4, 1.3;
  a.diagonal() << 1.0, -0.5, 0.2;
  const Liouvillian l = davies_generator(HamiltonianSpec::from_matrix(h), a, {1.0, 2.0});
  cmat diag = cmat::Zero(3, 3);
  diag.diagonal() << 0.2, 0.5, 0.3;
  EXPECT_LE(max_abs(l.apply(diag)), 1e-14);
}

TEST(Davies, SteadyStateIsGibbsOnRandomModels) {
  std::uniform_int_distribution<int> dim(2, 8);
  const double betas[] = {0.1, 1.0, 10.0};
  for (int k = 0; k < 100; ++k) {
    const Index d = dim(test::rng());
    const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(d));
    const SpectralDensity sd{0.5, betas[k % 3]};
    const Liouvillian l = davies_generator(spec, test::random_hermitian(d), sd);
    const cmat rho = steady_state(l).matrix();
    const cmat gibbs = gibbs_state(spec, sd.beta);
    Eigen::JacobiSVD<cmat> svd(rho - gibbs);
    EXPECT_LE(0.5 * svd.singularValues().sum(), 1e-8) << "d=" << d << " beta=" << sd.beta;
  }
}

TEST(Davies, RejectsNonHermitianCoupling) {
  const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(2));
  EXPECT_THROW(davies_generator(spec, test::random_matrix(2), {1.0, 1.0}), Error);
}

TEST(Davies, TraceAndHermiticityPreserved) {
  const HamiltonianSpec spec = HamiltonianSpec::from_matrix(test::random_hermitian(4));
  const Liouvillian l = davies_generator(spec, test::random_hermitian(4), {0.8, 3.0});
  for (int k = 0; k < 10; ++k) {
    const cmat out = l.apply(test::random_hermitian(4));
    EXPECT_LE(std::abs(out.trace()), 1e-12);
    EXPECT_LE(max_abs(out - out.adjoint()), 1e-10);
  }
}
