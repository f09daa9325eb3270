#include "test_util.hpp"

#include "ssprep/fermion.hpp"
#include "ssprep/qubit.hpp"
#include "ssprep/spike.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

using namespace ssprep;
using ssprep::test::max_abs;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Random physical Majorana covariance: O (+) nu_k [[0,1],[-1,0]] O^T with O
// orthogonal and nu_k in (-0.95, 0.95).
rmat random_covariance(int n, std::mt19937_64& g) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> nu(-0.95, 0.95);
  rmat a(2 * n, 2 * n);
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) a(i, j) = nd(g);
  const rmat o = Eigen::HouseholderQR<rmat>(a).householderQ();
  rmat d = rmat::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    const double v = nu(g);
    d(2 * k, 2 * k + 1) = v;
    d(2 * k + 1, 2 * k) = -v;
  }
  return o * d * o.transpose();
}

rvec ic_spectrum(const rmat& c) {
  const cmat ic = cplx(0.0, 1.0) * c.cast<cplx>();
  return Eigen::SelfAdjointEigenSolver<cmat>(ic).eigenvalues();
}

FermionModel small_chain(int n) {
  FermionModel m;
  m.n = n;
  return m;
}

QubitModel unit_qubit(double g, double beta) {
  QubitModel m;
  m.g = g;
  m.beta = beta;
  return m;
}

}  // namespace

TEST(Fermion, FullSpaceTrajectoryOracle) {
  const FermionModel model = small_chain(4);
  const double tau = 5.0;
  std::vector<double> samples;
  for (int k = 1; k <= 10; ++k) samples.push_back(0.1 * k);
  std::vector<rmat> covariances;
  StepControl control;
  control.rtol = 1e-11;
  control.atol = 1e-13;
  propagate_fermion_covariance(model, CovarianceMatrix::maximally_mixed(4), tau, control, samples,
                               [&](double, const rmat& c) { covariances.push_back(c); });
  ASSERT_EQ(covariances.size(), samples.size());

  const Schedule full = Schedule::from_generator([&](double s) { return fermion_full_lindbladian(model, s); }, tau,
                                                 DensityMatrix::maximally_mixed(16));
  PropagateOptions opt;
  opt.sample_count = 11;
  opt.track_distance = false;
  opt.control.rtol = 1e-11;
  opt.control.atol = 1e-13;
  const Trajectory traj = propagate_adiabatic(full, opt);
  const auto majoranas = majorana_operators(4);
  size_t matched = 0;
  for (size_t k = 0; k < samples.size(); ++k) {
    const auto it = std::find_if(traj.samples.begin(), traj.samples.end(),
                                 [&](const TrajectorySample& t) { return std::abs(t.s - samples[k]) < 1e-12; });
    ASSERT_NE(it, traj.samples.end()) << "s=" << samples[k];
    const cmat from_covariance = gaussian_density_matrix(CovarianceMatrix(covariances[k]), majoranas);
    EXPECT_LE(bures_distance(from_covariance, it->rho), 1e-6) << "s=" << samples[k];
    EXPECT_LE((covariance_of(it->rho, majoranas) - covariances[k]).cwiseAbs().maxCoeff(), 1e-8);
    ++matched;
  }
  EXPECT_EQ(matched, 10u);
}

TEST(Fermion, GaussianFidelityMatchesFullSpace) {
  for (int n = 1; n <= 5; ++n) {
    const auto majoranas = majorana_operators(n);
    for (int trial = 0; trial < 4; ++trial) {
      const CovarianceMatrix a(random_covariance(n, test::rng())), b(random_covariance(n, test::rng()));
      const double full = root_fidelity(gaussian_density_matrix(a, majoranas), gaussian_density_matrix(b, majoranas));
      EXPECT_NEAR(gaussian_root_fidelity(a, b), full, 1e-8) << "n=" << n;
      EXPECT_NEAR(bures_gaussian(a, b), std::sqrt(2.0 * (1.0 - full)), 1e-7) << "n=" << n;
    }
  }
}

TEST(Fermion, GaussianReconstructionRoundTrip) {
  const auto majoranas = majorana_operators(3);
  const rmat c = random_covariance(3, test::rng());
  const cmat rho = gaussian_density_matrix(CovarianceMatrix(c), majoranas);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
  EXPECT_LE((covariance_of(rho, majoranas) - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Fermion, BuresOfIdenticalStatesIsZero) {
  const CovarianceMatrix a(random_covariance(4, test::rng()));
  EXPECT_NEAR(bures_gaussian(a, a), 0.0, 1e-7);
}

TEST(Fermion, BuresOfOrthogonalPureStatesIsRootTwo) {
  const int n = 3;
  rmat up = rmat::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    up(2 * k, 2 * k + 1) = 1.0;
    up(2 * k + 1, 2 * k) = -1.0;
  }
  EXPECT_NEAR(bures_gaussian(CovarianceMatrix(up), CovarianceMatrix(rmat(-up))), std::sqrt(2.0), 1e-9);
}

TEST(Fermion, UnphysicalCovarianceRejected) {
  rmat c = rmat::Zero(2, 2);
  c(0, 1) = 1.5;
  c(1, 0) = -1.5;
  EXPECT_THROW(CovarianceMatrix{c}, Error);
  rmat asym = rmat::Zero(2, 2);
  asym(0, 1) = 0.5;
  EXPECT_THROW(CovarianceMatrix{asym}, Error);
}

TEST(Fermion, ClosedFlowPreservesSpectrum) {
  FermionModel model = small_chain(5);
  model.rates = {0.0, 0.0, 0.0, 0.0};
  const rmat c0 = random_covariance(5, test::rng());
  StepControl control;
  control.rtol = 1e-11;
  control.atol = 1e-13;
  const CovarianceMatrix c1 = propagate_fermion_covariance(model, CovarianceMatrix(c0), 3.0, control);
  EXPECT_LE((ic_spectrum(c1.matrix()) - ic_spectrum(c0)).cwiseAbs().maxCoeff(), 1e-8);
  const AffineFlow flow = fermion_flow(model, 0.4);
  EXPECT_LE(flow.Y.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fermion, SteadyCovarianceSolvesLyapunov) {
  for (double s : {0.2, 0.5, 1.0}) {
    const AffineFlow flow = fermion_flow(small_chain(6), s);
    const rmat c = steady_covariance(flow);
    EXPECT_LE((flow.X * c + c * flow.X.transpose() + flow.Y).cwiseAbs().maxCoeff(), 1e-10) << "s=" << s;
    const LyapunovSolver solver(flow.X);
    EXPECT_LE((solver.solve(-flow.Y) - c).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Fermion, RapiditySumsAppearInFullSpectrum) {
  const FermionModel model = small_chain(2);
  for (double s : {0.3, 1.0}) {
    const cvec x = fermion_rapidities(model, s);
    const auto full = liouvillian_eigenvalues(fermion_full_lindbladian(model, s));
    for (Index i = 0; i < x.size(); ++i)
      for (Index j = i + 1; j < x.size(); ++j) {
        double best = kInf;
        for (const cplx& v : full) best = std::min(best, std::abs(v - (x(i) + x(j))));
        EXPECT_LE(best, 1e-8) << "s=" << s << " pair " << i << "," << j;
      }
  }
}

TEST(Fermion, AdiabaticRunStaysPhysical) {
  const FermionModel model = small_chain(6);
  const FermionAdiabaticRun run = propagate_fermion_adiabatic(model, 20.0);
  const rvec spec = ic_spectrum(run.final_state.matrix());
  EXPECT_LE(spec.cwiseAbs().maxCoeff(), 1.0 + 1e-9);
  EXPECT_GT(run.steps, 0u);
}

TEST(Fermion, AdiabaticInitialStateIsSmallSLimit) {
  const FermionModel model = small_chain(6);
  const CovarianceMatrix c0 = fermion_adiabatic_initial(model);
  EXPECT_LE(bures_gaussian(c0, fermion_steady(model, 1e-4)), 1e-3);
}

TEST(Fermion, RelaxationReachesSteadyState) {
  const FermionModel model = small_chain(6);
  const FermionRelaxation relax(model, CovarianceMatrix::maximally_mixed(6));
  EXPECT_LE(relax.bures_to_steady(0.0), bures_gaussian(CovarianceMatrix::maximally_mixed(6), relax.steady()) + 1e-12);
  EXPECT_LE(relax.bures_to_steady(200.0 / fermion_gap_relax(model)), 1e-8);
}

TEST(Fermion, InvalidModelRejected) {
  FermionModel m = small_chain(1);
  EXPECT_THROW(m.validate(), Error);
  m = small_chain(4);
  m.rates[2] = -0.1;
  EXPECT_THROW(m.validate(), Error);
}

TEST(Qubit, MinimumGapIsOneAtMidpoint) {
  const QubitModel m = unit_qubit(0.1, 40.0);
  EXPECT_NEAR(m.gap(0.5), 1.0, 1e-15);
  for (double s : uniform_grid(201)) EXPECT_GE(m.gap(s), 1.0 - 1e-15);
}

TEST(Qubit, AnalyticSpectrumMatchesNumerics) {
  for (double g : {0.1, 0.6}) {
    const QubitModel m = unit_qubit(g, 5.0);
    const Schedule sched = qubit_schedule(m, 1.0);
    for (double s : uniform_grid(21)) {
      const auto numeric = eig_liouvillian(sched.generator_at(s)).values;
      for (const cplx& v : qubit_analytic_spectrum(m, s).values()) {
        double best = kInf;
        for (const cplx& w : numeric) best = std::min(best, std::abs(v - w));
        EXPECT_LE(best, 1e-10) << "g=" << g << " s=" << s;
      }
    }
  }
}

TEST(Qubit, ZeroTemperatureBranchCrossingClosedForm) {
  const double expected = 1.0 / (std::pow(3.0, 0.25) * std::sqrt(std::numbers::pi));
  for (double s : {0.2, 0.5, 0.8}) {
    EXPECT_NEAR(qubit_branch_crossing(unit_qubit(0.1, kInf), s, 0.1, 1.0), expected, 1e-8) << "s=" << s;
  }
}

TEST(Spike, ProblemDiagonalAtEnd) {
  const cmat h = spike_hamiltonian({4, 1.0, 1.0}, 1.0);
  const double f[] = {0, 4, 2, 3, 4};
  for (int w = 0; w <= 4; ++w) EXPECT_NEAR(h(w, w).real(), f[w], 1e-15);
  EXPECT_LE(max_abs(h - cmat(h.diagonal().asDiagonal())), 1e-15);
}

TEST(Spike, DriverSpectrumAtStart) {
  const rvec e = HamiltonianSpec::from_matrix(spike_hamiltonian({4, 1.0, 1.0}, 0.0)).energies;
  for (int k = 0; k <= 4; ++k) EXPECT_NEAR(e(k), k, 1e-12);
}

TEST(Spike, SymmetricSubspaceMatchesFullSpace) {
  const int n = 4;
  const Index full_dim = Index{1} << n;
  cmat x = cmat::Zero(2, 2), y = cmat::Zero(2, 2);
  x << 0, 1, 1, 0;
  y << 0, cplx(0, -1), cplx(0, 1), 0;
  const auto site_op = [&](const cmat& op, int site) {
    cmat out = cmat::Identity(1, 1);
    for (int k = 0; k < n; ++k) out = kron(out, k == site ? op : cmat(cmat::Identity(2, 2)));
    return out;
  };
  cmat jx = cmat::Zero(full_dim, full_dim), jy = jx;
  for (int k = 0; k < n; ++k) {
    jx += 0.5 * site_op(x, k);
    jy += 0.5 * site_op(y, k);
  }
  // Dicke states |w>: uniform superposition of the basis states of Hamming weight w.
  cmat dicke = cmat::Zero(full_dim, n + 1);
  cmat cost = cmat::Zero(full_dim, full_dim);
  for (Index b = 0; b < full_dim; ++b) {
    const int w = std::popcount(static_cast<unsigned>(b));
    dicke(b, w) = 1.0;
    cost(b, b) = spike_cost(n, w);
  }
  for (int w = 0; w <= n; ++w) dicke.col(w).normalize();
  const cmat sym = dicke * dicke.adjoint();
  for (double s : {0.0, 0.3, 0.7, 1.0}) {
    const cmat h_full = (1.0 - s) * (0.5 * n * cmat::Identity(full_dim, full_dim) - jx) + s * cost;
    EXPECT_LE(max_abs(h_full * sym - sym * h_full), 1e-12);
    EXPECT_LE(max_abs(dicke.adjoint() * h_full * dicke - spike_hamiltonian({n, 1.0, 1.0}, s)), 1e-12) << "s=" << s;
  }
  EXPECT_LE(max_abs(dicke.adjoint() * jx * dicke - spike_jx(n)), 1e-12);
  EXPECT_LE(max_abs(dicke.adjoint() * jy * dicke - spike_jy(n)), 1e-12);
}

TEST(Spike, LiouvillianStaysInSymmetricSubspace) {
  for (int n : {4, 8, 12}) {
    const Liouvillian l = spike_schedule({n, 1.0, 1.0}, 1.0).generator_at(0.4);
    EXPECT_EQ(l.matrix.rows(), (n + 1) * (n + 1));
  }
}

TEST(Spike, SteadyStateIsGibbsAlongPath) {
  const SpikeModel model{8, 1.0, 1.0};
  const Schedule sched = spike_schedule(model, 1.0);
  for (double s : uniform_grid(11)) {
    const cmat rho = steady_state(sched.generator_at(s)).matrix();
    const cmat gibbs = gibbs_state(HamiltonianSpec::from_matrix(spike_hamiltonian(model, s)), model.beta);
    EXPECT_LE(trace_norm(rho - gibbs), 1e-8) << "s=" << s;
  }
}

namespace {

// Largest |Im| of the smallest-modulus nonzero eigenvalue over a grid in s.
// At beta = 10 the slowest escape can fall below the null tolerance, so this
// reads the raw spectrum; entry 0 is the steady state.
double max_imag_of_slowest(const SpikeModel& model) {
  const Schedule sched = spike_schedule(model, 1.0);
  double worst = 0.0;
  for (double s : uniform_grid(21)) {
    const auto values = liouvillian_eigenvalues(sched.generator_at(s));
    const auto smallest = std::min_element(values.begin() + 1, values.end(),
                                           [](const cplx& a, const cplx& b) { return std::abs(a) < std::abs(b); });
    worst = std::max(worst, std::abs(smallest->imag()));
  }
  return worst;
}

}  // namespace

TEST(Spike, SmallestModulusEigenvalueIsRealWeakCoupling) {
  for (double beta : {1.0, 10.0}) EXPECT_LE(max_imag_of_slowest({8, 0.1, beta}), 1e-9) << "beta=" << beta;
}

TEST(Spike, SmallestModulusEigenvalueIsRealUnitCoupling) {
  for (double beta : {1.0, 10.0}) EXPECT_LE(max_imag_of_slowest({8, 1.0, beta}), 1e-9) << "beta=" << beta;
}

TEST(Spike, MaximallyMixedSymmetricState) {
  const DensityMatrix rho = spike_maximally_mixed({8, 1.0, 1.0});
  EXPECT_EQ(rho.dim(), 9);
  EXPECT_LE(max_abs(rho.matrix() - cmat::Identity(9, 9) / 9.0), 1e-15);
}

TEST(Spike, SizeMustBeMultipleOfFour) {
  try {
    SpikeModel{6, 1.0, 1.0}.validate();
    FAIL() << "expected model error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::model);
  }
  EXPECT_THROW(spike_schedule({10, 1.0, 1.0}, 1.0), Error);
}

TEST(Spike, ClosedSystemAdiabaticLimit) {
  const SpikeModel model{8, 1.0, kInf};
  double previous = 1.0;
  for (double tau : {10.0, 100.0, 10000.0}) {
    const double d = spike_closed_system(model, tau).final_tnd;
    EXPECT_LT(d, previous);
    previous = d;
  }
  EXPECT_LE(previous, 1e-2);
}

TEST(Spike, ClosedSystemFollowsGroundStateAtTwenty) {
  const ClosedSpikeRun run = spike_closed_system({20, 1.0, kInf}, 759.5, 401);
  ASSERT_GE(run.ground_overlap2.size(), 400u);
  double worst = 1.0;
  for (const auto& [s, p] : run.ground_overlap2) worst = std::min(worst, p);
  EXPECT_GT(worst, 0.99);
}
