#pragma once

#include "ssprep/dopri5.hpp"
#include "ssprep/spectral.hpp"

#include <array>
#include <vector>

namespace ssprep {

// Open XY chain, H(s) = (1-s) B sum Z_i + s J sum [(1+g)/2 X_i X_{i+1} +
// (1-g)/2 Y_i Y_{i+1}], with sigma^+ / sigma^- baths on both end spins at
// rates 2 Gamma_a, a = 1..4 (site 1 +, site 1 -, site n +, site n -).
struct FermionModel {
  int n = 10;
  double B = 1.0;
  double J = 1.0;
  double gamma_aniso = 0.5;
  std::array<double, 4> rates = {0.5, 0.3, 0.1, 0.5};

  void validate() const;
  Index modes() const noexcept { return 2 * static_cast<Index>(n); }
};

// Majorana covariance C_jk = (i/2) <[w_j, w_k]>, w_{2j}, w_{2j+1} on site j
// (0-based). Antisymmetric, spectrum of iC inside [-1, 1].
class CovarianceMatrix {
 public:
  static constexpr double kAntisymmetryTol = 1e-10;
  static constexpr double kPhysicalTol = 1e-9;

  explicit CovarianceMatrix(rmat c);
  static CovarianceMatrix maximally_mixed(int n);

  const rmat& matrix() const noexcept { return c_; }
  int sites() const noexcept { return static_cast<int>(c_.rows() / 2); }

 private:
  rmat c_;
};

// dC/dt = X C + C X^T + Y.
struct AffineFlow {
  rmat X;
  rmat Y;
};

// Quadratic form h with H = (i/4) sum h_ab w_a w_b.
rmat fermion_hamiltonian_form(const FermionModel& model, double s);
AffineFlow fermion_flow(const FermionModel& model, double s);

// Solves X C + C X^T = R through the eigendecomposition of X.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const rmat& x);
  rmat solve(const rmat& r) const;
  const cvec& eigenvalues() const noexcept { return lambda_; }
  // Real matrix e^{Xt} M e^{X^T t}.
  rmat propagate(const rmat& m, double t) const;

 private:
  cvec lambda_;
  cmat p_, pinv_;
};

rmat steady_covariance(const AffineFlow& flow);

// Limit s -> 0+ of the steady covariance (the s = 0 generator has a
// degenerate steady state), by three-point extrapolation.
CovarianceMatrix fermion_adiabatic_initial(const FermionModel& model);
CovarianceMatrix fermion_steady(const FermionModel& model, double s);

// sqrt of the Uhlmann fidelity between two Gaussian states.
double gaussian_root_fidelity(const CovarianceMatrix& a, const CovarianceMatrix& b);
double bures_gaussian(const CovarianceMatrix& a, const CovarianceMatrix& b);

// Fixed generator at s = 1, starting from C0.
class FermionRelaxation {
 public:
  FermionRelaxation(const FermionModel& model, const CovarianceMatrix& c0);
  CovarianceMatrix at(double t) const;
  double bures_to_steady(double t) const;
  const CovarianceMatrix& steady() const noexcept { return steady_; }

 private:
  LyapunovSolver solver_;
  CovarianceMatrix steady_;
  rmat offset_;  // C0 - C_ss
};

// Step-doubling tolerance on the max-norm of the covariance update.
struct FermionPropagateOptions {
  double rtol = 1e-4;
  double atol = 1e-6;
  double h_initial = 1e-3;
  size_t max_steps = 2'000'000;
};

struct FermionAdiabaticRun {
  CovarianceMatrix final_state;
  size_t steps = 0;
  size_t rejected = 0;
};

// Exponential integrator with X frozen at each step midpoint, exact for the
// constant source and first order in the drift of C*(s); step doubling controls error.
FermionAdiabaticRun propagate_fermion_adiabatic(const FermionModel& model, double tau,
                                                const FermionPropagateOptions& options = {});

// Reference Runge-Kutta propagation of the covariance ODE in s with rate tau.
CovarianceMatrix propagate_fermion_covariance(const FermionModel& model, const CovarianceMatrix& c0, double tau,
                                              const StepControl& control, const std::vector<double>& samples = {},
                                              const std::function<void(double, const rmat&)>& on_sample = {});

// Single-mode rapidities x_i (eigenvalues of X); Liouvillian eigenvalues on
// the even-parity sector are the sums over even-size subsets.
cvec fermion_rapidities(const FermionModel& model, double s);
// Smallest nonzero sum of |Re x| over even subsets.
double fermion_gap_relax(const FermionModel& model);
// min |sum_S x| over nonempty even subsets S; 0 when the even-sector steady
// state is degenerate at s.
double fermion_min_modulus(const FermionModel& model, double s);
GapScan fermion_gap_adia(const FermionModel& model, const std::vector<double>& grid, int refine_rounds = 3);

// Full 2^n-dimensional representation, built from Pauli strings.
std::vector<cmat> majorana_operators(int n);
cmat fermion_full_hamiltonian(const FermionModel& model, double s);
std::vector<LindbladTerm> fermion_full_jumps(const FermionModel& model);
Liouvillian fermion_full_lindbladian(const FermionModel& model, double s);
rmat covariance_of(const cmat& rho, const std::vector<cmat>& majoranas);
cmat gaussian_density_matrix(const CovarianceMatrix& c, const std::vector<cmat>& majoranas);
// sqrt of the Uhlmann fidelity between two density matrices.
double root_fidelity(const cmat& a, const cmat& b);
double bures_distance(const cmat& a, const cmat& b);

}  // namespace ssprep
