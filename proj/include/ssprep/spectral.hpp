#pragma once

#include "ssprep/superop.hpp"

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ssprep {

// Eigenvalues lambda_j = -eta_j + i sigma_j sorted by eta, then |sigma|, then
// phase; index 0 is the steady state. Eigenvectors (possibly absent) are
// columns in the frame of the generator they came from.
struct LiouvillianSpectrum {
  std::vector<cplx> values;
  cmat vectors;
  cmat frame;
  double null_tol = 0.0;
  double condition = 1.0;
  bool defective = false;

  double eta(size_t j) const { return -values[j].real(); }
  double sigma(size_t j) const { return values[j].imag(); }
  size_t size() const noexcept { return values.size(); }
};

inline constexpr double kDefectiveCondition = 1e8;

// null_tol <= 0 selects 1e-10 * ||L||_inf.
LiouvillianSpectrum eig_liouvillian(const Liouvillian& l, double null_tol = -1.0);

// Sorts eigenvalues (and matching vector columns) and validates that exactly
// one lies within null_tol of zero, moving it to the front.
LiouvillianSpectrum order_spectrum(std::vector<cplx> values, cmat vectors, double null_tol);

DensityMatrix steady_state(const Liouvillian& l, double null_tol = -1.0);

// All eigenvalues in the same order, without the unique-steady-state check
// (e.g. for purely coherent generators).
std::vector<cplx> liouvillian_eigenvalues(const Liouvillian& l);

double gap_relax(const LiouvillianSpectrum& spec);
double gap_relax(const Liouvillian& l);

// Smallest |lambda_j|, j > 0.
double min_modulus(const LiouvillianSpectrum& spec);

using SpectrumAt = std::function<LiouvillianSpectrum(double)>;

struct GapScan {
  double value = 0.0;
  double argmin = 0.0;
  size_t evaluations = 0;
  size_t grid_points = 0;
  double resolution = 0.0;  // spacing around the argmin after refinement
};

std::vector<double> uniform_grid(size_t points = 201);

// Minimizes a nonnegative function of s on the grid, then bisects around the
// argmin for the given number of rounds.
GapScan minimize_on_grid(const std::function<double(double)>& f, const std::vector<double>& grid,
                         int refine_rounds = 3);

// min over s and j > 0 of |lambda_j(s)|. A degenerate steady state at some s
// is reported as gap 0 at that s.
GapScan gap_adia(const SpectrumAt& spectrum_at, const std::vector<double>& grid, int refine_rounds = 3);

// Tracks the eigenvalue whose eigenvector is the vectorized |1><0| coherence
// of the instantaneous Hamiltonian eigenbasis.
struct CoherenceBranch {
  std::vector<double> s;
  std::vector<cplx> lambda;
  std::vector<double> overlap;
};

using GeneratorAt = std::function<Liouvillian(double)>;
using HamiltonianAt = std::function<HamiltonianSpec(double)>;

CoherenceBranch track_coherence(const GeneratorAt& generator_at, const HamiltonianAt& hamiltonian_at,
                                const std::vector<double>& grid);

GapScan gap_relevant(const GeneratorAt& generator_at, const HamiltonianAt& hamiltonian_at,
                     const std::vector<double>& grid, int refine_rounds = 3);

struct GapReport {
  double delta_adia = 0.0;
  double delta_relax = 0.0;
  double delta_relevant = 0.0;
  double argmin_s_adia = 0.0;
  double argmin_s_relevant = 0.0;
  double sigma1_final = 0.0;
  size_t grid_points = 0;
  double grid_resolution = 0.0;

  nlohmann::json to_json() const;
};

struct Claim1Result {
  bool holds = true;
  double sigma1_final = 0.0;
  double delta_adia = 0.0;
  double delta_relax = 0.0;
  std::string detail;
};

// False only when sigma_1(1) = 0 and delta_adia exceeds delta_relax by more
// than 1e-9.
Claim1Result claim1_check(const LiouvillianSpectrum& final_spectrum, const GapReport& report);

struct RescaleScan {
  std::vector<double> alphas;
  std::vector<std::vector<cplx>> spectra;
  std::vector<bool> min_on_real_branch;  // smallest nonzero |lambda| has sigma = 0
  double alpha_star = -1.0;              // first alpha where that switches on; -1 if never
  double commutator_norm = 0.0;
  bool commute = true;
};

RescaleScan rescale_scan(const Liouvillian& coherent, const Liouvillian& dissipative,
                         const std::vector<double>& alphas);

}  // namespace ssprep
