#pragma once

#include "ssprep/evolve.hpp"

#include <array>
#include <numbers>

namespace ssprep {

// H(s) = w_x (1-s) sigma^x + w_z s sigma^z with a sigma^y bath coupling.
struct QubitModel {
  double omega_x = 1.0 / std::numbers::sqrt2;
  double omega_z = 1.0 / std::numbers::sqrt2;
  double g = 0.1;
  double beta = 40.0;

  void validate() const;
  // Instantaneous gap 2 sqrt((1-s)^2 w_x^2 + s^2 w_z^2).
  double gap(double s) const;
  cmat hamiltonian(double s) const;
  SpectralDensity bath() const { return {g, beta}; }
};

cmat pauli_x();
cmat pauli_y();
cmat pauli_z();

Schedule qubit_schedule(const QubitModel& model, double tau);

struct QubitAnalyticSpectrum {
  double gamma = 0.0;  // Gamma with 2 Gamma = gamma(delta)(1 + e^{-beta delta})
  double delta = 0.0;
  cplx lambda10;       // -Gamma - i delta
  double lambda11 = 0.0;  // -2 Gamma
  std::array<cplx, 4> values() const { return {cplx(0.0), cplx(lambda11), lambda10, std::conj(lambda10)}; }
};

QubitAnalyticSpectrum qubit_analytic_spectrum(const QubitModel& model, double s);

// min_s min(|Gamma + i delta|, 2 Gamma) on the grid.
double qubit_delta_adia_analytic(const QubitModel& model, const std::vector<double>& grid);
// min_s |Gamma + i delta| on the grid.
double qubit_delta_relevant_analytic(const QubitModel& model, const std::vector<double>& grid);

// Coupling g at which |lambda_10| = |lambda_11| at fixed s, located from
// numerically diagonalized generators by bisection on [g_lo, g_hi].
double qubit_branch_crossing(QubitModel model, double s, double g_lo, double g_hi, double g_tol = 1e-10);

}  // namespace ssprep
