#pragma once

#include "ssprep/evolve.hpp"

#include <utility>
#include <vector>

namespace ssprep {

// n qubits restricted to the symmetric subspace, basis |w>, w = Hamming weight
// 0..n, spin projection m = n/2 - w.
struct SpikeModel {
  int n = 8;
  double g = 1.0;
  double beta = 1.0;

  void validate() const;  // Errc::model unless n is a positive multiple of 4
  Index dim() const noexcept { return n + 1; }
  SpectralDensity bath() const { return {g, beta}; }
};

// Cost f(w) = n at w = n/4, otherwise w.
double spike_cost(int n, int w);
cmat spike_jx(int n);
cmat spike_jy(int n);
cmat spike_hamiltonian(const SpikeModel& model, double s);

// Davies schedule with A = J_y, starting from the Gibbs state at s = 0.
Schedule spike_schedule(const SpikeModel& model, double tau);
DensityMatrix spike_maximally_mixed(const SpikeModel& model);

struct ClosedSpikeRun {
  double final_tnd = 0.0;  // to the final ground state
  std::vector<std::pair<double, double>> ground_overlap2;  // (s, |<E0(s)|psi>|^2)
};

// Schroedinger evolution from the s = 0 ground state.
ClosedSpikeRun spike_closed_system(const SpikeModel& model, double tau, size_t samples = 0, double rtol = 1e-10);

}  // namespace ssprep
