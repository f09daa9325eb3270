#pragma once

#include "ssprep/dopri5.hpp"
#include "ssprep/spectral.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ssprep {

// Generator family L(s), s = t/tau in [0, 1]. Davies-built schedules carry
// the Hamiltonian path, which enables fast matrix-free application, the Gibbs
// steady state and the implicit integrator.
class Schedule {
 public:
  using HamiltonianPath = std::function<HamiltonianSpec(double)>;

  static Schedule from_generator(GeneratorAt generator_at, double tau, DensityMatrix initial_state);
  static Schedule constant(Liouvillian l, double tau, DensityMatrix initial_state);
  // Initial state defaults to the Gibbs state at s = 0.
  static Schedule davies(HamiltonianPath hamiltonian_at, cmat coupling, SpectralDensity bath, double tau,
                         std::optional<DensityMatrix> initial_state = std::nullopt);

  double tau() const noexcept { return tau_; }
  const DensityMatrix& initial_state() const noexcept { return initial_; }
  bool is_davies() const noexcept { return static_cast<bool>(hamiltonian_at_); }

  Schedule with_tau(double tau) const;
  Schedule with_initial_state(DensityMatrix rho) const;

  Liouvillian generator_at(double s) const;
  HamiltonianSpec hamiltonian_at(double s) const;  // Errc::model unless Davies-built
  DaviesGenerator davies_at(double s) const;       // Errc::model unless Davies-built
  const cmat& coupling() const noexcept { return coupling_; }
  const SpectralDensity& bath() const noexcept { return bath_; }

  // L(s)[rho] in the computational basis.
  cmat apply(double s, const cmat& rho) const;
  // Instantaneous steady state: Gibbs for Davies schedules, null vector otherwise.
  cmat steady_at(double s) const;
  Index dim() const noexcept { return initial_.dim(); }

 private:
  Schedule(double tau, DensityMatrix initial) : tau_(tau), initial_(std::move(initial)) {}

  double tau_;
  DensityMatrix initial_;
  GeneratorAt generator_at_;
  HamiltonianPath hamiltonian_at_;
  cmat coupling_;
  SpectralDensity bath_;
};

// Delta_adia over the grid, Delta_relax and sigma_1 at s = 1, and for
// Davies schedules Delta_relevant along the |1><0| coherence branch.
GapReport gap_report(const Schedule& schedule, const std::vector<double>& grid, int refine_rounds = 3);

double trace_norm_distance(const cmat& a, const cmat& b);
inline double trace_norm_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_norm_distance(a.matrix(), b.matrix());
}

struct TrajectorySample {
  double s = 0.0;
  cmat rho;  // Hermitized, not renormalized
  double tnd_to_instantaneous_ss = 0.0;
  double trace_error = 0.0;
  double min_eigenvalue = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  cmat final_rho;
  IntegrationStats stats;

  DensityMatrix final_state() const;
  double max_tnd() const;
  std::string csv() const;
};

enum class Integrator { automatic, dopri5, radau5 };

struct PropagateOptions {
  StepControl control{};
  size_t sample_count = 401;
  bool track_distance = true;
  Integrator method = Integrator::automatic;
};

// Solves d rho/ds = tau L(s)[rho] on [0, 1].
Trajectory propagate_adiabatic(const Schedule& schedule, const PropagateOptions& options = {});

// e^{tL}[rho0] by Pade scaling and squaring.
DensityMatrix propagate_relax(const Liouvillian& l, const DensityMatrix& rho0, double t);

// Spectral form of e^{tL}, factored once and reused across times. Works per
// structural block of the generator.
class RelaxPropagator {
 public:
  explicit RelaxPropagator(const Liouvillian& l);
  cmat apply(double t, const cmat& rho0) const;
  double condition() const noexcept { return condition_; }

 private:
  struct Block {
    std::vector<Index> index;
    cvec values;
    cmat vectors;
    cmat inverse;
  };
  Liouvillian l_;
  std::vector<Block> blocks_;
  double condition_ = 1.0;
};

enum class EnvelopeVariant { chi2, log_sobolev };

// chi2: sqrt(||rho_ss^-1||) e^{-t Delta_relax}; log-Sobolev:
// sqrt(2 ln ||rho_ss^-1||) e^{-t alpha}, alpha <= Delta_relax. Operator norm.
double relax_bound_envelope(const Liouvillian& l, double t, EnvelopeVariant variant = EnvelopeVariant::chi2,
                            double alpha = 0.0);

}  // namespace ssprep
