#pragma once

#include "ssprep/core.hpp"

#include <limits>
#include <utility>
#include <vector>

namespace ssprep {

// Column stacking: element (r, c) of a d x d matrix lands at r + c*d.
cvec vectorize(const cmat& m);
cmat devectorize(const cvec& v);

// Superoperator on vectorized operators. The matrix acts on vec(F^dag rho F)
// and returns vec(F^dag L[rho] F) for the unitary frame F; an empty frame
// means the computational basis.
struct Liouvillian {
  cmat matrix;
  Index dim = 0;
  cmat frame;

  cmat to_frame(const cmat& rho) const;
  cmat from_frame(const cmat& rho_frame) const;
  cmat apply(const cmat& rho) const;
  // Same superoperator written in the computational basis.
  cmat computational() const;
  // Connected components of the nonzero pattern (structurally decoupled
  // sectors), each sorted ascending; components ordered by first index.
  std::vector<std::vector<Index>> blocks() const;
};

struct LindbladTerm {
  cmat op;
  double rate = 1.0;
};

Liouvillian build_lindbladian(const cmat& h, const std::vector<LindbladTerm>& terms);

struct SpectralDensity {
  double g = 1.0;
  double beta = 1.0;  // +inf allowed: zero temperature
};

// Ohmic rate 2 pi g^2 w / (1 - exp(-beta w)), analytic limit at w = 0.
double ohmic_gamma(double omega, const SpectralDensity& sd);

struct HamiltonianSpec {
  rvec energies;  // ascending
  cmat vectors;   // columns are eigenvectors
  cmat matrix;

  static HamiltonianSpec from_matrix(const cmat& h);
  Index dim() const noexcept { return energies.size(); }
  // 1e-9 * ||H||_inf, floored so that a zero Hamiltonian still groups.
  double default_tolerance() const;
};

// Pairs (l, m) with E_l - E_m = omega within tolerance.
struct BohrGroup {
  double omega = 0.0;
  std::vector<std::pair<Index, Index>> pairs;
};

std::vector<BohrGroup> bohr_frequencies(const HamiltonianSpec& spec, double tol);

// Davies generator with zero Lamb shift, kept in the Hamiltonian eigenbasis.
class DaviesGenerator {
 public:
  // tol < 0 selects spec.default_tolerance().
  DaviesGenerator(HamiltonianSpec spec, const cmat& coupling, SpectralDensity sd, double tol = -1.0);

  const HamiltonianSpec& hamiltonian() const noexcept { return spec_; }
  const std::vector<BohrGroup>& groups() const noexcept { return groups_; }
  const SpectralDensity& bath() const noexcept { return sd_; }
  // Coupling operator in the eigenbasis.
  const cmat& coupling_frame() const noexcept { return a_; }

  cmat apply_frame(const cmat& rho_frame) const;
  cmat apply(const cmat& rho) const;
  Liouvillian liouvillian() const;
  // Gibbs state exp(-beta H)/Z (ground-space projector at beta = inf).
  cmat gibbs_state() const;

 private:
  struct Jump {
    Index l, m;
    cplx amp;
  };
  struct Channel {
    double rate;
    std::vector<Jump> jumps;
  };

  HamiltonianSpec spec_;
  SpectralDensity sd_;
  cmat a_;
  std::vector<BohrGroup> groups_;
  std::vector<Channel> channels_;
  cmat k_;  // sum_w gamma(w) L_w^dag L_w in the eigenbasis
};

Liouvillian davies_generator(const HamiltonianSpec& spec, const cmat& coupling, const SpectralDensity& sd,
                             double tol = -1.0);

cmat gibbs_state(const HamiltonianSpec& spec, double beta);

}  // namespace ssprep
