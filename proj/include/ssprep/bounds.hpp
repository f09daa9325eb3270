#pragma once

#include "ssprep/evolve.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ssprep {

// S = (L + P0)^{-1} - P0 with P0 = |rho_SS>><<1|, so that S L = L S = Q0 and
// S P0 = P0 S = 0. Works per structural block of L + P0 in the generator frame.
class ReducedResolvent {
 public:
  explicit ReducedResolvent(const Liouvillian& l);
  // steady: the known steady state (computational basis).
  ReducedResolvent(const Liouvillian& l, const cmat& steady);

  // S[x] for a computational-basis operator x.
  cmat apply(const cmat& x) const;
  // Dense S and P0 acting on vectorized operators in the generator frame.
  cmat matrix() const;
  const cmat& projector() const noexcept { return p0_; }
  const Liouvillian& generator() const noexcept { return l_; }

 private:
  struct Block {
    std::vector<Index> index;
    Eigen::PartialPivLU<cmat> lu;
  };
  Liouvillian l_;
  cvec steady_;  // vec of rho_SS in the frame
  cvec unit_;    // vec of the identity in the frame
  cmat p0_;
  std::vector<Block> blocks_;
};

struct AdiabaticBound {
  double boundary0 = 0.0;  // ||S(0) rho'(0)||_1
  double boundary1 = 0.0;  // ||S(1) rho'(1)||_1
  double integral = 0.0;   // int_0^1 ||(S rho')'||_1 ds
  double max_integrand = 0.0;
  std::vector<double> s;
  std::vector<double> integrand;

  double total() const noexcept { return boundary0 + boundary1 + integral; }
};

// B for a schedule: boundary terms plus the composite Simpson integral over a
// uniform odd-sized grid. (S rho')' is the central difference of S(s) rho'(s);
// the schedule is evaluated up to 2 fd_step outside [0, 1]. A Richardson
// check at interior points throws Errc::derivative when the difference
// quotients neither agree to 1e-6 nor converge at second order within 20%.
AdiabaticBound adiabatic_B(const Schedule& schedule, const std::vector<double>& s_grid, double fd_step = 1e-4);

// Hamiltonian path with a Davies bath; used for the zero-temperature formulas.
struct DaviesPath {
  std::function<cmat(double)> hamiltonian;
  cmat coupling;
  SpectralDensity bath;
};

// Davies eigenvalues of the coherences |l><0|, l = 1..d-1 (entry 0 is 0):
// -i Delta_l0 - (Gamma_l + Gamma_0)/2 - gamma(0) |A_ll - A_00|^2 / 2.
// Exact when every Bohr frequency E_l - E_0 is non-degenerate.
cvec coherence_eigenvalues(const HamiltonianSpec& spec, const cmat& coupling, const SpectralDensity& bath);

struct SrhopNorm {
  double full = 0.0;     // 2 sqrt(sum_l |H'_l0 / (Delta_l0 lambda_l0)|^2)
  double leading = 0.0;  // 2 |H'_k0 / (Delta_k0 lambda_k0)| at the dominant k
  Index argmax = 1;
  bool argmax_not_first = false;  // the dominant level is not l = 1
};

// hprime in the computational basis; lambda as from coherence_eigenvalues.
SrhopNorm zero_T_srhop_norm(const HamiltonianSpec& spec, const cmat& hprime, const cvec& lambda);

// Leading-term epsilon(s) with l = 1.
double zero_T_eps(const HamiltonianSpec& spec, const cmat& hprime, cplx lambda10);

struct ZeroTExactInput {
  HamiltonianSpec spec;
  cmat hprime;   // computational basis
  cmat hpp;      // computational basis
  cvec lambda;   // lambda_l0
  cvec dlambda;  // d lambda_l0 / ds
};

struct ZeroTExact {
  double value = 0.0;
  bool ill_conditioned = false;  // some |Delta_lm| < 1e-12 ||H||, l != m > 0
};

// Trace norm of the rank-four operator d/ds (S rho')|_{T=0}
// = A|0><0| + |xi><eta| + |eta><xi| + |phi><0| + |0><phi|.
ZeroTExact zero_T_error_exact(const ZeroTExactInput& in);

// T^-2 exp(-delta_min / T); zero at T = 0.
double finite_T_correction(double delta_min, double temperature);

struct ZeroTBoundReport {
  std::vector<double> s;
  std::vector<double> eps_leading;
  std::vector<double> eps_exact;
  double B_int = 0.0;        // Simpson integral of eps_leading
  double B_int_exact = 0.0;  // Simpson integral of eps_exact
  double B_max = 0.0;        // max of eps_leading
  double boundary0 = 0.0;    // zero-T ||S rho'||_1 at s = 0
  double boundary1 = 0.0;    // and at s = 1
  double finite_T_scale = 0.0;
  bool argmax_not_first = false;
  bool ill_conditioned = false;

  std::string csv() const;
  std::string summary_json() const;
};

ZeroTBoundReport zero_T_bound(const DaviesPath& path, const std::vector<double>& s_grid, double fd_step = 1e-4);

double simpson(const std::vector<double>& s, const std::vector<double>& f);

}  // namespace ssprep
