#pragma once

#include "ssprep/evolve.hpp"
#include "ssprep/fermion.hpp"

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ssprep {

enum class TTSSMethod { adiabatic, relaxation, instantaneous_adiabatic };
std::string_view to_string(TTSSMethod m) noexcept;

enum TTSSFlag : unsigned {
  kFlagNone = 0,
  kFlagNonMonotone = 1u << 0,       // distance rose while bracketing
  kFlagAlreadyConverged = 1u << 1,  // the first probe already met the target
  kFlagResidual = 1u << 2,          // root residual above 1e-3 epsilon
};
std::string flag_names(unsigned flags);

struct TTSSRecord {
  TTSSMethod method = TTSSMethod::relaxation;
  double epsilon = 0.0;
  double tau = 0.0;
  int iterations = 0;     // distance evaluations
  double residual = 0.0;  // |distance(tau) - epsilon|
  unsigned flags = kFlagNone;
};

struct TTSSOptions {
  double rel_tol = 1e-4;          // bracket width relative to tau
  double residual_fraction = 1e-4;  // early stop once |d - eps| <= this * eps
  double accept_fraction = 1e-3;  // larger final residuals are flagged
  int max_iterations = 200;
  double t_probe = 0.0;  // 0 selects 1 / ||L||
  double t_max = 0.0;    // 0 selects 1e8 / Delta_relax
};

// First down-crossing of distance(t) = epsilon: doubling from t_probe, then
// Illinois regula falsi on ln d - ln eps against ln t.
TTSSRecord solve_ttss(const std::function<double(double)>& distance, double epsilon, double t_probe, double t_max,
                      TTSSMethod method, const TTSSOptions& options = {});

TTSSRecord ttss_relax(const Liouvillian& l, const DensityMatrix& rho0, const cmat& target, double epsilon,
                      const TTSSOptions& options = {});
TTSSRecord ttss_relax(const Liouvillian& l, const DensityMatrix& rho0, double epsilon,
                      const TTSSOptions& options = {});

// Final-state criterion: TND(rho_adia(tau), rho_SS(1)) <= epsilon.
TTSSRecord ttss_adia(const Schedule& schedule, double epsilon, const TTSSOptions& options = {},
                     const PropagateOptions& propagate = {});
// Path criterion: max_s TND(rho(s), rho_SS(s)) <= epsilon over the dense samples.
TTSSRecord ttss_instantaneous(const Schedule& schedule, double epsilon, const TTSSOptions& options = {},
                              PropagateOptions propagate = {});

// Fermion chain with the Bures distance; relaxation starts from the totally
// mixed state, adiabatic preparation from the s -> 0+ steady state.
TTSSRecord ttss_fermion_relax(const FermionModel& model, double epsilon, const TTSSOptions& options = {});
TTSSRecord ttss_fermion_adia(const FermionModel& model, double epsilon, const TTSSOptions& options = {},
                             const FermionPropagateOptions& propagate = {});

// ln(A / eps) / Delta_relax.
double estimate_relax(double delta_relax, double prefactor, double epsilon);
// B / eps.
double estimate_adia(double b, double epsilon);

enum class EstimateKind { relax_estimate, adia_estimate, power_law_fit };

struct ScalingEstimate {
  double prefactor = 0.0;
  double exponent = 0.0;
  double r_squared = 0.0;
  EstimateKind kind = EstimateKind::power_law_fit;
  size_t points = 0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  size_t points = 0;
};

LinearFit fit_linear(const std::vector<double>& xs, const std::vector<double>& ys);
// y = prefactor * x^exponent by least squares on (ln x, ln y).
ScalingEstimate fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace ssprep
