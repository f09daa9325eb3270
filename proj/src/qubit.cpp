#include "ssprep/qubit.hpp"

#include <cmath>

namespace ssprep {

cmat pauli_x() {
  cmat m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

cmat pauli_y() {
  cmat m(2, 2);
  m << 0.0, -I1, I1, 0.0;
  return m;
}

cmat pauli_z() {
  cmat m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

void QubitModel::validate() const {
  if (!(omega_x > 0.0) || !(omega_z > 0.0)) throw Error(Errc::model, "qubit energies must be positive");
  if (!(beta > 0.0)) throw Error(Errc::model, "inverse temperature must be positive");
}

double QubitModel::gap(double s) const {
  return 2.0 * std::hypot((1.0 - s) * omega_x, s * omega_z);
}

cmat QubitModel::hamiltonian(double s) const {
  return omega_x * (1.0 - s) * pauli_x() + omega_z * s * pauli_z();
}

Schedule qubit_schedule(const QubitModel& model, double tau) {
  model.validate();
  return Schedule::davies([model](double s) { return HamiltonianSpec::from_matrix(model.hamiltonian(s)); },
                          pauli_y(), model.bath(), tau);
}

QubitAnalyticSpectrum qubit_analytic_spectrum(const QubitModel& model, double s) {
  model.validate();
  QubitAnalyticSpectrum r;
  r.delta = model.gap(s);
  r.gamma = 0.5 * ohmic_gamma(r.delta, model.bath()) * (1.0 + std::exp(-model.beta * r.delta));
  r.lambda10 = cplx(-r.gamma, -r.delta);
  r.lambda11 = -2.0 * r.gamma;
  return r;
}

double qubit_delta_adia_analytic(const QubitModel& model, const std::vector<double>& grid) {
  double best = std::numeric_limits<double>::infinity();
  for (double s : grid) {
    const auto a = qubit_analytic_spectrum(model, s);
    best = std::min({best, std::abs(a.lambda10), std::abs(a.lambda11)});
  }
  return best;
}

double qubit_delta_relevant_analytic(const QubitModel& model, const std::vector<double>& grid) {
  double best = std::numeric_limits<double>::infinity();
  for (double s : grid) best = std::min(best, std::abs(qubit_analytic_spectrum(model, s).lambda10));
  return best;
}

namespace {

// |lambda_10| - |lambda_11| from the numerical spectrum: the real nonzero
// eigenvalue is the population branch, the complex pair the coherence branch.
double branch_difference(const QubitModel& m, double s) {
  const Liouvillian l = davies_generator(HamiltonianSpec::from_matrix(m.hamiltonian(s)), pauli_y(), m.bath());
  const LiouvillianSpectrum spec = eig_liouvillian(l);
  double coherence = 0.0, population = 0.0;
  for (size_t j = 1; j < spec.size(); ++j) {
    if (std::abs(spec.sigma(j)) > spec.null_tol)
      coherence = std::abs(spec.values[j]);
    else
      population = std::abs(spec.values[j]);
  }
  return coherence - population;
}

}  // namespace

double qubit_branch_crossing(QubitModel model, double s, double g_lo, double g_hi, double g_tol) {
  auto f = [&](double g) {
    model.g = g;
    return branch_difference(model, s);
  };
  double flo = f(g_lo), fhi = f(g_hi);
  if (flo * fhi > 0.0) throw Error(Errc::parameter, "coupling interval does not bracket the branch crossing");
  while (g_hi - g_lo > g_tol) {
    const double mid = 0.5 * (g_lo + g_hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      g_lo = mid;
      flo = fm;
    } else {
      g_hi = mid;
    }
  }
  return 0.5 * (g_lo + g_hi);
}

}  // namespace ssprep
