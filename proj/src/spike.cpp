#include "ssprep/spike.hpp"

#include <cmath>

namespace ssprep {

void SpikeModel::validate() const {
  if (n < 4 || n % 4 != 0) throw Error(Errc::model, "spike size must be a positive multiple of 4");
  if (!(beta > 0.0)) throw Error(Errc::model, "inverse temperature must be positive");
}

double spike_cost(int n, int w) { return 4 * w == n ? static_cast<double>(n) : static_cast<double>(w); }

namespace {

// J_+ in the Hamming basis: <m+1|J_+|m> = sqrt(J(J+1) - m(m+1)); m + 1 is w - 1.
cmat raising(int n) {
  const Index d = n + 1;
  const double j = 0.5 * n;
  cmat p = cmat::Zero(d, d);
  for (int w = 1; w <= n; ++w) {
    const double m = j - w;
    p(w - 1, w) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  return p;
}

}  // namespace

cmat spike_jx(int n) {
  const cmat p = raising(n);
  return 0.5 * (p + p.adjoint());
}

cmat spike_jy(int n) {
  const cmat p = raising(n);
  return (p - p.adjoint()) / (2.0 * I1);
}

cmat spike_hamiltonian(const SpikeModel& model, double s) {
  model.validate();
  const Index d = model.dim();
  cmat driver = 0.5 * model.n * cmat::Identity(d, d) - spike_jx(model.n);
  cmat problem = cmat::Zero(d, d);
  for (int w = 0; w <= model.n; ++w) problem(w, w) = spike_cost(model.n, w);
  return (1.0 - s) * driver + s * problem;
}

Schedule spike_schedule(const SpikeModel& model, double tau) {
  model.validate();
  return Schedule::davies([model](double s) { return HamiltonianSpec::from_matrix(spike_hamiltonian(model, s)); },
                          spike_jy(model.n), model.bath(), tau);
}

DensityMatrix spike_maximally_mixed(const SpikeModel& model) {
  model.validate();
  return DensityMatrix::maximally_mixed(model.dim());
}

ClosedSpikeRun spike_closed_system(const SpikeModel& model, double tau, size_t samples, double rtol) {
  model.validate();
  if (!(tau >= 0.0)) throw Error(Errc::parameter, "tau must be nonnegative");
  const cmat h0 = 0.5 * model.n * cmat::Identity(model.dim(), model.dim()) - spike_jx(model.n);
  cmat problem = cmat::Zero(model.dim(), model.dim());
  for (int w = 0; w <= model.n; ++w) problem(w, w) = spike_cost(model.n, w);
  auto h_at = [&](double s) -> cmat { return (1.0 - s) * h0 + s * problem; };
  auto ground = [&](double s) -> cvec {
    Eigen::SelfAdjointEigenSolver<cmat> es(h_at(s));
    return es.eigenvectors().col(0);
  };

  ClosedSpikeRun run;
  std::vector<double> grid;
  if (samples >= 2) grid = uniform_grid(samples);
  std::function<cvec(double, const cvec&)> f = [&](double s, const cvec& psi) -> cvec {
    return -I1 * tau * (h_at(s) * psi);
  };
  std::function<void(double, const cvec&)> on_sample = [&](double s, const cvec& psi) {
    run.ground_overlap2.emplace_back(s, std::norm(ground(s).dot(psi)) / psi.squaredNorm());
  };
  StepControl ctl;
  ctl.rtol = rtol;
  ctl.atol = rtol * 1e-3;
  const cvec psi = integrate_dopri5<cvec>(f, 0.0, 1.0, ground(0.0), ctl, grid, on_sample, nullptr);
  const double p = std::norm(ground(1.0).dot(psi)) / psi.squaredNorm();
  // Pure states: half trace norm of the difference is sqrt(1 - overlap^2).
  run.final_tnd = std::sqrt(std::max(0.0, 1.0 - p));
  return run;
}

}  // namespace ssprep
