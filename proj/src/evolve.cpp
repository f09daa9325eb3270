#include "ssprep/evolve.hpp"
#include "ssprep/expm.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace ssprep {

Schedule Schedule::from_generator(GeneratorAt generator_at, double tau, DensityMatrix initial_state) {
  if (!(tau >= 0.0)) throw Error(Errc::parameter, "tau must be nonnegative");
  Schedule s(tau, std::move(initial_state));
  s.generator_at_ = std::move(generator_at);
  return s;
}

Schedule Schedule::constant(Liouvillian l, double tau, DensityMatrix initial_state) {
  return from_generator([l = std::move(l)](double) { return l; }, tau, std::move(initial_state));
}

Schedule Schedule::davies(HamiltonianPath hamiltonian_at, cmat coupling, SpectralDensity bath, double tau,
                          std::optional<DensityMatrix> initial_state) {
  if (!(tau >= 0.0)) throw Error(Errc::parameter, "tau must be nonnegative");
  DensityMatrix rho0 = initial_state ? *initial_state
                                     : DensityMatrix::normalized(gibbs_state(hamiltonian_at(0.0), bath.beta));
  Schedule s(tau, std::move(rho0));
  s.hamiltonian_at_ = std::move(hamiltonian_at);
  s.coupling_ = std::move(coupling);
  s.bath_ = bath;
  return s;
}

Schedule Schedule::with_tau(double tau) const {
  if (!(tau >= 0.0)) throw Error(Errc::parameter, "tau must be nonnegative");
  Schedule s = *this;
  s.tau_ = tau;
  return s;
}

Schedule Schedule::with_initial_state(DensityMatrix rho) const {
  if (rho.dim() != dim()) throw Error(Errc::dimension, "initial state dimension mismatch");
  Schedule s = *this;
  s.initial_ = std::move(rho);
  return s;
}

HamiltonianSpec Schedule::hamiltonian_at(double s) const {
  if (!is_davies()) throw Error(Errc::model, "schedule has no Hamiltonian path");
  return hamiltonian_at_(s);
}

DaviesGenerator Schedule::davies_at(double s) const {
  return DaviesGenerator(hamiltonian_at(s), coupling_, bath_);
}

Liouvillian Schedule::generator_at(double s) const {
  if (is_davies()) return davies_at(s).liouvillian();
  return generator_at_(s);
}

cmat Schedule::apply(double s, const cmat& rho) const {
  if (is_davies()) return davies_at(s).apply(rho);
  return generator_at_(s).apply(rho);
}

cmat Schedule::steady_at(double s) const {
  if (is_davies()) return gibbs_state(hamiltonian_at(s), bath_.beta);
  return steady_state(generator_at_(s)).matrix();
}

GapReport gap_report(const Schedule& schedule, const std::vector<double>& grid, int refine_rounds) {
  GapReport r;
  const GapScan adia =
      gap_adia([&](double s) { return eig_liouvillian(schedule.generator_at(s)); }, grid, refine_rounds);
  r.delta_adia = adia.value;
  r.argmin_s_adia = adia.argmin;
  r.grid_points = grid.size();
  r.grid_resolution = adia.resolution;
  const LiouvillianSpectrum final_spec = eig_liouvillian(schedule.generator_at(1.0));
  r.delta_relax = gap_relax(final_spec);
  r.sigma1_final = final_spec.size() > 1 ? final_spec.sigma(1) : 0.0;
  if (schedule.is_davies()) {
    const GapScan rel = gap_relevant([&](double s) { return schedule.generator_at(s); },
                                     [&](double s) { return schedule.hamiltonian_at(s); }, grid, refine_rounds);
    r.delta_relevant = rel.value;
    r.argmin_s_relevant = rel.argmin;
  }
  return r;
}

double trace_norm_distance(const cmat& a, const cmat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(Errc::dimension, "state dimension mismatch");
  return 0.5 * trace_norm(a - b);
}

DensityMatrix Trajectory::final_state() const { return DensityMatrix::normalized(final_rho, 1e-8); }

double Trajectory::max_tnd() const {
  double m = 0.0;
  for (const auto& p : samples) m = std::max(m, p.tnd_to_instantaneous_ss);
  return m;
}

std::string Trajectory::csv() const {
  std::ostringstream os;
  os << "s,tnd_to_instantaneous_ss,trace_error,min_eigenvalue\n";
  for (const auto& p : samples)
    os << fmt::format("{:.10g},{:.10g},{:.3e},{:.6e}\n", p.s, p.tnd_to_instantaneous_ss, p.trace_error,
                      p.min_eigenvalue);
  return os.str();
}

namespace {

std::vector<double> sample_grid(size_t count) {
  if (count == 0) return {};
  if (count == 1) return {1.0};
  return uniform_grid(count);
}

// Radau IIA (three stages, order five) coefficients with A^{-1} = T diag(l) T^{-1}.
struct RadauTableau {
  std::array<double, 3> c{};
  std::array<cplx, 3> lambda{};
  Eigen::Matrix3cd t, ti;
  double u1 = 0.0;  // real eigenvalue of A^{-1}
  std::array<double, 3> dd{};
};

const RadauTableau& radau_tableau() {
  static const RadauTableau tab = [] {
    RadauTableau r;
    const double q = std::sqrt(6.0);
    r.c = {(4.0 - q) / 10.0, (4.0 + q) / 10.0, 1.0};
    Eigen::Matrix3d a;
    a << (88.0 - 7.0 * q) / 360.0, (296.0 - 169.0 * q) / 1800.0, (-2.0 + 3.0 * q) / 225.0,
        (296.0 + 169.0 * q) / 1800.0, (88.0 + 7.0 * q) / 360.0, (-2.0 - 3.0 * q) / 225.0, (16.0 - q) / 36.0,
        (16.0 + q) / 36.0, 1.0 / 9.0;
    Eigen::EigenSolver<Eigen::Matrix3d> es(a.inverse());
    r.t = es.eigenvectors();
    r.ti = r.t.inverse();
    for (int k = 0; k < 3; ++k) {
      r.lambda[k] = es.eigenvalues()(k);
      if (std::abs(r.lambda[k].imag()) < 1e-12) r.u1 = r.lambda[k].real();
    }
    r.dd = {-(13.0 + 7.0 * q) / 3.0, (-13.0 + 7.0 * q) / 3.0, -1.0 / 3.0};
    return r;
  }();
  return tab;
}

// Solves (mu - tau L) x = r for a few shifts mu, using the block structure of
// the Davies generator in its eigenframe.
class ShiftedSolver {
 public:
  ShiftedSolver(const DaviesGenerator& g, double tau, const std::vector<cplx>& shifts) {
    const Liouvillian l = g.liouvillian();
    frame_ = l.frame;
    blocks_ = l.blocks();
    lu_.resize(shifts.size());
    for (size_t k = 0; k < shifts.size(); ++k) {
      lu_[k].reserve(blocks_.size());
      for (const auto& b : blocks_) {
        const auto n = static_cast<Index>(b.size());
        cmat m(n, n);
        for (Index j = 0; j < n; ++j)
          for (Index i = 0; i < n; ++i) m(i, j) = -tau * l.matrix(b[i], b[j]);
        m.diagonal().array() += shifts[k];
        lu_[k].emplace_back(m);
      }
    }
  }

  cmat solve(size_t k, const cmat& r) const {
    const cvec v = vectorize(frame_.adjoint() * r * frame_);
    cvec x(v.size());
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& b = blocks_[bi];
      const auto n = static_cast<Index>(b.size());
      cvec rb(n);
      for (Index i = 0; i < n; ++i) rb(i) = v(b[i]);
      const cvec xb = lu_[k][bi].solve(rb);
      for (Index i = 0; i < n; ++i) x(b[i]) = xb(i);
    }
    return frame_ * devectorize(x) * frame_.adjoint();
  }

 private:
  cmat frame_;
  std::vector<std::vector<Index>> blocks_;
  std::vector<std::vector<Eigen::PartialPivLU<cmat>>> lu_;
};

double rms_scaled(const std::array<cmat, 3>& v, const cmat& y, const StepControl& c) {
  const Eigen::MatrixXd w = (c.atol + c.rtol * y.cwiseAbs().array()).matrix();
  double sum = 0.0;
  for (const auto& m : v) sum += (m.cwiseAbs().array() / w.array()).square().sum();
  return std::sqrt(sum / (3.0 * static_cast<double>(y.size())));
}

using SampleFn = std::function<void(double, const cmat&)>;

cmat integrate_radau5(const Schedule& sch, const StepControl& ctl, const std::vector<double>& samples,
                      const SampleFn& on_sample, IntegrationStats& st) {
  const RadauTableau& tb = radau_tableau();
  const double tau = sch.tau();
  const double uround = std::numeric_limits<double>::epsilon();
  const double fnewt = std::max(10.0 * uround / ctl.rtol, std::min(0.03, std::sqrt(ctl.rtol)));
  constexpr int kMaxNewton = 7;

  cmat y = sch.initial_state().matrix();
  size_t next_sample = 0;
  while (next_sample < samples.size() && samples[next_sample] <= 0.0) on_sample(samples[next_sample++], y);
  if (tau == 0.0) {
    while (next_sample < samples.size()) on_sample(samples[next_sample++], y);
    return y;
  }

  auto rhs = [&](const DaviesGenerator& g, const cmat& x) -> cmat { return tau * g.apply(x); };
  DaviesGenerator g_start = sch.davies_at(0.0);
  cmat f0 = rhs(g_start, y);
  ++st.evaluations;

  double s = 0.0;
  double h = ctl.h_initial > 0.0 ? ctl.h_initial : 1e-3;
  bool first = true, last_rejected = false;
  double faccon = 1.0;
  std::array<cmat, 3> z;
  for (auto& m : z) m = cmat::Zero(y.rows(), y.cols());
  // Collocation polynomial of the previous accepted step for predicting stages.
  std::array<cmat, 4> prev_nodes;
  double prev_h = 0.0;
  bool have_prev = false;

  auto lagrange = [&](const std::array<cmat, 4>& nodes, double th) {
    const std::array<double, 4> x = {0.0, tb.c[0], tb.c[1], 1.0};
    cmat out = cmat::Zero(nodes[0].rows(), nodes[0].cols());
    for (int i = 0; i < 4; ++i) {
      double w = 1.0;
      for (int j = 0; j < 4; ++j)
        if (j != i) w *= (th - x[j]) / (x[i] - x[j]);
      out += w * nodes[i];
    }
    return out;
  };

  while (s < 1.0) {
    if (st.accepted + st.rejected >= ctl.max_steps)
      throw Error(Errc::integration, "step budget exhausted at s = " + std::to_string(s));
    if (s + h > 1.0 || 1.0 - (s + h) < 1e-12) h = 1.0 - s;

    const std::array<DaviesGenerator, 3> stage = {sch.davies_at(s + tb.c[0] * h), sch.davies_at(s + tb.c[1] * h),
                                                  sch.davies_at(s + h)};
    std::vector<cplx> shifts = {tb.lambda[0] / h, tb.lambda[1] / h, tb.lambda[2] / h, cplx(tb.u1 / h)};
    const ShiftedSolver solver(sch.davies_at(s + 0.5 * h), tau, shifts);

    if (have_prev) {
      for (int i = 0; i < 3; ++i) z[i] = lagrange(prev_nodes, 1.0 + tb.c[i] * h / prev_h) - y;
    } else {
      for (auto& m : z) m.setZero();
    }
    std::array<cmat, 3> w;
    for (int k = 0; k < 3; ++k) {
      w[k] = cmat::Zero(y.rows(), y.cols());
      for (int j = 0; j < 3; ++j) w[k] += tb.ti(k, j) * z[j];
    }

    faccon = std::pow(std::max(faccon, uround), 0.8);
    bool converged = false;
    double dyno_old = 0.0, theta = 0.0;
    int newt = 0;
    for (; newt < kMaxNewton; ++newt) {
      std::array<cmat, 3> f;
      for (int j = 0; j < 3; ++j) f[j] = rhs(stage[j], y + z[j]);
      st.evaluations += 3;
      std::array<cmat, 3> dw;
      for (int k = 0; k < 3; ++k) {
        cmat r = -(tb.lambda[k] / h) * w[k];
        for (int j = 0; j < 3; ++j) r += tb.ti(k, j) * f[j];
        dw[k] = solver.solve(static_cast<size_t>(k), r);
      }
      const double dyno = rms_scaled(dw, y, ctl);
      if (!std::isfinite(dyno)) break;
      if (newt > 0) {
        theta = dyno / dyno_old;
        if (theta >= 0.99) break;
        faccon = theta / (1.0 - theta);
      }
      dyno_old = std::max(dyno, uround);
      for (int k = 0; k < 3; ++k) w[k] += dw[k];
      for (int j = 0; j < 3; ++j) {
        z[j].setZero();
        for (int k = 0; k < 3; ++k) z[j] += tb.t(j, k) * w[k];
      }
      if (faccon * dyno <= fnewt) {
        converged = true;
        ++newt;
        break;
      }
    }
    if (!converged) {
      ++st.rejected;
      h *= 0.5;
      have_prev = false;
      faccon = 1.0;
      last_rejected = true;
      if (h < ctl.h_min) throw Error(Errc::integration, "Newton failure, step underflow at s = " + std::to_string(s));
      continue;
    }

    // Embedded error estimate filtered through (u1/h - J)^{-1}.
    cmat f2 = (tb.dd[0] * z[0] + tb.dd[1] * z[1] + tb.dd[2] * z[2]) / h;
    cmat e = solver.solve(3, f2 + f0);
    auto err_norm = [&](const cmat& ev) {
      const Eigen::MatrixXd wgt = (ctl.atol + ctl.rtol * y.cwiseAbs().cwiseMax((y + z[2]).cwiseAbs()).array()).matrix();
      return std::sqrt((ev.cwiseAbs().array() / wgt.array()).square().sum() / static_cast<double>(ev.size()));
    };
    double err = err_norm(e);
    if (err >= 1.0 && (first || last_rejected)) {
      e = solver.solve(3, rhs(sch.davies_at(s), y + e) + f2);
      ++st.evaluations;
      err = err_norm(e);
    }
    if (!std::isfinite(err)) throw Error(Errc::integration, "non-finite error estimate at s = " + std::to_string(s));

    const double fac = std::min(0.9, 0.9 * (1.0 + 2.0 * kMaxNewton) / (newt + 2.0 * kMaxNewton));
    double quot = std::clamp(std::pow(std::max(err, 1e-10), 0.25) / fac, 1.0 / 8.0, 5.0);
    if (err < 1.0) {
      const std::array<cmat, 4> nodes = {y, y + z[0], y + z[1], y + z[2]};
      while (next_sample < samples.size() && samples[next_sample] <= s + h + 1e-15) {
        const double th = (samples[next_sample] - s) / h;
        on_sample(samples[next_sample], th >= 1.0 ? nodes[3] : lagrange(nodes, th));
        ++next_sample;
      }
      y = nodes[3];
      s = (1.0 - (s + h) < 1e-12) ? 1.0 : s + h;
      f0 = rhs(stage[2], y);
      ++st.evaluations;
      prev_nodes = nodes;
      prev_h = h;
      have_prev = true;
      ++st.accepted;
      if (last_rejected) quot = std::max(quot, 1.0);
      h /= quot;
      first = false;
      last_rejected = false;
    } else {
      ++st.rejected;
      h /= (first ? 10.0 : quot);
      last_rejected = true;
      if (h < ctl.h_min) throw Error(Errc::integration, "step size underflow at s = " + std::to_string(s));
    }
  }
  while (next_sample < samples.size()) on_sample(samples[next_sample++], y);
  return y;
}

}  // namespace

Trajectory propagate_adiabatic(const Schedule& schedule, const PropagateOptions& options) {
  if (!(options.control.rtol > 0.0) || !(options.control.atol > 0.0))
    throw Error(Errc::parameter, "tolerances must be positive");
  Trajectory traj;
  const std::vector<double> samples = sample_grid(options.sample_count);
  auto record = [&](double s, const cmat& y) {
    TrajectorySample p;
    p.s = s;
    p.rho = hermitian_part(y);
    p.trace_error = std::abs(y.trace() - 1.0);
    p.min_eigenvalue = min_eigenvalue(p.rho);
    if (options.track_distance) p.tnd_to_instantaneous_ss = trace_norm_distance(p.rho, schedule.steady_at(s));
    traj.samples.push_back(std::move(p));
  };
  const bool implicit = options.method == Integrator::radau5 ||
                        (options.method == Integrator::automatic && schedule.is_davies());
  if (implicit) {
    if (!schedule.is_davies()) throw Error(Errc::parameter, "implicit integrator needs a Davies schedule");
    traj.final_rho = integrate_radau5(schedule, options.control, samples, record, traj.stats);
  } else {
    const double tau = schedule.tau();
    std::function<cmat(double, const cmat&)> f = [&](double s, const cmat& y) -> cmat {
      return tau * schedule.apply(s, y);
    };
    traj.final_rho = integrate_dopri5<cmat>(f, 0.0, 1.0, schedule.initial_state().matrix(), options.control, samples,
                                            record, &traj.stats);
  }
  return traj;
}

DensityMatrix propagate_relax(const Liouvillian& l, const DensityMatrix& rho0, double t) {
  if (rho0.dim() != l.dim) throw Error(Errc::dimension, "state does not match generator");
  if (!(t >= 0.0)) throw Error(Errc::parameter, "time must be nonnegative");
  if (t == 0.0) return rho0;
  const cvec v = expm(t * l.matrix) * vectorize(l.to_frame(rho0.matrix()));
  return DensityMatrix::normalized(l.from_frame(devectorize(v)), 1e-8);
}

RelaxPropagator::RelaxPropagator(const Liouvillian& l) : l_(l) {
  for (auto& idx : l.blocks()) {
    const auto n = static_cast<Index>(idx.size());
    cmat sub(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) sub(i, j) = l.matrix(idx[i], idx[j]);
    Block b;
    b.index = std::move(idx);
    if (n == 1) {
      b.values = sub.diagonal();
      b.vectors = cmat::Identity(1, 1);
      b.inverse = cmat::Identity(1, 1);
    } else {
      Eigen::ComplexEigenSolver<cmat> es(sub);
      b.values = es.eigenvalues();
      b.vectors = es.eigenvectors();
      Eigen::PartialPivLU<cmat> lu(b.vectors);
      b.inverse = lu.inverse();
      condition_ = std::max(condition_, 1.0 / std::max(lu.rcond(), 1e-300));
    }
    blocks_.push_back(std::move(b));
  }
  if (condition_ > 1e12) throw Error(Errc::validation, "generator is numerically defective");
}

cmat RelaxPropagator::apply(double t, const cmat& rho0) const {
  if (!(t >= 0.0)) throw Error(Errc::parameter, "time must be nonnegative");
  const cvec v = vectorize(l_.to_frame(rho0));
  cvec out(v.size());
  for (const auto& b : blocks_) {
    const auto n = static_cast<Index>(b.index.size());
    cvec vb(n);
    for (Index i = 0; i < n; ++i) vb(i) = v(b.index[i]);
    const cvec coeff = (b.inverse * vb).array() * (t * b.values.array()).exp();
    const cvec xb = b.vectors * coeff;
    for (Index i = 0; i < n; ++i) out(b.index[i]) = xb(i);
  }
  return l_.from_frame(devectorize(out));
}

double relax_bound_envelope(const Liouvillian& l, double t, EnvelopeVariant variant, double alpha) {
  const LiouvillianSpectrum spec = eig_liouvillian(l);
  const cmat rho = hermitian_part(l.from_frame(devectorize(spec.vectors.col(0))));
  const cmat rho_ss = rho / rho.trace();
  const double lmin = min_eigenvalue(rho_ss);
  if (!(lmin > 1e-13)) throw Error(Errc::bound_undefined, "steady state is rank deficient");
  const double inv_norm = 1.0 / lmin;
  const double gap = gap_relax(spec);
  if (variant == EnvelopeVariant::chi2) return std::sqrt(inv_norm) * std::exp(-t * gap);
  if (!(alpha > 0.0) || alpha > gap * (1.0 + 1e-12))
    throw Error(Errc::parameter, "log-Sobolev constant must lie in (0, Delta_relax]");
  return std::sqrt(2.0 * std::log(inv_norm)) * std::exp(-t * alpha);
}

}  // namespace ssprep
