#include "ssprep/bounds.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ssprep {

ReducedResolvent::ReducedResolvent(const Liouvillian& l) : ReducedResolvent(l, steady_state(l).matrix()) {}

ReducedResolvent::ReducedResolvent(const Liouvillian& l, const cmat& steady) : l_(l) {
  if (steady.rows() != l.dim) throw Error(Errc::dimension, "steady state does not match generator");
  steady_ = vectorize(l.to_frame(steady));
  unit_ = vectorize(cmat::Identity(l.dim, l.dim));
  p0_ = steady_ * unit_.transpose();
  const Liouvillian shifted{l.matrix + p0_, l.dim, l.frame};
  for (auto& idx : shifted.blocks()) {
    const auto n = static_cast<Index>(idx.size());
    cmat sub(n, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) sub(i, j) = shifted.matrix(idx[i], idx[j]);
    Block b{std::move(idx), Eigen::PartialPivLU<cmat>(sub)};
    if (!(b.lu.rcond() > 1e-14)) throw Error(Errc::degenerate_steady_state, "L + P0 is singular");
    blocks_.push_back(std::move(b));
  }
}

cmat ReducedResolvent::apply(const cmat& x) const {
  const cvec v = vectorize(l_.to_frame(x));
  cvec y(v.size());
  for (const auto& b : blocks_) {
    const auto n = static_cast<Index>(b.index.size());
    cvec vb(n);
    for (Index i = 0; i < n; ++i) vb(i) = v(b.index[i]);
    const cvec yb = b.lu.solve(vb);
    for (Index i = 0; i < n; ++i) y(b.index[i]) = yb(i);
  }
  const cplx trace = (unit_.transpose() * v)(0);
  y -= trace * steady_;
  return l_.from_frame(devectorize(y));
}

cmat ReducedResolvent::matrix() const {
  const Index n2 = l_.matrix.rows();
  cmat s = cmat::Zero(n2, n2);
  for (const auto& b : blocks_) {
    const cmat inv = b.lu.inverse();
    const auto n = static_cast<Index>(b.index.size());
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) s(b.index[i], b.index[j]) = inv(i, j);
  }
  return s - p0_;
}

double simpson(const std::vector<double>& s, const std::vector<double>& f) {
  if (s.size() != f.size()) throw Error(Errc::dimension, "grid and values differ in length");
  if (s.size() < 3 || s.size() % 2 == 0) throw Error(Errc::parameter, "Simpson rule needs an odd grid of >= 3 points");
  const double h = (s.back() - s.front()) / static_cast<double>(s.size() - 1);
  for (size_t i = 1; i < s.size(); ++i)
    if (std::abs(s[i] - s[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw Error(Errc::parameter, "Simpson rule needs a uniform grid");
  double acc = f.front() + f.back();
  for (size_t i = 1; i + 1 < f.size(); ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
  return acc * h / 3.0;
}

namespace {

// Accepts a central difference if halving the step either changes it by
// less than 1e-6 relative or shrinks the change by 4 within 20%.
void richardson_check(const cmat& coarse, const cmat& mid, const cmat& fine, double s) {
  const double scale = mid.norm();
  const double ec = (coarse - mid).norm(), ef = (mid - fine).norm();
  if (ec <= 1e-6 * scale + 1e-300) return;
  const double ratio = ef > 0.0 ? ec / ef : std::numeric_limits<double>::infinity();
  if (std::abs(ratio / 4.0 - 1.0) > 0.2)
    throw Error(Errc::derivative, "finite differences not converging at s = " + std::to_string(s) +
                                      " (Richardson ratio " + std::to_string(ratio) + ")");
}

}  // namespace

AdiabaticBound adiabatic_B(const Schedule& schedule, const std::vector<double>& s_grid, double fd_step) {
  if (!(fd_step > 0.0)) throw Error(Errc::parameter, "finite-difference step must be positive");
  if (s_grid.size() < 3 || s_grid.size() % 2 == 0) throw Error(Errc::parameter, "grid must have an odd size >= 3");
  auto rho = [&](double s) { return schedule.steady_at(s); };
  auto rhop = [&](double s, double d) -> cmat { return (rho(s + d) - rho(s - d)) / (2.0 * d); };
  // g(s) = S(s) rho'(s) in the computational basis.
  auto g = [&](double s, double d) -> cmat {
    const ReducedResolvent res(schedule.generator_at(s), rho(s));
    return hermitian_part(res.apply(rhop(s, d)));
  };
  auto gprime = [&](double s, double d) -> cmat { return (g(s + d, d) - g(s - d, d)) / (2.0 * d); };

  AdiabaticBound out;
  out.s = s_grid;
  out.integrand.reserve(s_grid.size());
  for (double s : s_grid) {
    const double e = trace_norm(gprime(s, fd_step));
    out.integrand.push_back(e);
    out.max_integrand = std::max(out.max_integrand, e);
  }
  out.integral = simpson(out.s, out.integrand);
  out.boundary0 = trace_norm(g(s_grid.front(), fd_step));
  out.boundary1 = trace_norm(g(s_grid.back(), fd_step));

  const size_t n = s_grid.size();
  for (size_t k : {n / 4, n / 2, (3 * n) / 4}) {
    const double s = s_grid[k];
    richardson_check(gprime(s, 2.0 * fd_step), gprime(s, fd_step), gprime(s, 0.5 * fd_step), s);
  }
  for (double s : {s_grid.front(), s_grid.back()})
    richardson_check(rhop(s, 2.0 * fd_step), rhop(s, fd_step), rhop(s, 0.5 * fd_step), s);
  return out;
}

cvec coherence_eigenvalues(const HamiltonianSpec& spec, const cmat& coupling, const SpectralDensity& bath) {
  const Index d = spec.dim();
  const cmat a = spec.vectors.adjoint() * coupling * spec.vectors;
  rvec out_rate = rvec::Zero(d);
  for (Index k = 0; k < d; ++k)
    for (Index j = 0; j < d; ++j)
      if (j != k) out_rate(k) += ohmic_gamma(spec.energies(k) - spec.energies(j), bath) * std::norm(a(j, k));
  const double g0 = ohmic_gamma(0.0, bath);
  cvec lambda = cvec::Zero(d);
  for (Index l = 1; l < d; ++l) {
    const double dephase = std::norm(a(l, l) - a(0, 0));
    lambda(l) = cplx(-0.5 * (out_rate(l) + out_rate(0)) - 0.5 * g0 * dephase,
                     -(spec.energies(l) - spec.energies(0)));
  }
  return lambda;
}

namespace {

void require_ground_gap(const HamiltonianSpec& spec) {
  if (spec.dim() < 2) throw Error(Errc::dimension, "need at least two levels");
  const double scale = std::max(1.0, norm_inf(spec.matrix));
  if (spec.energies(1) - spec.energies(0) < 1e-12 * scale)
    throw Error(Errc::validation, "degenerate ground state");
}

}  // namespace

SrhopNorm zero_T_srhop_norm(const HamiltonianSpec& spec, const cmat& hprime, const cvec& lambda) {
  require_ground_gap(spec);
  if (lambda.size() != spec.dim()) throw Error(Errc::dimension, "one coherence eigenvalue per level expected");
  const cvec h0 = spec.vectors.adjoint() * hprime * spec.vectors.col(0);
  SrhopNorm out;
  double sum = 0.0, best = -1.0;
  for (Index l = 1; l < spec.dim(); ++l) {
    const double c = std::abs(h0(l) / ((spec.energies(l) - spec.energies(0)) * lambda(l)));
    sum += c * c;
    if (c > best * (1.0 + 1e-12)) {
      best = c;
      out.argmax = l;
    }
  }
  out.full = 2.0 * std::sqrt(sum);
  out.leading = 2.0 * best;
  out.argmax_not_first = out.argmax != 1;
  return out;
}

double zero_T_eps(const HamiltonianSpec& spec, const cmat& hprime, cplx lambda10) {
  require_ground_gap(spec);
  const cmat h = spec.vectors.adjoint() * hprime * spec.vectors;
  const double gap = spec.energies(1) - spec.energies(0);
  const double h10 = std::abs(h(1, 0));
  return 4.0 * h10 / (gap * gap) * std::abs((h(1, 1) - h(0, 0)) / lambda10) +
         4.0 * std::pow(h10 / gap, 2) * std::abs((1.0 / lambda10).real());
}

ZeroTExact zero_T_error_exact(const ZeroTExactInput& in) {
  const HamiltonianSpec& spec = in.spec;
  require_ground_gap(spec);
  const Index d = spec.dim();
  if (in.lambda.size() != d || in.dlambda.size() != d) throw Error(Errc::dimension, "eigenvalue data size");
  const cmat h = spec.vectors.adjoint() * in.hprime * spec.vectors;
  const cmat hh = spec.vectors.adjoint() * in.hpp * spec.vectors;
  const rvec& e = spec.energies;
  const double tiny = 1e-12 * std::max(1.0, norm_inf(spec.matrix));
  ZeroTExact out;
  auto delta = [&](Index l, Index m) { return e(l) - e(m); };

  cplx amp = 0.0;
  cvec xi = cvec::Zero(d), eta = cvec::Zero(d), phi = cvec::Zero(d);
  for (Index l = 1; l < d; ++l) {
    const double dl = delta(l, 0);
    xi(l) = h(l, 0) / (dl * in.lambda(l));
    eta(l) = h(l, 0) / dl;
    amp += -2.0 * std::norm(h(l, 0) / dl) * (1.0 / in.lambda(l)).real();
  }
  for (Index l = 1; l < d; ++l) {
    const double dl = delta(l, 0);
    const cplx lam = in.lambda(l);
    cplx acc = h(l, 0) * in.dlambda(l) / (dl * lam * lam) - hh(l, 0) / (dl * lam) +
               2.0 * h(l, 0) * (h(l, l) - h(0, 0)) / (dl * dl * lam);
    for (Index m = 1; m < d; ++m) {
      if (m == l) continue;
      const double dlm = delta(l, m), dm = delta(m, 0);
      acc += h(l, m) * h(m, 0) / (dl * dm * lam);
      if (std::abs(dlm) < tiny) {
        out.ill_conditioned = true;
        continue;
      }
      acc += h(m, 0) * h(l, m) / dlm * (1.0 / (dm * in.lambda(m)) - 1.0 / (dl * lam));
    }
    phi(l) = acc;
  }

  // Trace norm inside the span of {|0>, xi, eta, phi}.
  cmat span(d, 4);
  span.col(0) = cvec::Unit(d, 0);
  span.col(1) = xi;
  span.col(2) = eta;
  span.col(3) = phi;
  Eigen::ColPivHouseholderQR<cmat> qr(span);
  qr.setThreshold(1e-13);
  const Index rank = qr.rank();
  const cmat q = cmat(qr.householderQ()).leftCols(rank);
  const cvec a0 = q.adjoint() * span.col(0), ax = q.adjoint() * xi, ae = q.adjoint() * eta,
             af = q.adjoint() * phi;
  const cmat k = amp * a0 * a0.adjoint() + ax * ae.adjoint() + ae * ax.adjoint() + af * a0.adjoint() +
                 a0 * af.adjoint();
  out.value = Eigen::JacobiSVD<cmat>(k).singularValues().sum();
  return out;
}

double finite_T_correction(double delta_min, double temperature) {
  if (!(delta_min > 0.0) || !(temperature >= 0.0)) throw Error(Errc::parameter, "need delta_min > 0 and T >= 0");
  if (temperature == 0.0) return 0.0;
  return std::exp(-delta_min / temperature) / (temperature * temperature);
}

ZeroTBoundReport zero_T_bound(const DaviesPath& path, const std::vector<double>& s_grid, double fd_step) {
  if (!(fd_step > 0.0)) throw Error(Errc::parameter, "finite-difference step must be positive");
  auto lambdas = [&](double s) {
    return coherence_eigenvalues(HamiltonianSpec::from_matrix(path.hamiltonian(s)), path.coupling, path.bath);
  };
  ZeroTBoundReport rep;
  rep.s = s_grid;
  double gap_min = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < s_grid.size(); ++k) {
    const double s = s_grid[k];
    const cmat hm = path.hamiltonian(s - fd_step), h0 = path.hamiltonian(s), hp = path.hamiltonian(s + fd_step);
    ZeroTExactInput in{HamiltonianSpec::from_matrix(h0), (hp - hm) / (2.0 * fd_step),
                       (hp - 2.0 * h0 + hm) / (fd_step * fd_step), lambdas(s),
                       (lambdas(s + fd_step) - lambdas(s - fd_step)) / (2.0 * fd_step)};
    gap_min = std::min(gap_min, in.spec.energies(1) - in.spec.energies(0));
    rep.eps_leading.push_back(zero_T_eps(in.spec, in.hprime, in.lambda(1)));
    const ZeroTExact ex = zero_T_error_exact(in);
    rep.eps_exact.push_back(ex.value);
    rep.ill_conditioned = rep.ill_conditioned || ex.ill_conditioned;
    const SrhopNorm sr = zero_T_srhop_norm(in.spec, in.hprime, in.lambda);
    rep.argmax_not_first = rep.argmax_not_first || sr.argmax_not_first;
    if (k == 0) rep.boundary0 = sr.full;
    if (k + 1 == s_grid.size()) rep.boundary1 = sr.full;
  }
  rep.B_int = simpson(rep.s, rep.eps_leading);
  rep.B_int_exact = simpson(rep.s, rep.eps_exact);
  rep.B_max = *std::max_element(rep.eps_leading.begin(), rep.eps_leading.end());
  const double temperature = std::isinf(path.bath.beta) ? 0.0 : 1.0 / path.bath.beta;
  rep.finite_T_scale = finite_T_correction(gap_min, temperature);
  return rep;
}

std::string ZeroTBoundReport::csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "s,eps_leading,eps_exact\n";
  for (size_t k = 0; k < s.size(); ++k) os << s[k] << ',' << eps_leading[k] << ',' << eps_exact[k] << '\n';
  return os.str();
}

std::string ZeroTBoundReport::summary_json() const {
  nlohmann::json j;
  j["B_int"] = B_int;
  j["B_int_exact"] = B_int_exact;
  j["B_max"] = B_max;
  j["boundary_terms"] = {boundary0, boundary1};
  j["finite_T_scale"] = finite_T_scale;
  j["argmax_not_first"] = argmax_not_first;
  j["ill_conditioned"] = ill_conditioned;
  return j.dump(2);
}

}  // namespace ssprep
