#include "ssprep/superop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace ssprep {

cvec vectorize(const cmat& m) {
  cvec v(m.size());
  for (Index c = 0; c < m.cols(); ++c) v.segment(c * m.rows(), m.rows()) = m.col(c);
  return v;
}

cmat devectorize(const cvec& v) {
  const auto d = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (d * d != v.size()) throw Error(Errc::dimension, "vector length is not a perfect square");
  cmat m(d, d);
  for (Index c = 0; c < d; ++c) m.col(c) = v.segment(c * d, d);
  return m;
}

cmat Liouvillian::to_frame(const cmat& rho) const {
  if (frame.size() == 0) return rho;
  return frame.adjoint() * rho * frame;
}

cmat Liouvillian::from_frame(const cmat& rho_frame) const {
  if (frame.size() == 0) return rho_frame;
  return frame * rho_frame * frame.adjoint();
}

cmat Liouvillian::apply(const cmat& rho) const {
  if (rho.rows() != dim || rho.cols() != dim) throw Error(Errc::dimension, "operator does not match Liouvillian");
  return from_frame(devectorize(matrix * vectorize(to_frame(rho))));
}

cmat Liouvillian::computational() const {
  if (frame.size() == 0) return matrix;
  const cmat w = kron(frame.conjugate(), frame);
  return w * matrix * w.adjoint();
}

std::vector<std::vector<Index>> Liouvillian::blocks() const {
  const Index n = matrix.rows();
  std::vector<Index> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if (i != j && matrix(i, j) != cplx(0.0)) {
        const Index a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<std::vector<Index>> out;
  std::vector<Index> slot(static_cast<size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    const Index r = find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<Index>(out.size());
      out.emplace_back();
    }
    out[slot[r]].push_back(i);
  }
  return out;
}

namespace {

void require_hermitian(const cmat& m, const char* what) {
  if (m.rows() != m.cols()) throw Error(Errc::dimension, std::string(what) + " must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(Errc::validation, std::string(what) + " is not Hermitian");
}

}  // namespace

Liouvillian build_lindbladian(const cmat& h, const std::vector<LindbladTerm>& terms) {
  require_hermitian(h, "Hamiltonian");
  const Index d = h.rows();
  const cmat id = cmat::Identity(d, d);
  cmat m = -I1 * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& t : terms) {
    if (!(t.rate >= 0.0)) throw Error(Errc::validation, "Lindblad rate must be nonnegative");
    if (t.op.rows() != d || t.op.cols() != d) throw Error(Errc::dimension, "Lindblad operator size mismatch");
    const cmat ll = t.op.adjoint() * t.op;
    m += t.rate * (kron(t.op.conjugate(), t.op) - 0.5 * kron(id, ll) - 0.5 * kron(ll.transpose(), id));
  }
  return Liouvillian{std::move(m), d, cmat()};
}

double ohmic_gamma(double omega, const SpectralDensity& sd) {
  if (!(sd.beta > 0.0)) throw Error(Errc::parameter, "inverse temperature must be positive");
  const double pref = 2.0 * std::numbers::pi * sd.g * sd.g;
  if (std::isinf(sd.beta)) return omega > 0.0 ? pref * omega : 0.0;
  if (omega == 0.0) return pref / sd.beta;
  // -expm1(-x) = 1 - exp(-x) without cancellation for small x.
  return pref * omega / (-std::expm1(-sd.beta * omega));
}

HamiltonianSpec HamiltonianSpec::from_matrix(const cmat& h) {
  require_hermitian(h, "Hamiltonian");
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(h));
  HamiltonianSpec spec;
  spec.energies = es.eigenvalues();
  spec.vectors = es.eigenvectors();
  // Deterministic phase: largest component of each eigenvector real positive.
  for (Index k = 0; k < spec.vectors.cols(); ++k) {
    Index imax = 0;
    spec.vectors.col(k).cwiseAbs().maxCoeff(&imax);
    const cplx p = spec.vectors(imax, k);
    spec.vectors.col(k) *= std::conj(p) / std::abs(p);
  }
  spec.matrix = h;
  return spec;
}

double HamiltonianSpec::default_tolerance() const {
  return 1e-9 * std::max(norm_inf(matrix), 1e-300);
}

std::vector<BohrGroup> bohr_frequencies(const HamiltonianSpec& spec, double tol) {
  const Index d = spec.dim();
  struct Gap {
    double w;
    Index l, m;
  };
  std::vector<Gap> gaps;
  gaps.reserve(static_cast<size_t>(d * d));
  for (Index l = 0; l < d; ++l)
    for (Index m = 0; m < d; ++m) gaps.push_back({spec.energies(l) - spec.energies(m), l, m});
  std::sort(gaps.begin(), gaps.end(), [](const Gap& a, const Gap& b) {
    if (a.w != b.w) return a.w < b.w;
    if (a.l != b.l) return a.l < b.l;
    return a.m < b.m;
  });
  std::vector<BohrGroup> out;
  size_t i = 0;
  while (i < gaps.size()) {
    size_t j = i + 1;
    while (j < gaps.size() && gaps[j].w - gaps[j - 1].w <= tol) ++j;
    BohrGroup g;
    double sum = 0.0;
    bool diagonal = false;
    for (size_t k = i; k < j; ++k) {
      g.pairs.emplace_back(gaps[k].l, gaps[k].m);
      sum += gaps[k].w;
      diagonal = diagonal || gaps[k].l == gaps[k].m;
    }
    std::sort(g.pairs.begin(), g.pairs.end());
    g.omega = diagonal ? 0.0 : sum / static_cast<double>(j - i);
    out.push_back(std::move(g));
    i = j;
  }
  return out;
}

DaviesGenerator::DaviesGenerator(HamiltonianSpec spec, const cmat& coupling, SpectralDensity sd, double tol)
    : spec_(std::move(spec)), sd_(sd) {
  require_hermitian(coupling, "coupling operator");
  const Index d = spec_.dim();
  if (coupling.rows() != d) throw Error(Errc::dimension, "coupling operator size mismatch");
  if (tol < 0.0) tol = spec_.default_tolerance();
  a_ = spec_.vectors.adjoint() * coupling * spec_.vectors;
  groups_ = bohr_frequencies(spec_, tol);
  k_ = cmat::Zero(d, d);
  for (const auto& g : groups_) {
    const double rate = ohmic_gamma(g.omega, sd_);
    if (rate == 0.0) continue;
    Channel ch{rate, {}};
    // L_w = sum over pairs of |m><m| A |l><l|, i.e. amplitude A_ml on |m><l|.
    for (const auto& [l, m] : g.pairs) {
      const cplx amp = a_(m, l);
      if (amp != cplx(0.0)) ch.jumps.push_back({l, m, amp});
    }
    if (ch.jumps.empty()) continue;
    for (const auto& p : ch.jumps)
      for (const auto& q : ch.jumps)
        if (p.m == q.m) k_(p.l, q.l) += rate * std::conj(p.amp) * q.amp;
    channels_.push_back(std::move(ch));
  }
}

cmat DaviesGenerator::apply_frame(const cmat& rho) const {
  const Index d = spec_.dim();
  cmat out(d, d);
  for (Index b = 0; b < d; ++b)
    for (Index a = 0; a < d; ++a) out(a, b) = -I1 * (spec_.energies(a) - spec_.energies(b)) * rho(a, b);
  for (const auto& ch : channels_)
    for (const auto& p : ch.jumps) {
      const cplx pa = ch.rate * p.amp;
      for (const auto& q : ch.jumps) out(p.m, q.m) += pa * std::conj(q.amp) * rho(p.l, q.l);
    }
  out.noalias() -= 0.5 * (k_ * rho);
  out.noalias() -= 0.5 * (rho * k_);
  return out;
}

cmat DaviesGenerator::apply(const cmat& rho) const {
  const cmat& v = spec_.vectors;
  return v * apply_frame(v.adjoint() * rho * v) * v.adjoint();
}

Liouvillian DaviesGenerator::liouvillian() const {
  const Index d = spec_.dim();
  auto idx = [d](Index r, Index c) { return r + c * d; };
  cmat m = cmat::Zero(d * d, d * d);
  for (Index b = 0; b < d; ++b)
    for (Index a = 0; a < d; ++a) m(idx(a, b), idx(a, b)) = -I1 * (spec_.energies(a) - spec_.energies(b));
  for (const auto& ch : channels_)
    for (const auto& p : ch.jumps)
      for (const auto& q : ch.jumps) m(idx(p.m, q.m), idx(p.l, q.l)) += ch.rate * p.amp * std::conj(q.amp);
  for (Index c = 0; c < d; ++c)
    for (Index a = 0; a < d; ++a) {
      const cplx kac = k_(a, c);
      if (kac == cplx(0.0)) continue;
      for (Index b = 0; b < d; ++b) {
        m(idx(a, b), idx(c, b)) -= 0.5 * kac;  // K rho
        m(idx(b, c), idx(b, a)) -= 0.5 * kac;  // rho K
      }
    }
  return Liouvillian{std::move(m), d, spec_.vectors};
}

cmat DaviesGenerator::gibbs_state() const { return ssprep::gibbs_state(spec_, sd_.beta); }

Liouvillian davies_generator(const HamiltonianSpec& spec, const cmat& coupling, const SpectralDensity& sd,
                             double tol) {
  return DaviesGenerator(spec, coupling, sd, tol).liouvillian();
}

cmat gibbs_state(const HamiltonianSpec& spec, double beta) {
  const Index d = spec.dim();
  rvec w(d);
  const double e0 = spec.energies(0);
  for (Index k = 0; k < d; ++k) {
    const double de = spec.energies(k) - e0;
    w(k) = std::isinf(beta) ? (de <= spec.default_tolerance() ? 1.0 : 0.0) : std::exp(-beta * de);
  }
  w /= w.sum();
  return spec.vectors * w.cast<cplx>().asDiagonal() * spec.vectors.adjoint();
}

}  // namespace ssprep
