#include "ssprep/fermion.hpp"
#include "ssprep/expm.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <functional>

namespace ssprep {

void FermionModel::validate() const {
  if (n < 2) throw Error(Errc::model, "fermion chain needs at least two sites");
  for (double r : rates)
    if (!(r >= 0.0)) throw Error(Errc::model, "bath rates must be nonnegative");
}

CovarianceMatrix::CovarianceMatrix(rmat c) : c_(std::move(c)) {
  if (c_.rows() != c_.cols() || c_.rows() % 2 != 0 || c_.rows() == 0)
    throw Error(Errc::dimension, "covariance matrix must be square of even size");
  if (!c_.allFinite()) throw Error(Errc::domain, "covariance matrix has non-finite entries");
  if ((c_ + c_.transpose()).cwiseAbs().maxCoeff() > kAntisymmetryTol)
    throw Error(Errc::domain, "covariance matrix is not antisymmetric");
  const cmat ic = I1 * c_.cast<cplx>();
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(ic), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().cwiseAbs().maxCoeff() > 1.0 + kPhysicalTol)
    throw Error(Errc::domain, "covariance matrix is unphysical");
}

CovarianceMatrix CovarianceMatrix::maximally_mixed(int n) {
  if (n < 1) throw Error(Errc::dimension, "need at least one site");
  return CovarianceMatrix(rmat::Zero(2 * n, 2 * n));
}

rmat fermion_hamiltonian_form(const FermionModel& model, double s) {
  model.validate();
  const Index m = model.modes();
  rmat h = rmat::Zero(m, m);
  // c * (-i w_a w_b) contributes h_ab = -2c, h_ba = 2c.
  auto add = [&](double c, Index a, Index b) {
    h(a, b) -= 2.0 * c;
    h(b, a) += 2.0 * c;
  };
  for (Index j = 0; j < model.n; ++j) add((1.0 - s) * model.B, 2 * j, 2 * j + 1);  // Z_j
  for (Index j = 0; j + 1 < model.n; ++j) {
    add(s * model.J * (1.0 + model.gamma_aniso) / 2.0, 2 * j + 1, 2 * j + 2);   // X_j X_{j+1}
    add(-s * model.J * (1.0 - model.gamma_aniso) / 2.0, 2 * j, 2 * j + 3);      // Y_j Y_{j+1}
  }
  return h;
}

namespace {

// Bath matrix M = sum_a l_a l_a^dag for the linear Lindblad operators
// L_a = sum_k l_a,k w_k (the end-site parity string drops out on the even sector).
cmat bath_matrix(const FermionModel& model) {
  const Index m = model.modes();
  cmat bm = cmat::Zero(m, m);
  const std::array<Index, 2> sites = {0, static_cast<Index>(model.n - 1)};
  for (int e = 0; e < 2; ++e) {
    for (int sign = 0; sign < 2; ++sign) {
      const double rate = model.rates[static_cast<size_t>(2 * e + sign)];
      cvec l = cvec::Zero(m);
      l(2 * sites[e]) = 0.5;
      l(2 * sites[e] + 1) = sign == 0 ? 0.5 * I1 : -0.5 * I1;
      l *= std::sqrt(2.0 * rate);
      bm += l * l.adjoint();
    }
  }
  return bm;
}

}  // namespace

AffineFlow fermion_flow(const FermionModel& model, double s) {
  const cmat bm = bath_matrix(model);
  return {fermion_hamiltonian_form(model, s) - 2.0 * bm.real(), 4.0 * bm.imag()};
}

LyapunovSolver::LyapunovSolver(const rmat& x) {
  Eigen::EigenSolver<rmat> es(x);
  if (es.info() != Eigen::Success) throw Error(Errc::validation, "eigensolver did not converge");
  lambda_ = es.eigenvalues();
  p_ = es.eigenvectors();
  Eigen::PartialPivLU<cmat> lu(p_);
  pinv_ = lu.inverse();
}

rmat LyapunovSolver::solve(const rmat& r) const {
  cmat t = pinv_ * r.cast<cplx>() * pinv_.transpose();
  const double scale = lambda_.cwiseAbs().maxCoeff();
  for (Index j = 0; j < t.cols(); ++j)
    for (Index i = 0; i < t.rows(); ++i) {
      const cplx mu = lambda_(i) + lambda_(j);
      if (std::abs(mu) <= 1e-14 * std::max(scale, 1.0))
        throw Error(Errc::degenerate_steady_state, "Lyapunov operator is singular");
      t(i, j) /= mu;
    }
  return (p_ * t * p_.transpose()).real();
}

rmat LyapunovSolver::propagate(const rmat& m, double t) const {
  cmat q = pinv_ * m.cast<cplx>() * pinv_.transpose();
  for (Index j = 0; j < q.cols(); ++j)
    for (Index i = 0; i < q.rows(); ++i) q(i, j) *= std::exp((lambda_(i) + lambda_(j)) * t);
  return (p_ * q * p_.transpose()).real();
}

rmat steady_covariance(const AffineFlow& flow) {
  const rmat c = LyapunovSolver(flow.X).solve(-flow.Y);
  return 0.5 * (c - c.transpose());
}

CovarianceMatrix fermion_steady(const FermionModel& model, double s) {
  return CovarianceMatrix(steady_covariance(fermion_flow(model, s)));
}

CovarianceMatrix fermion_adiabatic_initial(const FermionModel& model) {
  constexpr double h = 1e-3;
  const rmat c1 = steady_covariance(fermion_flow(model, h));
  const rmat c2 = steady_covariance(fermion_flow(model, 2 * h));
  const rmat c4 = steady_covariance(fermion_flow(model, 4 * h));
  // C*(s) = C0 + a s + b s^2 + O(s^3): cancels the linear and quadratic terms.
  return CovarianceMatrix((8.0 * c1 - 6.0 * c2 + c4) / 3.0);
}

namespace {

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

// Eigenvalues of the Hermitian matrix iC clamped strictly inside (-1, 1).
constexpr double kClamp = 1.0 - 1e-14;

double clamp_unit(double t) { return std::clamp(t, -kClamp, kClamp); }

}  // namespace

double gaussian_root_fidelity(const CovarianceMatrix& a, const CovarianceMatrix& b) {
  if (a.matrix().rows() != b.matrix().rows()) throw Error(Errc::dimension, "covariance size mismatch");
  const Index n = a.matrix().rows() / 2;
  const cmat ia = I1 * a.matrix().cast<cplx>(), ib = I1 * b.matrix().cast<cplx>();
  // R = (1 + iC)(1 - iC)^{-1} as a function of the Hermitian iC.
  const cmat ra_half = hermitian_function(ia, [](double t) {
    t = clamp_unit(t);
    return std::sqrt((1.0 + t) / (1.0 - t));
  });
  const cmat rb = hermitian_function(ib, [](double t) {
    t = clamp_unit(t);
    return (1.0 + t) / (1.0 - t);
  });
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(ra_half * rb * ra_half), Eigen::EigenvaluesOnly);
  const rvec mu = es.eigenvalues();  // ascending, reciprocal pairs
  double sum = 0.0;
  for (Index k = n; k < 2 * n; ++k) sum += log_cosh(0.25 * std::log(std::max(mu(k), 1e-300)));
  auto half_sum = [&](const cmat& ic) {
    Eigen::SelfAdjointEigenSolver<cmat> e(hermitian_part(ic), Eigen::EigenvaluesOnly);
    double acc = 0.0;
    for (Index k = n; k < 2 * n; ++k) acc += log_cosh(std::atanh(clamp_unit(e.eigenvalues()(k))));
    return acc;
  };
  sum -= 0.5 * half_sum(ia) + 0.5 * half_sum(ib);
  return std::min(1.0, std::exp(sum));
}

double bures_gaussian(const CovarianceMatrix& a, const CovarianceMatrix& b) {
  return std::sqrt(std::max(0.0, 2.0 * (1.0 - gaussian_root_fidelity(a, b))));
}

FermionRelaxation::FermionRelaxation(const FermionModel& model, const CovarianceMatrix& c0)
    : solver_(fermion_flow(model, 1.0).X),
      steady_(fermion_steady(model, 1.0)),
      offset_(c0.matrix() - steady_.matrix()) {
  if (c0.sites() != model.n) throw Error(Errc::dimension, "initial covariance does not match the chain");
}

CovarianceMatrix FermionRelaxation::at(double t) const {
  if (!(t >= 0.0)) throw Error(Errc::parameter, "time must be nonnegative");
  rmat c = steady_.matrix() + solver_.propagate(offset_, t);
  return CovarianceMatrix(0.5 * (c - c.transpose()));
}

double FermionRelaxation::bures_to_steady(double t) const { return bures_gaussian(at(t), steady_); }

namespace {

// phi1(z) = (e^z - 1)/z and w(z)/z with w(z) = (1 + e^z)/2 - phi1(z) = O(z^2).
std::pair<cplx, cplx> etd_weights(cplx z) {
  if (std::abs(z) < 0.2) {
    cplx p1 = 0.0, wz = 0.0, term = 1.0;  // term = z^k / k!
    for (int k = 0; k < 16; ++k) {
      p1 += term / static_cast<double>(k + 1);
      if (k >= 2) wz += term / z * (static_cast<double>(k - 1) / (2.0 * (k + 1)));
      term *= z / static_cast<double>(k + 1);
    }
    return {p1, wz};
  }
  const cplx e = std::exp(z);
  const cplx p1 = (e - 1.0) / z;
  return {p1, (0.5 * (1.0 + e) - p1) / z};
}

// One exponential step of C' = tau (X C + C X^T + Y) over [s, s + h] with X
// frozen at the midpoint and the drift of C*(s) taken to first order:
//   C(s + h) = C*(s + h) + e^{tau h X}(C - C*(s)) e^{tau h X^T} - h phi1 C*'.
// Every 1/(lambda_i + lambda_j) of the Lyapunov solves is absorbed into the
// weights, so slow modes near s = 0 stay well conditioned.
using SparseR = Eigen::SparseMatrix<double>;

rmat etd_step(const FermionModel& model, const SparseR& dx, const SparseR& y, double tau, double s, double h,
              const rmat& c) {
  const Eigen::EigenSolver<rmat> es(fermion_flow(model, s + 0.5 * h).X);
  const cmat& p = es.eigenvectors();
  const cmat pinv = p.inverse();
  const cvec& lam = es.eigenvalues();
  const Index m = c.rows();
  // Sparse factors are applied first; M~ = P^{-1} M P^{-T}.
  const cmat ct = pinv * c.cast<cplx>() * pinv.transpose();
  const cmat yt = pinv * (y * pinv.transpose());
  const cmat dxt = pinv * (dx * p);  // P^{-1} dX P
  cmat cst(m, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i) {
      const cplx mu = lam(i) + lam(j);
      cst(i, j) = std::abs(mu) > 1e-300 ? -yt(i, j) / mu : cplx(0.0);
    }
  const cmat rt = -(dxt * cst + cst * dxt.transpose());  // mu * C*' in the eigenbasis
  cmat out(m, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i) {
      const cplx z = tau * h * (lam(i) + lam(j));
      const auto [p1, wz] = etd_weights(z);
      out(i, j) = std::exp(z) * ct(i, j) + tau * h * p1 * yt(i, j) + tau * h * h * wz * rt(i, j);
    }
  rmat r = (p * out * p.transpose()).real();
  return 0.5 * (r - r.transpose());
}

}  // namespace

FermionAdiabaticRun propagate_fermion_adiabatic(const FermionModel& model, double tau,
                                                const FermionPropagateOptions& options) {
  model.validate();
  if (!(tau >= 0.0)) throw Error(Errc::parameter, "tau must be nonnegative");
  const CovarianceMatrix c0 = fermion_adiabatic_initial(model);
  if (tau == 0.0) return {c0, 0, 0};
  const SparseR dx = (fermion_flow(model, 1.0).X - fermion_flow(model, 0.0).X).sparseView();
  const SparseR y = fermion_flow(model, 0.0).Y.sparseView();
  rmat c = c0.matrix();
  double s = 0.0, h = options.h_initial;
  size_t steps = 0, rejected = 0;
  while (s < 1.0) {
    if (steps + rejected >= options.max_steps) throw Error(Errc::integration, "fermion step budget exhausted");
    if (s + h > 1.0 || 1.0 - (s + h) < 1e-12) h = 1.0 - s;
    const rmat full = etd_step(model, dx, y, tau, s, h, c);
    const rmat half = etd_step(model, dx, y, tau, s + 0.5 * h, 0.5 * h, etd_step(model, dx, y, tau, s, 0.5 * h, c));
    const double err = (half - full).cwiseAbs().maxCoeff() / (options.atol + options.rtol);
    if (!std::isfinite(err)) throw Error(Errc::integration, "non-finite covariance at s = " + std::to_string(s));
    const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-12), -1.0 / 3.0), 0.2, 2.0);
    if (err <= 1.0) {
      c = half;
      s = (1.0 - (s + h) < 1e-12) ? 1.0 : s + h;
      ++steps;
    } else {
      ++rejected;
      if (h < 1e-14) throw Error(Errc::integration, "step size underflow at s = " + std::to_string(s));
    }
    h *= fac;
  }
  return {CovarianceMatrix(0.5 * (c - c.transpose())), steps, rejected};
}

CovarianceMatrix propagate_fermion_covariance(const FermionModel& model, const CovarianceMatrix& c0, double tau,
                                              const StepControl& control, const std::vector<double>& samples,
                                              const std::function<void(double, const rmat&)>& on_sample) {
  const rmat h0 = fermion_flow(model, 0.0).X, h1 = fermion_flow(model, 1.0).X;
  const rmat y = fermion_flow(model, 0.0).Y;
  std::function<rmat(double, const rmat&)> f = [&](double s, const rmat& c) -> rmat {
    const rmat x = (1.0 - s) * h0 + s * h1;
    return tau * (x * c + c * x.transpose() + y);
  };
  std::function<void(double, const rmat&)> sink = on_sample ? on_sample : [](double, const rmat&) {};
  const rmat c = integrate_dopri5<rmat>(f, 0.0, 1.0, c0.matrix(), control, samples, sink, nullptr);
  return CovarianceMatrix(0.5 * (c - c.transpose()));
}

cvec fermion_rapidities(const FermionModel& model, double s) {
  Eigen::EigenSolver<rmat> es(fermion_flow(model, s).X, false);
  return es.eigenvalues();
}

namespace {

double rapidity_null_tol(const FermionModel& model, double s) {
  return 1e-10 * std::max(1.0, fermion_flow(model, s).X.cwiseAbs().rowwise().sum().maxCoeff());
}

}  // namespace

double fermion_gap_relax(const FermionModel& model) {
  const cvec x = fermion_rapidities(model, 1.0);
  const double tol = rapidity_null_tol(model, 1.0);
  std::vector<double> r(static_cast<size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) r[static_cast<size_t>(i)] = std::abs(x(i).real());
  std::sort(r.begin(), r.end());
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < r.size(); ++i)
    for (size_t j = i + 1; j < r.size(); ++j)
      if (r[i] + r[j] > tol) {
        best = std::min(best, r[i] + r[j]);
        break;
      }
  if (!std::isfinite(best)) throw Error(Errc::no_relaxation_gap, "all even-sector rates vanish");
  return best;
}

double fermion_min_modulus(const FermionModel& model, double s) {
  const cvec x = fermion_rapidities(model, s);
  const double tol = rapidity_null_tol(model, s);
  const auto m = static_cast<size_t>(x.size());
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return std::abs(x(a).real()) < std::abs(x(b).real()); });
  std::vector<cplx> v(m);
  std::vector<double> re(m);
  for (size_t k = 0; k < m; ++k) {
    v[k] = x(static_cast<Index>(order[k]));
    re[k] = std::abs(v[k].real());
  }
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) {
      const double mod = std::abs(v[i] + v[j]);
      if (mod <= tol) return 0.0;  // second null vector: degenerate steady state
      best = std::min(best, mod);
    }
  // Larger even subsets only matter if their real parts alone can undercut
  // the pair minimum (all Re x <= 0, so |sum| >= sum |Re x|).
  std::function<void(size_t, size_t, cplx, double)> dfs = [&](size_t start, size_t left, cplx acc, double racc) {
    if (left == 0) {
      best = std::min(best, std::abs(acc));
      return;
    }
    for (size_t k = start; k + left <= m; ++k) {
      double bound = racc;
      for (size_t q = 0; q < left; ++q) bound += re[k + q];
      if (bound >= best) break;
      dfs(k + 1, left - 1, acc + v[k], racc + re[k]);
    }
  };
  for (size_t size = 4; size <= m; size += 2) {
    double lower = 0.0;
    for (size_t q = 0; q < size; ++q) lower += re[q];
    if (lower >= best) break;
    dfs(0, size, 0.0, 0.0);
  }
  if (best <= tol) return 0.0;
  return best;
}

GapScan fermion_gap_adia(const FermionModel& model, const std::vector<double>& grid, int refine_rounds) {
  return minimize_on_grid([&](double s) { return fermion_min_modulus(model, s); }, grid, refine_rounds);
}

namespace {

cmat site_operator(int n, int site, const cmat& op) {
  cmat out = cmat::Identity(1, 1);
  const cmat id = cmat::Identity(2, 2);
  for (int k = 0; k < n; ++k) out = kron(out, k == site ? op : id);
  return out;
}

cmat pauli(char c) {
  cmat m(2, 2);
  switch (c) {
    case 'x': m << 0.0, 1.0, 1.0, 0.0; break;
    case 'y': m << 0.0, -I1, I1, 0.0; break;
    default: m << 1.0, 0.0, 0.0, -1.0; break;
  }
  return m;
}

}  // namespace

std::vector<cmat> majorana_operators(int n) {
  std::vector<cmat> w;
  const Index d = Index{1} << n;
  cmat string = cmat::Identity(d, d);
  for (int j = 0; j < n; ++j) {
    w.push_back(string * site_operator(n, j, pauli('x')));
    w.push_back(string * site_operator(n, j, pauli('y')));
    string = string * site_operator(n, j, pauli('z'));
  }
  return w;
}

cmat fermion_full_hamiltonian(const FermionModel& model, double s) {
  model.validate();
  const Index d = Index{1} << model.n;
  cmat h = cmat::Zero(d, d);
  for (int j = 0; j < model.n; ++j) h += (1.0 - s) * model.B * site_operator(model.n, j, pauli('z'));
  for (int j = 0; j + 1 < model.n; ++j) {
    h += s * model.J * (1.0 + model.gamma_aniso) / 2.0 * site_operator(model.n, j, pauli('x')) *
         site_operator(model.n, j + 1, pauli('x'));
    h += s * model.J * (1.0 - model.gamma_aniso) / 2.0 * site_operator(model.n, j, pauli('y')) *
         site_operator(model.n, j + 1, pauli('y'));
  }
  return h;
}

std::vector<LindbladTerm> fermion_full_jumps(const FermionModel& model) {
  model.validate();
  cmat up(2, 2), down(2, 2);
  up << 0.0, 1.0, 0.0, 0.0;  // (X + iY)/2
  down = up.transpose();
  const int last = model.n - 1;
  return {{site_operator(model.n, 0, up), 2.0 * model.rates[0]},
          {site_operator(model.n, 0, down), 2.0 * model.rates[1]},
          {site_operator(model.n, last, up), 2.0 * model.rates[2]},
          {site_operator(model.n, last, down), 2.0 * model.rates[3]}};
}

Liouvillian fermion_full_lindbladian(const FermionModel& model, double s) {
  return build_lindbladian(fermion_full_hamiltonian(model, s), fermion_full_jumps(model));
}

rmat covariance_of(const cmat& rho, const std::vector<cmat>& w) {
  const auto m = static_cast<Index>(w.size());
  rmat c(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) {
      const cplx v = 0.5 * I1 * (rho * (w[a] * w[b] - w[b] * w[a])).trace();
      c(a, b) = v.real();
    }
  return c;
}

cmat gaussian_density_matrix(const CovarianceMatrix& c, const std::vector<cmat>& w) {
  const auto m = static_cast<Index>(w.size());
  if (c.matrix().rows() != m) throw Error(Errc::dimension, "covariance does not match Majorana set");
  // rho ~ exp(1/4 sum K_ab w_a w_b) with K = 2 atanh(iC).
  const cmat k = hermitian_function(I1 * c.matrix().cast<cplx>(),
                                    [](double t) { return 2.0 * std::atanh(clamp_unit(t)); });
  const Index d = w.front().rows();
  cmat g = cmat::Zero(d, d);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b)
      if (k(a, b) != cplx(0.0)) g += 0.25 * k(a, b) * (w[a] * w[b]);
  const cmat rho = hermitian_function(g, [](double x) { return std::exp(x); });
  return rho / rho.trace().real();
}

double root_fidelity(const cmat& a, const cmat& b) {
  const cmat sa = sqrtm_psd(a);
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(sa * b * sa), Eigen::EigenvaluesOnly);
  double f = 0.0;
  for (Index k = 0; k < es.eigenvalues().size(); ++k) f += std::sqrt(std::max(0.0, es.eigenvalues()(k)));
  return std::min(1.0, f);
}

double bures_distance(const cmat& a, const cmat& b) {
  return std::sqrt(std::max(0.0, 2.0 * (1.0 - root_fidelity(a, b))));
}

}  // namespace ssprep
