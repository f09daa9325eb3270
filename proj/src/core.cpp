#include "ssprep/core.hpp"

#include <cmath>

namespace ssprep {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::dimension: return "dimension";
    case Errc::validation: return "validation";
    case Errc::parameter: return "parameter";
    case Errc::no_steady_state: return "no steady state found";
    case Errc::degenerate_steady_state: return "degenerate steady state";
    case Errc::no_relaxation_gap: return "no relaxation gap";
    case Errc::branch_tracking: return "branch tracking";
    case Errc::integration: return "integration";
    case Errc::bound_undefined: return "bound undefined";
    case Errc::derivative: return "derivative";
    case Errc::timeout: return "timeout";
    case Errc::domain: return "domain";
    case Errc::model: return "model";
    case Errc::usage: return "usage";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

double norm_inf(const cmat& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double trace_norm(const cmat& m) {
  if (m.size() == 0) return 0.0;
  if (m.isApprox(m.adjoint(), 1e-14)) {
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
  }
  Eigen::JacobiSVD<cmat> svd(m);
  return svd.singularValues().sum();
}

cmat hermitian_part(const cmat& m) { return 0.5 * (m + m.adjoint()); }

double min_eigenvalue(const cmat& hermitian) {
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(hermitian), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

cmat kron(const cmat& a, const cmat& b) {
  cmat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

DensityMatrix::DensityMatrix(cmat m, double psd_tol) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() < 1)
    throw Error(Errc::dimension, "density matrix must be square and non-empty");
  if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol)
    throw Error(Errc::validation, "density matrix is not Hermitian");
  if (std::abs(m_.trace() - 1.0) > kTraceTol)
    throw Error(Errc::validation, "density matrix trace differs from one");
  if (min_eigenvalue(m_) < -psd_tol)
    throw Error(Errc::validation, "density matrix has a negative eigenvalue");
}

DensityMatrix DensityMatrix::normalized(const cmat& m, double psd_tol) {
  cmat h = hermitian_part(m);
  const double tr = h.trace().real();
  if (!(std::abs(tr) > 0.0)) throw Error(Errc::validation, "zero trace cannot be normalized");
  h /= tr;
  return DensityMatrix(std::move(h), psd_tol);
}

DensityMatrix DensityMatrix::maximally_mixed(Index d) {
  return DensityMatrix(cmat::Identity(d, d) / static_cast<double>(d));
}

DensityMatrix DensityMatrix::pure(const cvec& psi) {
  const cvec u = psi / psi.norm();
  return DensityMatrix::normalized(u * u.adjoint());
}

}  // namespace ssprep
