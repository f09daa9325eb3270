#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ssprep {

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using rmat = Eigen::MatrixXd;
using rvec = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr cplx I1{0.0, 1.0};

enum class Errc {
  dimension,
  validation,
  parameter,
  no_steady_state,
  degenerate_steady_state,
  no_relaxation_gap,
  branch_tracking,
  integration,
  bound_undefined,
  derivative,
  timeout,
  domain,
  model,
  usage,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Induced infinity norm: largest absolute row sum.
double norm_inf(const cmat& m);
double trace_norm(const cmat& m);
cmat hermitian_part(const cmat& m);
double min_eigenvalue(const cmat& hermitian);
cmat kron(const cmat& a, const cmat& b);

// f applied to the eigenvalues of a Hermitian matrix.
template <class F>
cmat hermitian_function(const cmat& h, F&& f) {
  Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(h));
  cvec w = es.eigenvalues().unaryExpr([&](double x) { return cplx(f(x)); });
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

// Hermitian, unit trace, positive semidefinite within tolerance.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-12;
  static constexpr double kTraceTol = 1e-12;
  static constexpr double kPsdTol = 1e-10;

  explicit DensityMatrix(cmat m, double psd_tol = kPsdTol);

  // Hermitizes and rescales to unit trace before validating.
  static DensityMatrix normalized(const cmat& m, double psd_tol = 1e-8);
  static DensityMatrix maximally_mixed(Index d);
  static DensityMatrix pure(const cvec& psi);

  const cmat& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }

 private:
  cmat m_;
};

}  // namespace ssprep
