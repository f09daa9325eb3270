#include "ssprep/expm.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace ssprep {

cmat expm(const cmat& a) {
  if (a.rows() != a.cols()) throw Error(Errc::dimension, "expm needs a square matrix");
  return a.exp();
}

cmat expm_spectral(const cmat& a) {
  if (a.rows() != a.cols()) throw Error(Errc::dimension, "expm needs a square matrix");
  Eigen::ComplexEigenSolver<cmat> es(a);
  const cmat& v = es.eigenvectors();
  Eigen::PartialPivLU<cmat> lu(v);
  if (lu.rcond() < 1e-12) throw Error(Errc::validation, "matrix is numerically defective");
  const cvec e = es.eigenvalues().array().exp();
  return v * e.asDiagonal() * lu.inverse();
}

cmat sqrtm_psd(const cmat& h) {
  return hermitian_function(h, [](double x) { return std::sqrt(std::max(x, 0.0)); });
}

}  // namespace ssprep
