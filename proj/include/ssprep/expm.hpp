#pragma once

#include "ssprep/core.hpp"

namespace ssprep {

// Pade scaling-and-squaring exponential.
cmat expm(const cmat& a);

// V exp(D) V^-1 from a full eigendecomposition; throws Errc::validation when
// the eigenvector matrix is numerically singular (condition above 1e12).
cmat expm_spectral(const cmat& a);

// Principal square root of a Hermitian positive semidefinite matrix.
cmat sqrtm_psd(const cmat& h);

}  // namespace ssprep
