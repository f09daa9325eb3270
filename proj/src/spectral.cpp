#include "ssprep/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ssprep {

LiouvillianSpectrum order_spectrum(std::vector<cplx> values, cmat vectors, double null_tol) {
  const size_t n = values.size();
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), size_t{0});
  auto eta = [&](size_t i) { return -values[i].real(); };
  std::stable_sort(perm.begin(), perm.end(), [&](size_t a, size_t b) { return eta(a) < eta(b); });
  // Runs of equal eta (within null_tol) are ordered by |sigma|, then phase.
  size_t i = 0;
  while (i < n) {
    size_t j = i + 1;
    while (j < n && eta(perm[j]) - eta(perm[j - 1]) <= null_tol) ++j;
    std::stable_sort(perm.begin() + static_cast<std::ptrdiff_t>(i), perm.begin() + static_cast<std::ptrdiff_t>(j),
                     [&](size_t a, size_t b) {
                       const double sa = std::abs(values[a].imag()), sb = std::abs(values[b].imag());
                       if (sa != sb) return sa < sb;
                       return std::arg(values[a]) < std::arg(values[b]);
                     });
    i = j;
  }
  std::vector<size_t> zeros;
  for (size_t k = 0; k < n; ++k)
    if (std::abs(values[perm[k]]) <= null_tol) zeros.push_back(k);
  if (zeros.empty()) throw Error(Errc::no_steady_state, "no eigenvalue within null tolerance");
  if (zeros.size() > 1)
    throw Error(Errc::degenerate_steady_state, std::to_string(zeros.size()) + " eigenvalues within null tolerance");
  std::rotate(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(zeros.front()),
              perm.begin() + static_cast<std::ptrdiff_t>(zeros.front()) + 1);

  LiouvillianSpectrum out;
  out.null_tol = null_tol;
  out.values.resize(n);
  for (size_t k = 0; k < n; ++k) out.values[k] = values[perm[k]];
  if (vectors.size() > 0) {
    out.vectors.resize(vectors.rows(), static_cast<Index>(n));
    for (size_t k = 0; k < n; ++k) out.vectors.col(static_cast<Index>(k)) = vectors.col(static_cast<Index>(perm[k]));
  }
  return out;
}

LiouvillianSpectrum eig_liouvillian(const Liouvillian& l, double null_tol) {
  const Index n = l.matrix.rows();
  if (n != l.matrix.cols() || n != l.dim * l.dim) throw Error(Errc::dimension, "malformed Liouvillian");
  if (!l.matrix.allFinite()) throw Error(Errc::validation, "Liouvillian has non-finite entries");
  if (null_tol <= 0.0) null_tol = 1e-10 * std::max(norm_inf(l.matrix), 1e-300);

  std::vector<cplx> values(static_cast<size_t>(n));
  cmat vectors = cmat::Zero(n, n);
  double condition = 1.0;
  Index col = 0;
  for (const auto& block : l.blocks()) {
    const auto b = static_cast<Index>(block.size());
    if (b == 1) {
      values[col] = l.matrix(block[0], block[0]);
      vectors(block[0], col) = 1.0;
      ++col;
      continue;
    }
    cmat sub(b, b);
    for (Index j = 0; j < b; ++j)
      for (Index i = 0; i < b; ++i) sub(i, j) = l.matrix(block[i], block[j]);
    Eigen::ComplexEigenSolver<cmat> es(sub);
    if (es.info() != Eigen::Success) throw Error(Errc::validation, "eigensolver did not converge");
    const cmat& v = es.eigenvectors();
    Eigen::JacobiSVD<cmat> svd(v);
    const auto& sv = svd.singularValues();
    condition = std::max(condition, sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                            : std::numeric_limits<double>::infinity());
    for (Index k = 0; k < b; ++k) {
      values[col] = es.eigenvalues()(k);
      for (Index i = 0; i < b; ++i) vectors(block[i], col) = v(i, k);
      vectors.col(col).normalize();
      ++col;
    }
  }
  LiouvillianSpectrum out = order_spectrum(std::move(values), std::move(vectors), null_tol);
  out.frame = l.frame;
  out.condition = condition;
  out.defective = condition > kDefectiveCondition;
  return out;
}

std::vector<cplx> liouvillian_eigenvalues(const Liouvillian& l) {
  std::vector<cplx> values;
  values.reserve(static_cast<size_t>(l.matrix.rows()));
  for (const auto& block : l.blocks()) {
    const auto b = static_cast<Index>(block.size());
    cmat sub(b, b);
    for (Index j = 0; j < b; ++j)
      for (Index i = 0; i < b; ++i) sub(i, j) = l.matrix(block[i], block[j]);
    Eigen::ComplexEigenSolver<cmat> es(sub, false);
    if (es.info() != Eigen::Success) throw Error(Errc::validation, "eigensolver did not converge");
    for (Index k = 0; k < b; ++k) values.push_back(es.eigenvalues()(k));
  }
  std::sort(values.begin(), values.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    if (std::abs(a.imag()) != std::abs(b.imag())) return std::abs(a.imag()) < std::abs(b.imag());
    return std::arg(a) < std::arg(b);
  });
  return values;
}

DensityMatrix steady_state(const Liouvillian& l, double null_tol) {
  const LiouvillianSpectrum spec = eig_liouvillian(l, null_tol);
  cmat rho = l.from_frame(devectorize(spec.vectors.col(0)));
  const cplx tr = rho.trace();
  if (std::abs(tr) == 0.0) throw Error(Errc::no_steady_state, "null vector is traceless");
  rho /= tr;
  return DensityMatrix::normalized(rho, DensityMatrix::kPsdTol);
}

double gap_relax(const LiouvillianSpectrum& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t j = 1; j < spec.size(); ++j)
    if (spec.eta(j) > spec.null_tol) best = std::min(best, spec.eta(j));
  if (!std::isfinite(best)) throw Error(Errc::no_relaxation_gap, "all nonzero eigenvalues are purely imaginary");
  return best;
}

double gap_relax(const Liouvillian& l) { return gap_relax(eig_liouvillian(l)); }

double min_modulus(const LiouvillianSpectrum& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t j = 1; j < spec.size(); ++j) best = std::min(best, std::abs(spec.values[j]));
  return best;
}

std::vector<double> uniform_grid(size_t points) {
  if (points < 2) throw Error(Errc::parameter, "grid needs at least two points");
  std::vector<double> g(points);
  for (size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  g.back() = 1.0;
  return g;
}

GapScan minimize_on_grid(const std::function<double(double)>& f, const std::vector<double>& grid,
                         int refine_rounds) {
  if (grid.empty()) throw Error(Errc::parameter, "empty grid");
  std::map<double, double> vals;
  for (double s : grid) vals.emplace(s, f(s));
  GapScan out;
  out.grid_points = grid.size();
  auto argmin = [&] {
    return std::min_element(vals.begin(), vals.end(),
                            [](const auto& a, const auto& b) { return a.second < b.second; });
  };
  for (int r = 0; r < refine_rounds && vals.size() > 1; ++r) {
    auto it = argmin();
    const double s0 = it->first;
    std::vector<double> mids;
    if (it != vals.begin()) mids.push_back(0.5 * (std::prev(it)->first + s0));
    if (std::next(it) != vals.end()) mids.push_back(0.5 * (std::next(it)->first + s0));
    for (double m : mids) vals.emplace(m, f(m));
  }
  auto it = argmin();
  out.value = it->second;
  out.argmin = it->first;
  out.evaluations = vals.size();
  double res = std::numeric_limits<double>::infinity();
  if (it != vals.begin()) res = std::min(res, it->first - std::prev(it)->first);
  if (std::next(it) != vals.end()) res = std::min(res, std::next(it)->first - it->first);
  out.resolution = std::isfinite(res) ? res : 0.0;
  return out;
}

GapScan gap_adia(const SpectrumAt& spectrum_at, const std::vector<double>& grid, int refine_rounds) {
  auto f = [&](double s) {
    try {
      return min_modulus(spectrum_at(s));
    } catch (const Error& e) {
      if (e.code() == Errc::degenerate_steady_state) return 0.0;
      throw;
    }
  };
  return minimize_on_grid(f, grid, refine_rounds);
}

namespace {

constexpr double kBranchOverlap = 0.5;

struct BranchPoint {
  cplx lambda;
  cmat vector;  // tracked eigenvector as a d x d operator, computational basis
  double overlap;
};

// Picks the eigenvector with the largest overlap with `reference` (an
// operator in the computational basis).
BranchPoint pick_branch(const Liouvillian& l, const LiouvillianSpectrum& spec, const cmat& reference) {
  const cvec ref = vectorize(l.to_frame(reference)).normalized();
  Index best = -1;
  double best_overlap = -1.0;
  for (Index j = 0; j < spec.vectors.cols(); ++j) {
    const double o = std::abs(spec.vectors.col(j).dot(ref));
    if (o > best_overlap) {
      best_overlap = o;
      best = j;
    }
  }
  if (best < 0 || best_overlap < kBranchOverlap)
    throw Error(Errc::branch_tracking,
                "coherence branch ambiguous (best overlap " + std::to_string(best_overlap) + ")");
  cmat v = l.from_frame(devectorize(spec.vectors.col(best)));
  v /= v.norm();
  return {spec.values[static_cast<size_t>(best)], std::move(v), best_overlap};
}

cmat coherence(const HamiltonianSpec& h) { return h.vectors.col(1) * h.vectors.col(0).adjoint(); }

}  // namespace

CoherenceBranch track_coherence(const GeneratorAt& generator_at, const HamiltonianAt& hamiltonian_at,
                                const std::vector<double>& grid) {
  CoherenceBranch out;
  cmat previous;
  for (double s : grid) {
    const Liouvillian l = generator_at(s);
    const LiouvillianSpectrum spec = eig_liouvillian(l);
    const cmat ref = previous.size() == 0 ? coherence(hamiltonian_at(s)) : previous;
    BranchPoint p = pick_branch(l, spec, ref);
    out.s.push_back(s);
    out.lambda.push_back(p.lambda);
    out.overlap.push_back(p.overlap);
    previous = std::move(p.vector);
  }
  return out;
}

GapScan gap_relevant(const GeneratorAt& generator_at, const HamiltonianAt& hamiltonian_at,
                     const std::vector<double>& grid, int refine_rounds) {
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  std::map<double, BranchPoint> pts;
  cmat previous;
  for (double s : sorted) {
    const Liouvillian l = generator_at(s);
    const cmat ref = previous.size() == 0 ? coherence(hamiltonian_at(s)) : previous;
    BranchPoint p = pick_branch(l, eig_liouvillian(l), ref);
    previous = p.vector;
    pts.emplace(s, std::move(p));
  }
  auto argmin = [&] {
    return std::min_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
      return std::abs(a.second.lambda) < std::abs(b.second.lambda);
    });
  };
  for (int r = 0; r < refine_rounds && pts.size() > 1; ++r) {
    auto it = argmin();
    const double s0 = it->first;
    const cmat ref = it->second.vector;
    std::vector<double> mids;
    if (it != pts.begin()) mids.push_back(0.5 * (std::prev(it)->first + s0));
    if (std::next(it) != pts.end()) mids.push_back(0.5 * (std::next(it)->first + s0));
    for (double m : mids) {
      const Liouvillian l = generator_at(m);
      pts.emplace(m, pick_branch(l, eig_liouvillian(l), ref));
    }
  }
  auto it = argmin();
  GapScan out;
  out.value = std::abs(it->second.lambda);
  out.argmin = it->first;
  out.evaluations = pts.size();
  out.grid_points = grid.size();
  double res = std::numeric_limits<double>::infinity();
  if (it != pts.begin()) res = std::min(res, it->first - std::prev(it)->first);
  if (std::next(it) != pts.end()) res = std::min(res, std::next(it)->first - it->first);
  out.resolution = std::isfinite(res) ? res : 0.0;
  return out;
}

nlohmann::json GapReport::to_json() const {
  return nlohmann::json{{"delta_adia", delta_adia},
                        {"delta_relax", delta_relax},
                        {"delta_relevant", delta_relevant},
                        {"argmin_s_adia", argmin_s_adia},
                        {"argmin_s_relevant", argmin_s_relevant},
                        {"sigma1_final", sigma1_final},
                        {"grid_points", grid_points},
                        {"grid_resolution", grid_resolution}};
}

Claim1Result claim1_check(const LiouvillianSpectrum& final_spectrum, const GapReport& report) {
  Claim1Result r;
  r.sigma1_final = final_spectrum.size() > 1 ? final_spectrum.sigma(1) : 0.0;
  r.delta_adia = report.delta_adia;
  r.delta_relax = report.delta_relax;
  const double zero_tol = std::max(final_spectrum.null_tol, 1e-12);
  if (std::abs(r.sigma1_final) > zero_tol) {
    r.detail = "sigma_1 nonzero; claim not applicable";
    return r;
  }
  r.holds = r.delta_adia <= r.delta_relax + 1e-9;
  r.detail = r.holds ? "sigma_1 = 0 and delta_adia <= delta_relax"
                     : "sigma_1 = 0 but delta_adia exceeds delta_relax";
  return r;
}

namespace {

bool frames_match(const Liouvillian& a, const Liouvillian& b) {
  if (a.frame.size() == 0 && b.frame.size() == 0) return true;
  if (a.frame.size() != b.frame.size()) return false;
  return (a.frame - b.frame).cwiseAbs().maxCoeff() <= 1e-14;
}

}  // namespace

RescaleScan rescale_scan(const Liouvillian& coherent, const Liouvillian& dissipative,
                         const std::vector<double>& alphas) {
  if (coherent.dim != dissipative.dim) throw Error(Errc::dimension, "rescale parts differ in dimension");
  const bool shared = frames_match(coherent, dissipative);
  const cmat k = shared ? coherent.matrix : coherent.computational();
  const cmat d = shared ? dissipative.matrix : dissipative.computational();
  const cmat frame = shared ? coherent.frame : cmat();

  RescaleScan out;
  out.commutator_norm = norm_inf(k * d - d * k);
  out.commute = out.commutator_norm <= 1e-10 * std::max(1.0, norm_inf(k) * norm_inf(d));

  auto real_branch_minimal = [&](double alpha, std::vector<cplx>* values) {
    const LiouvillianSpectrum spec = eig_liouvillian(Liouvillian{alpha * k + d, coherent.dim, frame});
    if (values) *values = spec.values;
    const double tol = std::max(spec.null_tol, 1e-12);
    size_t best = 1;
    for (size_t j = 1; j < spec.size(); ++j) {
      const double mj = std::abs(spec.values[j]), mb = std::abs(spec.values[best]);
      // Ties between modulus-equal branches resolve toward sigma = 0.
      if (mj < mb - tol || (std::abs(mj - mb) <= tol && std::abs(spec.sigma(j)) < std::abs(spec.sigma(best))))
        best = j;
    }
    return std::abs(spec.sigma(best)) <= tol;
  };

  for (double a : alphas) {
    std::vector<cplx> values;
    const bool on_real = real_branch_minimal(a, &values);
    out.alphas.push_back(a);
    out.spectra.push_back(std::move(values));
    out.min_on_real_branch.push_back(on_real);
  }
  for (size_t i = 1; i < out.alphas.size(); ++i) {
    if (!out.min_on_real_branch[i - 1] && out.min_on_real_branch[i]) {
      double lo = out.alphas[i - 1], hi = out.alphas[i];
      for (int it = 0; it < 60 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (real_branch_minimal(mid, nullptr) ? hi : lo) = mid;
      }
      out.alpha_star = 0.5 * (lo + hi);
      break;
    }
  }
  return out;
}

}  // namespace ssprep
