#include "ssprep/ttss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ssprep {

std::string_view to_string(TTSSMethod m) noexcept {
  switch (m) {
    case TTSSMethod::adiabatic: return "adiabatic";
    case TTSSMethod::relaxation: return "relaxation";
    case TTSSMethod::instantaneous_adiabatic: return "instantaneous_adiabatic";
  }
  return "unknown";
}

std::string flag_names(unsigned flags) {
  std::string out;
  auto add = [&](unsigned bit, const char* name) {
    if (!(flags & bit)) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(kFlagNonMonotone, "non_monotone");
  add(kFlagAlreadyConverged, "already_converged");
  add(kFlagResidual, "residual");
  return out;
}

TTSSRecord solve_ttss(const std::function<double(double)>& distance, double epsilon, double t_probe, double t_max,
                      TTSSMethod method, const TTSSOptions& options) {
  if (!(epsilon > 0.0)) throw Error(Errc::parameter, "epsilon must be positive");
  if (!(t_probe > 0.0) || !(t_max > t_probe)) throw Error(Errc::parameter, "invalid probe window");
  TTSSRecord rec;
  rec.method = method;
  rec.epsilon = epsilon;
  double best_t = 0.0, best_res = std::numeric_limits<double>::infinity();
  auto eval = [&](double t) {
    ++rec.iterations;
    const double d = distance(t);
    if (!std::isfinite(d) || d < 0.0) throw Error(Errc::integration, "distance evaluation failed");
    if (std::abs(d - epsilon) < best_res) {
      best_res = std::abs(d - epsilon);
      best_t = t;
    }
    return d;
  };
  auto finish = [&]() {
    rec.tau = best_t;
    rec.residual = best_res;
    if (best_res > options.accept_fraction * epsilon) rec.flags |= kFlagResidual;
    return rec;
  };

  double lo = t_probe, dlo = eval(lo);
  if (dlo <= epsilon) {
    rec.flags |= kFlagAlreadyConverged;
    rec.tau = lo;
    rec.residual = std::abs(dlo - epsilon);
    return rec;
  }
  double hi = lo, dhi = dlo;
  for (;;) {
    hi = 2.0 * lo;
    if (hi > t_max) throw Error(Errc::timeout, "no crossing below t_max = " + std::to_string(t_max));
    dhi = eval(hi);
    if (dhi <= epsilon) break;
    if (dhi > dlo * (1.0 + 1e-9)) rec.flags |= kFlagNonMonotone;
    lo = hi;
    dlo = dhi;
  }

  // Illinois iteration on f(x) = ln d(e^x) - ln eps; fa > 0 >= fb.
  const double le = std::log(epsilon);
  double xa = std::log(lo), xb = std::log(hi);
  double fa = std::log(dlo) - le, fb = dhi > 0.0 ? std::log(dhi) - le : -std::numeric_limits<double>::max();
  int side = 0;
  while (rec.iterations < options.max_iterations) {
    if (std::exp(xb) - std::exp(xa) <= options.rel_tol * std::exp(xb)) break;
    if (best_res <= options.residual_fraction * epsilon) break;
    double x = xb - fb * (xb - xa) / (fb - fa);
    const double margin = 0.01 * (xb - xa);
    if (!std::isfinite(x) || x <= xa + margin || x >= xb - margin) x = 0.5 * (xa + xb);
    const double d = eval(std::exp(x));
    const double f = d > 0.0 ? std::log(d) - le : -std::numeric_limits<double>::max();
    if (f > 0.0) {
      xa = x;
      fa = f;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      xb = x;
      fb = f;
      if (side == +1) fa *= 0.5;
      side = +1;
    }
  }
  return finish();
}

TTSSRecord ttss_relax(const Liouvillian& l, const DensityMatrix& rho0, const cmat& target, double epsilon,
                      const TTSSOptions& options) {
  const RelaxPropagator prop(l);
  const double probe = options.t_probe > 0.0 ? options.t_probe : 1.0 / norm_inf(l.matrix);
  const double t_max = options.t_max > 0.0 ? options.t_max : 1e8 / gap_relax(l);
  return solve_ttss(
      [&](double t) { return trace_norm_distance(hermitian_part(prop.apply(t, rho0.matrix())), target); }, epsilon,
      probe, t_max, TTSSMethod::relaxation, options);
}

TTSSRecord ttss_relax(const Liouvillian& l, const DensityMatrix& rho0, double epsilon, const TTSSOptions& options) {
  return ttss_relax(l, rho0, steady_state(l).matrix(), epsilon, options);
}

namespace {

std::pair<double, double> schedule_window(const Schedule& schedule, const TTSSOptions& options) {
  const Liouvillian l1 = schedule.generator_at(1.0);
  const double probe = options.t_probe > 0.0 ? options.t_probe : 1.0 / norm_inf(l1.matrix);
  if (options.t_max > 0.0) return {probe, options.t_max};
  // A final gap below the null tolerance (thermally trapped generators) is
  // taken at that tolerance.
  double gap = 1e-10 * norm_inf(l1.matrix);
  try {
    gap = std::max(gap, gap_relax(l1));
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate_steady_state) throw;
  }
  return {probe, 1e8 / gap};
}

}  // namespace

TTSSRecord ttss_adia(const Schedule& schedule, double epsilon, const TTSSOptions& options,
                     const PropagateOptions& propagate) {
  const auto [probe, t_max] = schedule_window(schedule, options);
  const cmat target = schedule.steady_at(1.0);
  PropagateOptions po = propagate;
  po.sample_count = 0;
  po.track_distance = false;
  return solve_ttss(
      [&](double tau) {
        const Trajectory traj = propagate_adiabatic(schedule.with_tau(tau), po);
        return trace_norm_distance(hermitian_part(traj.final_rho), target);
      },
      epsilon, probe, t_max, TTSSMethod::adiabatic, options);
}

TTSSRecord ttss_instantaneous(const Schedule& schedule, double epsilon, const TTSSOptions& options,
                              PropagateOptions propagate) {
  const auto [probe, t_max] = schedule_window(schedule, options);
  propagate.sample_count = std::max<size_t>(propagate.sample_count, 401);
  propagate.track_distance = true;
  return solve_ttss([&](double tau) { return propagate_adiabatic(schedule.with_tau(tau), propagate).max_tnd(); },
                    epsilon, probe, t_max, TTSSMethod::instantaneous_adiabatic, options);
}

TTSSRecord ttss_fermion_relax(const FermionModel& model, double epsilon, const TTSSOptions& options) {
  const FermionRelaxation relax(model, CovarianceMatrix::maximally_mixed(model.n));
  const rmat x = fermion_flow(model, 1.0).X;
  const double probe = options.t_probe > 0.0 ? options.t_probe : 1.0 / x.cwiseAbs().rowwise().sum().maxCoeff();
  const double t_max = options.t_max > 0.0 ? options.t_max : 1e8 / fermion_gap_relax(model);
  return solve_ttss([&](double t) { return relax.bures_to_steady(t); }, epsilon, probe, t_max,
                    TTSSMethod::relaxation, options);
}

TTSSRecord ttss_fermion_adia(const FermionModel& model, double epsilon, const TTSSOptions& options,
                             const FermionPropagateOptions& propagate) {
  const CovarianceMatrix target = fermion_steady(model, 1.0);
  const rmat x = fermion_flow(model, 1.0).X;
  const double probe = options.t_probe > 0.0 ? options.t_probe : 1.0 / x.cwiseAbs().rowwise().sum().maxCoeff();
  const double t_max = options.t_max > 0.0 ? options.t_max : 1e8 / fermion_gap_relax(model);
  return solve_ttss(
      [&](double tau) { return bures_gaussian(propagate_fermion_adiabatic(model, tau, propagate).final_state, target); },
      epsilon, probe, t_max, TTSSMethod::adiabatic, options);
}

double estimate_relax(double delta_relax, double prefactor, double epsilon) {
  if (!(delta_relax > 0.0) || !(prefactor > 0.0) || !(epsilon > 0.0))
    throw Error(Errc::parameter, "relaxation estimate needs positive inputs");
  return std::log(prefactor / epsilon) / delta_relax;
}

double estimate_adia(double b, double epsilon) {
  if (!(b >= 0.0) || !(epsilon > 0.0)) throw Error(Errc::parameter, "adiabatic estimate needs B >= 0, eps > 0");
  return b / epsilon;
}

LinearFit fit_linear(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(Errc::dimension, "fit columns differ in length");
  if (xs.size() < 3) throw Error(Errc::usage, "fit needs at least three points");
  for (size_t i = 0; i < xs.size(); ++i)
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw Error(Errc::domain, "fit inputs must be finite");
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw Error(Errc::domain, "fit abscissae are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.points = xs.size();
  return fit;
}

ScalingEstimate fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(Errc::dimension, "fit columns differ in length");
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw Error(Errc::domain, "log-log fit needs positive data");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  const LinearFit f = fit_linear(lx, ly);
  return {std::exp(f.intercept), f.slope, f.r_squared, EstimateKind::power_law_fit, f.points};
}

}  // namespace ssprep
