#pragma once

#include "ssprep/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace ssprep {

struct StepControl {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_initial = 0.0;  // 0 selects a heuristic first step
  double h_min = 1e-15;    // relative to the interval length
  size_t max_steps = 50'000'000;
};

struct IntegrationStats {
  size_t accepted = 0;
  size_t rejected = 0;
  size_t evaluations = 0;
};

// Scaled RMS norm of err with weights atol + rtol * max(|a|, |b|).
template <class State>
double scaled_rms(const State& err, const State& a, const State& b, const StepControl& c) {
  const auto w = (c.atol + c.rtol * a.cwiseAbs().cwiseMax(b.cwiseAbs()).array()).matrix();
  const double sum = (err.cwiseAbs().array() / w.array()).square().sum();
  return std::sqrt(sum / static_cast<double>(err.size()));
}

// Dormand-Prince 5(4) with the order-4 continuous extension. `f(s, y)` is the
// derivative; `on_sample(s, y)` is called at every requested sample point
// (ascending, inside [s0, s1]) from the dense output.
template <class State>
State integrate_dopri5(const std::function<State(double, const State&)>& f, double s0, double s1, State y,
                       const StepControl& ctl, const std::vector<double>& samples,
                       const std::function<void(double, const State&)>& on_sample, IntegrationStats* stats) {
  static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                          a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656, a71 = 35.0 / 384, a73 = 500.0 / 1113,
                          a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  IntegrationStats local;
  IntegrationStats& st = stats ? *stats : local;
  const double span = s1 - s0;
  if (!(span >= 0.0)) throw Error(Errc::parameter, "integration interval reversed");
  size_t next_sample = 0;
  auto emit_until = [&](double upto, auto&& value_at) {
    while (next_sample < samples.size() && samples[next_sample] <= upto) {
      on_sample(samples[next_sample], value_at(samples[next_sample]));
      ++next_sample;
    }
  };
  if (span == 0.0) {
    emit_until(s1, [&](double) { return y; });
    return y;
  }

  State k1 = f(s0, y);
  ++st.evaluations;
  double h = ctl.h_initial;
  if (h <= 0.0) {
    const double yn = y.norm(), fn = k1.norm();
    h = (fn > 0.0 && yn > 0.0) ? 0.01 * yn / fn : 1e-6 * span;
    h = std::clamp(h, 1e-12 * span, 0.1 * span);
  }
  const double h_floor = ctl.h_min * span;
  double s = s0;
  bool rejected_last = false;
  emit_until(s0, [&](double) { return y; });
  while (s < s1) {
    if (st.accepted + st.rejected >= ctl.max_steps)
      throw Error(Errc::integration, "step budget exhausted at s = " + std::to_string(s));
    if (s + h > s1 || s1 - (s + h) < 1e-12 * span) h = s1 - s;
    const State k2 = f(s + h / 5, y + h * a21 * k1);
    const State k3 = f(s + 3 * h / 10, y + h * (a31 * k1 + a32 * k2));
    const State k4 = f(s + 4 * h / 5, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const State k5 = f(s + 8 * h / 9, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State k6 = f(s + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const State y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = f(s + h, y1);
    st.evaluations += 6;
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = scaled_rms(err, y, y1, ctl);
    if (!std::isfinite(en)) throw Error(Errc::integration, "non-finite state at s = " + std::to_string(s));
    if (en <= 1.0) {
      const State ydiff = y1 - y;
      const State bspl = h * k1 - ydiff;
      const State r4 = ydiff - h * k7 - bspl;
      const State r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      const double s_old = s, h_old = h;
      const State y_old = y;
      emit_until(s + h, [&](double q) {
        const double th = (q - s_old) / h_old, th1 = 1.0 - th;
        return State(y_old + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5))));
      });
      s = (s1 - (s + h) < 1e-12 * span) ? s1 : s + h;
      y = y1;
      k1 = k7;
      ++st.accepted;
      double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
      fac = std::clamp(fac, 0.2, rejected_last ? 1.0 : 5.0);
      h *= fac;
      rejected_last = false;
    } else {
      ++st.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      rejected_last = true;
      if (h < h_floor) throw Error(Errc::integration, "step size underflow at s = " + std::to_string(s));
    }
  }
  emit_until(s1, [&](double) { return y; });
  return y;
}

}  // namespace ssprep
