#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "agora/common.hpp"

namespace agora {

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h_init = 1e-3;
  double h_min = 1e-12;
  long max_steps = 2000000;
};

template <std::size_t N>
struct OdeTrace {
  std::vector<double> t;
  std::vector<std::array<double, N>> y;

  // Piecewise-linear sample between accepted steps.
  std::array<double, N> at(double tq) const {
    if (tq <= t.front()) return y.front();
    if (tq >= t.back()) return y.back();
    const auto it = std::lower_bound(t.begin(), t.end(), tq);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double w = (tq - t[k - 1]) / (t[k] - t[k - 1]);
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = (1.0 - w) * y[k - 1][i] + w * y[k][i];
    return out;
  }
};

// Dormand-Prince 5(4) with FSAL and PI-free step control. f(t, y) returns
// dy/dt. Records every accepted step.
template <std::size_t N, class F>
OdeTrace<N> integrate_ode(const F& f, std::array<double, N> y0, double t0, double t1,
                          const OdeOptions& opt = {}) {
  using State = std::array<double, N>;
  const auto axpy = [](State& out, const State& base, double h,
                       std::initializer_list<std::pair<double, const State*>> terms) {
    for (std::size_t i = 0; i < N; ++i) {
      double acc = 0.0;
      for (const auto& [c, k] : terms) acc += c * (*k)[i];
      out[i] = base[i] + h * acc;
    }
  };

  OdeTrace<N> trace;
  trace.t.push_back(t0);
  trace.y.push_back(y0);

  State y = y0;
  State k1 = f(t0, y);
  double t = t0;
  double h = std::min(opt.h_init, t1 - t0);
  if (h <= 0.0) return trace;

  for (long step = 0; step < opt.max_steps && t < t1; ++step) {
    h = std::min(h, t1 - t);
    State k2, k3, k4, k5, k6, ytmp, y5, k7;
    axpy(ytmp, y, h, {{1.0 / 5, &k1}});
    k2 = f(t + h / 5, ytmp);
    axpy(ytmp, y, h, {{3.0 / 40, &k1}, {9.0 / 40, &k2}});
    k3 = f(t + 3.0 * h / 10, ytmp);
    axpy(ytmp, y, h, {{44.0 / 45, &k1}, {-56.0 / 15, &k2}, {32.0 / 9, &k3}});
    k4 = f(t + 4.0 * h / 5, ytmp);
    axpy(ytmp, y, h,
         {{19372.0 / 6561, &k1}, {-25360.0 / 2187, &k2}, {64448.0 / 6561, &k3},
          {-212.0 / 729, &k4}});
    k5 = f(t + 8.0 * h / 9, ytmp);
    axpy(ytmp, y, h,
         {{9017.0 / 3168, &k1}, {-355.0 / 33, &k2}, {46732.0 / 5247, &k3}, {49.0 / 176, &k4},
          {-5103.0 / 18656, &k5}});
    k6 = f(t + h, ytmp);
    axpy(y5, y, h,
         {{35.0 / 384, &k1}, {500.0 / 1113, &k3}, {125.0 / 192, &k4}, {-2187.0 / 6784, &k5},
          {11.0 / 84, &k6}});
    k7 = f(t + h, y5);  // FSAL: reused as k1 on acceptance

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double y4i = y[i] + h * (5179.0 / 57600 * k1[i] + 7571.0 / 16695 * k3[i] +
                                     393.0 / 640 * k4[i] - 92097.0 / 339200 * k5[i] +
                                     187.0 / 2100 * k6[i] + 1.0 / 40 * k7[i]);
      const double scale = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      const double e = (y5[i] - y4i) / scale;
      err += e * e;
    }
    err = std::sqrt(err / N);

    if (err <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;
      trace.t.push_back(t);
      trace.y.push_back(y);
    }
    const double factor =
        err <= 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
    if (h < opt.h_min && t < t1)
      throw NumericalError("integrate_ode: step size underflow (stiff system)");
  }
  if (t < t1) throw NumericalError("integrate_ode: max step count exceeded");
  return trace;
}

}  // namespace agora
