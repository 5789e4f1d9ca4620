#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

#include "agora/common.hpp"

namespace agora {

struct LbfgsOptions {
  int memory = 8;
  int max_iter = 10000;
  double grad_tol = 1e-10;  // on the gradient infinity norm
  int max_backtracks = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  double f = kNan;
  double grad_inf_norm = kNan;
  int iterations = 0;
  bool converged = false;
};

// Limited-memory BFGS with Armijo backtracking. fg(x, grad) returns f and
// fills grad. Line-search failure falls back to a memory-cleared steepest
// descent step before giving up.
template <class FG>
LbfgsResult lbfgs_minimize(const FG& fg, std::vector<double> x0, const LbfgsOptions& opt = {}) {
  const std::size_t n = x0.size();
  const auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  };
  const auto inf_norm = [n](const std::vector<double>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s = std::max(s, std::abs(a[i]));
    return s;
  };

  LbfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n), g_new(n), x_new(n), dir(n);
  res.f = fg(res.x, g);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  double gamma = 1.0;

  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    res.grad_inf_norm = inf_norm(g);
    if (res.grad_inf_norm <= opt.grad_tol * (1.0 + std::abs(res.f))) {
      res.converged = true;
      return res;
    }

    // Two-loop recursion for the quasi-Newton direction.
    dir = g;
    std::vector<double> alpha_c(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha_c[k] = rho_hist[k] * dot(s_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha_c[k] * y_hist[k][i];
    }
    for (std::size_t i = 0; i < n; ++i) dir[i] *= gamma;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha_c[k] - beta) * s_hist[k][i];
    }
    for (std::size_t i = 0; i < n; ++i) dir[i] = -dir[i];

    double slope = dot(g, dir);
    if (!(slope < 0.0)) {  // not a descent direction: restart from steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      gamma = 1.0;
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = -dot(g, g);
      if (!(slope < 0.0)) {  // gradient exactly zero
        res.converged = true;
        return res;
      }
    }

    // Armijo backtracking.
    double step = 1.0;
    double f_new = kNan;
    bool accepted = false;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + step * dir[i];
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!s_hist.empty()) {  // retry once as plain gradient descent
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        gamma = 1.0;
        continue;
      }
      return res;  // converged stays false: caller decides how to restart
    }

    // Curvature pair update; skip near-degenerate pairs.
    std::vector<double> s_vec(n), y_vec(n);
    for (std::size_t i = 0; i < n; ++i) {
      s_vec[i] = x_new[i] - res.x[i];
      y_vec[i] = g_new[i] - g[i];
    }
    const double sy = dot(s_vec, y_vec);
    const double yy = dot(y_vec, y_vec);
    if (sy > 1e-12 * std::sqrt(dot(s_vec, s_vec)) * std::sqrt(yy) && yy > 0.0) {
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
      rho_hist.push_back(1.0 / sy);
      gamma = sy / yy;
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    res.x = x_new;
    res.f = f_new;
    g = g_new;
  }
  res.grad_inf_norm = inf_norm(g);
  return res;
}

}  // namespace agora
