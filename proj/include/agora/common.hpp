#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace agora {

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Invalid user-facing configuration. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A solver, optimizer, or root-finder failed to produce a usable result.
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// erfc keeps relative accuracy deep in the left tail, where 1 - cdf(-z) loses it.
inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

// 1 / (1 + exp(-x)) without overflow for large |x|.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct RootOptions {
  double tol = 1e-12;
  int max_iter = 200;
};

// Bisection; requires f(lo) and f(hi) of opposite sign (or an exact zero).
template <class F>
double bisect(F&& f, double lo, double hi, RootOptions opt = {}) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  const double fhi = f(hi);
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw NumericalError("bisect: endpoints do not bracket a root");
  for (int i = 0; i < opt.max_iter && hi - lo > opt.tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// All sign changes of f on [lo, hi], bracketed on n+1 equispaced nodes and
// refined by bisection. An exact zero at a node counts once.
template <class F>
std::vector<double> scan_roots(F&& f, double lo, double hi, int n, RootOptions opt = {}) {
  std::vector<double> roots;
  double x0 = lo;
  double f0 = f(lo);
  for (int i = 1; i <= n; ++i) {
    const double x1 = lo + (hi - lo) * i / n;
    const double f1 = f(x1);
    if (f0 == 0.0)
      roots.push_back(x0);
    else if (f1 != 0.0 && (f0 > 0.0) != (f1 > 0.0))
      roots.push_back(bisect(f, x0, x1, opt));
    x0 = x1;
    f0 = f1;
  }
  if (f0 == 0.0) roots.push_back(x0);
  return roots;
}

// Smallest x in [lo, hi] where pred flips away from pred(lo); pred must flip
// exactly once in the bracket for the result to be meaningful.
template <class P>
double bisect_predicate(P&& pred, double lo, double hi, double tol, int max_iter = 200) {
  const bool plo = pred(lo);
  if (pred(hi) == plo) throw NumericalError("bisect_predicate: no flip in bracket");
  for (int i = 0; i < max_iter && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid) == plo)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace agora
