#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "agora/common.hpp"
#include "agora/linalg.hpp"
#include "agora/market.hpp"
#include "agora/ode.hpp"

namespace agora {

struct LearningParams {
  double r = 0.01;    // inverse memory: per-round learning rate
  double alpha = 0.05;  // discount applied to the unplayed market's attraction
  double beta = 1.0 / 0.11;  // intensity of choice

  // Log scale separating "central" from "outer" attraction differences:
  // the unplayed attraction decays once beta*|delta| exceeds -ln(alpha).
  double log_scale() const { return -std::log(alpha) / beta; }

  void validate() const {
    // r = 0 freezes the attractions: legal for simulation, degenerate (zero
    // drift and diffusion in rescaled time) for the continuum analysis.
    if (!(r >= 0.0) || r > 1.0) throw ConfigError("LearningParams: r must lie in [0, 1]");
    if (!(alpha >= 0.0) || alpha > 1.0)
      throw ConfigError("LearningParams: alpha must lie in [0, 1]");
    if (!(beta > 0.0) || !std::isfinite(beta))
      throw ConfigError("LearningParams: beta must be positive and finite");
  }
};

struct AttractionState {
  double a_1 = 0.0;
  double a_2 = 0.0;
  double delta() const { return a_1 - a_2; }
};

inline double softmax_choice(double delta, double beta) { return logistic(beta * delta); }

// Per-unit-time mean of the attraction jump (time t = r * round).
inline Vec2 drift(const AttractionState& a, const PayoffTable& t, const LearningParams& lp) {
  const double s = softmax_choice(a.delta(), lp.beta);
  return {(t.p_1 - a.a_1) * s - lp.alpha * a.a_1 * (1.0 - s),
          (t.p_2 - a.a_2) * (1.0 - s) - lp.alpha * a.a_2 * s};
}

// Per-unit-time second moment of the attraction jump (raw, not centered:
// the mean contributes at higher order in r).
inline Sym2 diffusion(const AttractionState& a, const PayoffTable& t, const LearningParams& lp) {
  const double s = softmax_choice(a.delta(), lp.beta);
  const double g_1 = t.q_1 - 2.0 * a.a_1 * t.p_1 + a.a_1 * a.a_1;
  const double g_2 = t.q_2 - 2.0 * a.a_2 * t.p_2 + a.a_2 * a.a_2;
  const double a2 = lp.alpha * lp.alpha;
  return {g_1 * s + a2 * a.a_1 * a.a_1 * (1.0 - s),
          -lp.alpha * (t.p_1 * a.a_2 * s + t.p_2 * a.a_1 * (1.0 - s) - a.a_1 * a.a_2),
          g_2 * (1.0 - s) + a2 * a.a_2 * a.a_2 * s};
}

inline Mat2 drift_jacobian(const AttractionState& a, const PayoffTable& t,
                           const LearningParams& lp) {
  const double s = softmax_choice(a.delta(), lp.beta);
  const double sp = lp.beta * s * (1.0 - s);  // d s / d delta
  return {-s + (t.p_1 - a.a_1) * sp - lp.alpha * (1.0 - s) + lp.alpha * a.a_1 * sp,
          -(t.p_1 - a.a_1) * sp - lp.alpha * a.a_1 * sp,
          -(t.p_2 - a.a_2) * sp - lp.alpha * a.a_2 * sp,
          -(1.0 - s) + (t.p_2 - a.a_2) * sp - lp.alpha * s + lp.alpha * a.a_2 * sp};
}

// Gradients of the diffusion entries: result[0] = d Sigma / d A_1, etc.
inline std::array<Sym2, 2> diffusion_gradient(const AttractionState& a, const PayoffTable& t,
                                              const LearningParams& lp) {
  const double s = softmax_choice(a.delta(), lp.beta);
  const double sp = lp.beta * s * (1.0 - s);
  const double g_1 = t.q_1 - 2.0 * a.a_1 * t.p_1 + a.a_1 * a.a_1;
  const double g_2 = t.q_2 - 2.0 * a.a_2 * t.p_2 + a.a_2 * a.a_2;
  const double a2 = lp.alpha * lp.alpha;
  Sym2 d1, d2;
  d1.xx = (2.0 * a.a_1 - 2.0 * t.p_1) * s + g_1 * sp + 2.0 * a2 * a.a_1 * (1.0 - s) -
          a2 * a.a_1 * a.a_1 * sp;
  d2.xx = -g_1 * sp + a2 * a.a_1 * a.a_1 * sp;
  d1.yy = -g_2 * sp + a2 * a.a_2 * a.a_2 * sp;
  d2.yy = (2.0 * a.a_2 - 2.0 * t.p_2) * (1.0 - s) + g_2 * sp + 2.0 * a2 * a.a_2 * s -
          a2 * a.a_2 * a.a_2 * sp;
  d1.xy = -lp.alpha *
          (t.p_1 * a.a_2 * sp + t.p_2 * (1.0 - s) - t.p_2 * a.a_1 * sp - a.a_2);
  d2.xy = -lp.alpha * (t.p_1 * s - t.p_1 * a.a_2 * sp + t.p_2 * a.a_1 * sp - a.a_1);
  return {d1, d2};
}

// Aggregate-level wrappers: payoffs evaluated for one class at the given
// aggregates, class 1 by default.
inline Vec2 drift(const AttractionState& a, const Aggregates& aggr, const GameParams& par,
                  const LearningParams& lp, int cls = 0) {
  return drift(a, class_payoffs_at(cls, aggr, par), lp);
}
inline Sym2 diffusion(const AttractionState& a, const Aggregates& aggr, const GameParams& par,
                      const LearningParams& lp, int cls = 0) {
  return diffusion(a, class_payoffs_at(cls, aggr, par), lp);
}

struct FixedPoint {
  AttractionState state;
  double delta = 0.0;
  bool stable = false;
  bool central = false;  // |delta| below the log scale: mixed-strategy peak
  Mat2 jacobian;
  Sym2 peak_covariance;  // stationary Gaussian covariance, scaled by r; stable points only
};

struct FixedPointSet {
  std::vector<FixedPoint> points;  // sorted by delta

  int stable_count() const {
    int n = 0;
    for (const auto& p : points) n += p.stable;
    return n;
  }
  std::vector<int> stable_indices() const {
    std::vector<int> idx;
    for (int i = 0; i < static_cast<int>(points.size()); ++i)
      if (points[i].stable) idx.push_back(i);
    return idx;
  }
};

namespace detail {

// Stationary covariance of the linearized diffusion around a stable point:
// J C + C J^T = -r Sigma, written out in the three independent entries.
inline Sym2 lyapunov_covariance(const Mat2& j, const Sym2& sigma, double r) {
  try {
    const auto c = solve3({{{2.0 * j.a, 2.0 * j.b, 0.0},
                            {j.c, j.a + j.d, j.b},
                            {0.0, 2.0 * j.c, 2.0 * j.d}}},
                          {-r * sigma.xx, -r * sigma.xy, -r * sigma.yy});
    return {c[0], c[1], c[2]};
  } catch (const NumericalError&) {
    return {};  // marginal Jacobian: no meaningful Gaussian width
  }
}

}  // namespace detail

// Fixed points of the drift via the scalar equation in delta = A_1 - A_2:
// stationarity pins A_m to a logistic share of its payoff, leaving
// delta = P_1 l(beta delta - ln alpha) - P_2 l(-beta delta - ln alpha).
inline FixedPointSet fixed_points(const PayoffTable& t, const LearningParams& lp) {
  lp.validate();
  FixedPointSet set;
  const auto finish = [&](AttractionState a) {
    FixedPoint fp;
    fp.state = a;
    fp.delta = a.delta();
    fp.jacobian = drift_jacobian(a, t, lp);
    fp.stable = max_eig_real(fp.jacobian) < -1e-10;
    fp.central = std::abs(fp.delta) < lp.log_scale();
    if (fp.stable)
      fp.peak_covariance = detail::lyapunov_covariance(fp.jacobian, diffusion(a, t, lp), lp.r);
    set.points.push_back(fp);
  };

  if (lp.alpha == 0.0) {
    finish({t.p_1, t.p_2});  // unplayed attractions never decay: A relaxes to P
    return set;
  }

  const double la = -std::log(lp.alpha);
  const auto g = [&](double d) {
    return t.p_1 * logistic(lp.beta * d + la) - t.p_2 * logistic(-lp.beta * d + la) - d;
  };
  const auto roots = scan_roots(g, -t.p_2 - 1.0, t.p_1 + 1.0, 4096, {1e-13, 200});
  double last = -kInf;
  for (const double d : roots) {
    if (d - last < 1e-9) continue;  // duplicate from an exact-zero node
    last = d;
    finish({t.p_1 * logistic(lp.beta * d + la), t.p_2 * logistic(-lp.beta * d + la)});
  }
  if (set.points.empty())
    throw NumericalError("fixed_points: no roots (bounded map should always cross)");
  return set;
}

inline FixedPointSet fixed_points(const Aggregates& aggr, const GameParams& par,
                                  const LearningParams& lp, int cls = 0) {
  return fixed_points(class_payoffs_at(cls, aggr, par), lp);
}

// Population aggregate implied by delta-peaks with the given weights: each
// peak contributes its softmax choice probability. Weights are indexed by the
// stable points in delta order.
inline double peak_aggregate(const FixedPointSet& set, const std::vector<double>& weights,
                             double beta) {
  const auto idx = set.stable_indices();
  if (weights.size() != idx.size())
    throw ConfigError("peak_aggregate: one weight per stable point required");
  double sum = 0.0, p = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (weights[k] < -1e-12) throw ConfigError("peak_aggregate: negative weight");
    sum += weights[k];
    p += weights[k] * softmax_choice(set.points[idx[k]].delta, beta);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("peak_aggregate: weights must sum to 1");
  return p;
}

inline Aggregates aggregates_from_peaks(const FixedPointSet& set_1,
                                        const std::vector<double>& weights_1,
                                        const FixedPointSet& set_2,
                                        const std::vector<double>& weights_2, double beta) {
  return {peak_aggregate(set_1, weights_1, beta), peak_aggregate(set_2, weights_2, beta)};
}

enum class SelfConsistentKind { homogeneous_mixed, homogeneous_pure_limit };

struct SelfConsistentState {
  Aggregates aggregates;
  FixedPointSet fixed_points_1;
  FixedPointSet fixed_points_2;
  SelfConsistentKind kind = SelfConsistentKind::homogeneous_mixed;
};

struct SelfConsistentResult {
  std::vector<SelfConsistentState> states;  // every diagonal crossing, ascending
  bool multiple = false;

  // Crossing nearest the symmetric aggregate; mirror-pair ties resolve to
  // the lower aggregate.
  const SelfConsistentState& primary() const {
    if (states.empty()) throw NumericalError("self-consistency: no diagonal crossing");
    std::size_t best = 0;
    for (std::size_t i = 1; i < states.size(); ++i) {
      const double di = std::abs(states[i].aggregates.pbar_1 - 0.5);
      const double db = std::abs(states[best].aggregates.pbar_1 - 0.5);
      if (di < db - 1e-9) best = i;
    }
    return states[best];
  }
};

namespace detail {

// Delta of the distribution's central peak at the given aggregates: the
// stable fixed point flagged central, or failing that the stable point
// nearest delta = 0.
inline double central_delta(const FixedPointSet& set) {
  double best = kNan;
  bool best_central = false;
  for (const auto& p : set.points) {
    if (!p.stable) continue;
    const bool better = std::isnan(best) || (p.central && !best_central) ||
                        (p.central == best_central && std::abs(p.delta) < std::abs(best));
    if (better) {
      best = p.delta;
      best_central = p.central;
    }
  }
  if (std::isnan(best)) throw NumericalError("central_delta: no stable fixed point");
  return best;
}

}  // namespace detail

// Homogeneous steady state: the whole class sits in one peak, so the
// aggregate must reproduce itself through that peak's choice probability.
// Symmetric mode ties class 2 to the mirror aggregate 1 - pbar_1.
inline SelfConsistentResult homogeneous_self_consistent(const GameParams& par,
                                                        const LearningParams& lp,
                                                        bool symmetric = true) {
  par.validate();
  lp.validate();
  SelfConsistentResult res;

  const auto state_at = [&](const Aggregates& aggr) {
    SelfConsistentState st;
    st.aggregates = aggr;
    st.fixed_points_1 = fixed_points(aggr, par, lp, 0);
    st.fixed_points_2 = fixed_points(aggr, par, lp, 1);
    const double edge = std::min(std::min(aggr.pbar_1, 1.0 - aggr.pbar_1),
                                 std::min(aggr.pbar_2, 1.0 - aggr.pbar_2));
    st.kind = edge <= 1e-6 ? SelfConsistentKind::homogeneous_pure_limit
                           : SelfConsistentKind::homogeneous_mixed;
    return st;
  };

  if (symmetric) {
    const auto residual = [&](double x) {
      const auto set = fixed_points({x, 1.0 - x}, par, lp, 0);
      return softmax_choice(detail::central_delta(set), lp.beta) - x;
    };
    for (const double x : scan_roots(residual, 0.0, 1.0, 2048, {1e-12, 200})) {
      // A sign change across a fixed-point-count jump is not a crossing.
      if (std::abs(residual(x)) > 1e-6) continue;
      res.states.push_back(state_at({x, 1.0 - x}));
    }
    res.multiple = res.states.size() > 1;
    if (res.states.empty())
      throw NumericalError("homogeneous_self_consistent: no diagonal crossing");
    return res;
  }

  // Full 2-D mode: damped fixed-point iteration on both aggregates.
  Aggregates aggr{0.5, 0.5};
  for (int it = 0; it < 2000; ++it) {
    const double n1 =
        softmax_choice(detail::central_delta(fixed_points(aggr, par, lp, 0)), lp.beta);
    const double n2 =
        softmax_choice(detail::central_delta(fixed_points(aggr, par, lp, 1)), lp.beta);
    const double step = std::abs(n1 - aggr.pbar_1) + std::abs(n2 - aggr.pbar_2);
    aggr.pbar_1 = 0.5 * aggr.pbar_1 + 0.5 * n1;
    aggr.pbar_2 = 0.5 * aggr.pbar_2 + 0.5 * n2;
    if (step < 1e-12) {
      res.states.push_back(state_at(aggr));
      return res;
    }
  }
  throw NumericalError("homogeneous_self_consistent: 2-D iteration did not converge");
}

struct PopulationFlow {
  std::vector<double> t;
  std::vector<std::array<double, 4>> states;  // (A_1, A_2) for class 1 then class 2
  std::vector<Aggregates> aggregates;
  bool converged = false;  // drift vanished at the endpoint

  // Linear interpolation of the class-1 aggregate; clamps outside the span.
  double pbar_1_at(double tq) const {
    if (t.empty()) throw ConfigError("PopulationFlow: empty trace");
    if (tq <= t.front()) return aggregates.front().pbar_1;
    if (tq >= t.back()) return aggregates.back().pbar_1;
    const auto it = std::lower_bound(t.begin(), t.end(), tq);
    const std::size_t k = static_cast<std::size_t>(it - t.begin());
    const double w = (tq - t[k - 1]) / (t[k] - t[k - 1]);
    return (1.0 - w) * aggregates[k - 1].pbar_1 + w * aggregates[k].pbar_1;
  }
};

// Deterministic mean-field flow of two homogeneous classes: each class's
// attractions follow the drift, with aggregates recomputed from the current
// states every evaluation. Time is in rescaled units t = r * round.
inline PopulationFlow homogeneous_population_dynamics(const AttractionState& init_1,
                                                      const AttractionState& init_2,
                                                      const GameParams& par,
                                                      const LearningParams& lp, double t_end,
                                                      double tolerance = 1e-8) {
  par.validate();
  lp.validate();
  if (!(t_end > 0.0)) throw ConfigError("homogeneous_population_dynamics: t_end must be > 0");
  const auto aggr_of = [&](const std::array<double, 4>& y) {
    return Aggregates{softmax_choice(y[0] - y[1], lp.beta), softmax_choice(y[2] - y[3], lp.beta)};
  };
  const auto rhs = [&](double, const std::array<double, 4>& y) {
    const Aggregates aggr = aggr_of(y);
    const Vec2 m1 = drift({y[0], y[1]}, aggr, par, lp, 0);
    const Vec2 m2 = drift({y[2], y[3]}, aggr, par, lp, 1);
    return std::array<double, 4>{m1.x, m1.y, m2.x, m2.y};
  };

  OdeOptions opt;
  opt.rtol = tolerance;
  opt.atol = tolerance * 1e-3;
  const auto trace =
      integrate_ode(rhs, std::array<double, 4>{init_1.a_1, init_1.a_2, init_2.a_1, init_2.a_2},
                    0.0, t_end, opt);

  PopulationFlow flow;
  flow.t = trace.t;
  flow.states = trace.y;
  flow.aggregates.reserve(trace.y.size());
  for (const auto& y : trace.y) flow.aggregates.push_back(aggr_of(y));
  const auto d_end = rhs(0.0, trace.y.back());
  double nrm = 0.0;
  for (const double v : d_end) nrm += v * v;
  flow.converged = std::sqrt(nrm) <= 1e-8;
  return flow;
}

struct ThresholdAlphas {
  double alpha_1to3 = kNan;      // first fixed point splits into three
  double alpha_3to5 = kNan;      // NaN when no five-point window exists
  double alpha_back_to_3 = kNan;  // upper edge of the five-point window
};

// Fixed-point-count transitions in alpha at frozen aggregates. The count is
// piecewise constant: 1 below the first threshold, then 3, possibly 5 in a
// window, then 3 again.
inline ThresholdAlphas threshold_alphas_fixed_point_count(double beta, const GameParams& par,
                                                          const Aggregates& aggr) {
  const PayoffTable table = class_payoffs_at(0, aggr, par);
  const auto count = [&](double ln_alpha) {
    return static_cast<int>(
        fixed_points(table, {0.01, std::exp(ln_alpha), beta}).points.size());
  };

  // The 1 -> 3 threshold scales like exp(-max(P) beta); start two decades of
  // that scale down.
  double ln_lo = -2.0 * beta * std::max(table.p_1, table.p_2);
  ln_lo = std::max(ln_lo, std::log(1e-290));
  while (count(ln_lo) != 1 && ln_lo > std::log(1e-290) + 1.0) ln_lo -= 2.3;
  const double ln_hi = 0.0;
  if (count(ln_lo) != 1 || count(ln_hi) < 3)
    throw NumericalError("threshold_alphas: no 1 to 3 transition in range");

  ThresholdAlphas out;
  out.alpha_1to3 = std::exp(
      bisect_predicate([&](double la) { return count(la) >= 3; }, ln_lo, ln_hi, 1e-9, 300));

  // Five-point window: geometric sweep above the first threshold.
  const double ln_start = std::log(out.alpha_1to3) + 1e-6;
  double ln_five = kNan;
  const int steps = 400;
  for (int i = 1; i <= steps; ++i) {
    const double la = ln_start + (ln_hi - ln_start) * i / steps;
    if (count(la) >= 5) {
      ln_five = la;
      break;
    }
  }
  if (std::isnan(ln_five)) return out;
  out.alpha_3to5 = std::exp(bisect_predicate([&](double la) { return count(la) >= 5; },
                                             std::log(out.alpha_1to3), ln_five, 1e-9, 300));
  if (count(ln_hi) >= 5) return out;  // window never closes below alpha = 1
  out.alpha_back_to_3 = std::exp(bisect_predicate([&](double la) { return count(la) < 5; },
                                                  ln_five, ln_hi, 1e-9, 300));
  return out;
}

}  // namespace agora
