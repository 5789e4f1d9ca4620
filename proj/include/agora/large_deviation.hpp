#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "agora/common.hpp"
#include "agora/fokker_planck.hpp"
#include "agora/linalg.hpp"
#include "agora/market.hpp"
#include "agora/ode.hpp"
#include "agora/optimize.hpp"

namespace agora {

struct DiscretePath {
  std::vector<double> times;  // uniform grid
  std::vector<AttractionState> states;
  double action = kNan;
};

// Drift/diffusion field for the action machinery. The market game supplies
// one concrete model; conservative test systems supply others.
struct MarketKmModel {
  PayoffTable table;
  LearningParams learning;

  Vec2 mu(Vec2 a) const { return drift({a.x, a.y}, table, learning); }
  Mat2 mu_jac(Vec2 a) const { return drift_jacobian({a.x, a.y}, table, learning); }
  Sym2 sigma(Vec2 a) const { return diffusion({a.x, a.y}, table, learning); }
  std::array<Sym2, 2> sigma_grad(Vec2 a) const {
    return diffusion_gradient({a.x, a.y}, table, learning);
  }
};

namespace detail {

// Onsager-Machlup action of a discrete path under the midpoint rule:
// S = sum_k (dt/2) rho^T W rho with rho the velocity residual against the
// drift and W the inverse diffusion, both at segment midpoints. Optionally
// accumulates the gradient with respect to interior states (2 doubles per
// state, endpoints pinned) and reports whether the eigenvalue floor fired.
template <class Model>
double path_action_core(const Model& model, const std::vector<Vec2>& states, double dt,
                        std::vector<double>* grad = nullptr, bool* floored = nullptr) {
  const std::size_t n_seg = states.size() - 1;
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  double action = 0.0;
  for (std::size_t k = 0; k < n_seg; ++k) {
    const Vec2 left = states[k], right = states[k + 1];
    const Vec2 mid = 0.5 * (left + right);
    const Vec2 vel = (1.0 / dt) * (right - left);
    const Vec2 rho = vel - model.mu(mid);

    Sym2 sig = model.sigma(mid);
    const double floor = 1e-12 * sig.trace();
    if (sig.min_eig() < floor) {
      sig = floor_eigenvalues(sig, floor);
      if (floored) *floored = true;
    }
    const Sym2 w = inverse(sig);
    const Vec2 u = w * rho;
    action += 0.5 * dt * dot(rho, u);

    if (!grad) continue;
    const Mat2 jt = transpose(model.mu_jac(mid));
    const Vec2 jtu = jt * u;
    const auto sg = model.sigma_grad(mid);
    // Shared terms: midpoint dependence is half per endpoint.
    const double qx = -0.25 * dt * sg[0].quad(u);
    const double qy = -0.25 * dt * sg[1].quad(u);
    if (k > 0) {  // left endpoint is interior variable k-1
      (*grad)[2 * (k - 1)] += -u.x - 0.5 * dt * jtu.x + qx;
      (*grad)[2 * (k - 1) + 1] += -u.y - 0.5 * dt * jtu.y + qy;
    }
    if (k + 1 < states.size() - 1) {  // right endpoint is interior variable k
      (*grad)[2 * k] += u.x - 0.5 * dt * jtu.x + qx;
      (*grad)[2 * k + 1] += u.y - 0.5 * dt * jtu.y + qy;
    }
  }
  return action;
}

// Deterministic relaxation released from the saddle along its unstable
// direction toward `target`, resampled to n_steps+1 points by arc length.
// Reversing it gives a flow-informed uphill initial path.
template <class Model>
std::vector<Vec2> relaxation_states(const Model& model, Vec2 saddle, Vec2 target, int n_steps,
                                    double t_relax = 100.0) {
  const Mat2 j = model.mu_jac(saddle);
  const double lam = max_eig_real(j);
  Vec2 dir = eigenvector(j, lam);
  if (dot(dir, target - saddle) < 0.0) dir = -1.0 * dir;
  const double eps = 1e-4 * std::max(1.0, norm(target - saddle));

  const auto rhs = [&](double, const std::array<double, 2>& y) {
    const Vec2 m = model.mu({y[0], y[1]});
    return std::array<double, 2>{m.x, m.y};
  };
  OdeOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  const Vec2 start = saddle + eps * dir;
  const auto trace = integrate_ode(rhs, std::array<double, 2>{start.x, start.y}, 0.0, t_relax, opt);

  std::vector<Vec2> pts;
  pts.push_back(saddle);
  for (const auto& y : trace.y) pts.push_back({y[0], y[1]});
  pts.push_back(target);  // flow ends exponentially close; pin exactly

  std::vector<double> arc(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + norm(pts[i] - pts[i - 1]);
  const double total = arc.back();
  std::vector<Vec2> out(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) {
    const double s = total * i / n_steps;
    const auto it = std::lower_bound(arc.begin(), arc.end(), s);
    std::size_t k = static_cast<std::size_t>(it - arc.begin());
    if (k == 0) k = 1;
    if (k >= pts.size()) k = pts.size() - 1;
    const double seg = arc[k] - arc[k - 1];
    const double w = seg > 0.0 ? (s - arc[k - 1]) / seg : 0.0;
    out[i] = (1.0 - w) * pts[k - 1] + w * pts[k];
  }
  out.front() = saddle;
  out.back() = target;
  return out;
}

template <class Model>
struct MinActionResult {
  std::vector<Vec2> states;
  double action = kNan;
  bool converged = false;
  bool floored = false;
};

// Fixed-endpoint action minimization over the interior states, quasi-Newton
// with analytic gradient. A failed first solve restarts from the reversed
// relaxation path instead of the linear interpolant.
template <class Model>
MinActionResult<Model> minimize_action_core(const Model& model, Vec2 from, Vec2 to, int n_steps,
                                            double t_span) {
  if (n_steps < 2) throw ConfigError("minimize_action: need at least 2 timesteps");
  const double dt = t_span / n_steps;

  const auto run = [&](const std::vector<Vec2>& init) {
    std::vector<double> x0(2 * (n_steps - 1));
    for (int i = 1; i < n_steps; ++i) {
      x0[2 * (i - 1)] = init[i].x;
      x0[2 * (i - 1) + 1] = init[i].y;
    }
    std::vector<Vec2> states(n_steps + 1);
    states.front() = from;
    states.back() = to;
    bool floored = false;
    const auto fg = [&](const std::vector<double>& x, std::vector<double>& g) {
      for (int i = 1; i < n_steps; ++i) states[i] = {x[2 * (i - 1)], x[2 * (i - 1) + 1]};
      return path_action_core(model, states, dt, &g, &floored);
    };
    // Rounding noise in the action puts the attainable gradient floor near
    // 1e-8 on the deeper wells; demanding more burns the full iteration
    // budget for nothing. The induced action error is O(gnorm^2), harmless.
    LbfgsOptions lopt;
    lopt.grad_tol = 1e-7;
    const auto res = lbfgs_minimize(fg, x0, lopt);
    MinActionResult<Model> out;
    out.states = states;
    for (int i = 1; i < n_steps; ++i)
      out.states[i] = {res.x[2 * (i - 1)], res.x[2 * (i - 1) + 1]};
    floored = false;
    out.action = path_action_core(model, out.states, dt, nullptr, &floored);
    out.converged = res.converged;
    out.floored = floored;
    return out;
  };

  std::vector<Vec2> linear(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i)
    linear[i] = (1.0 - static_cast<double>(i) / n_steps) * from +
                (static_cast<double>(i) / n_steps) * to;
  auto best = run(linear);
  if (!best.converged) {
    auto flow = relaxation_states(model, to, from, n_steps);
    std::reverse(flow.begin(), flow.end());
    const auto retry = run(flow);
    if (retry.converged || retry.action < best.action) best = retry;
  }
  return best;
}

}  // namespace detail

inline DiscretePath make_uniform_path(const std::vector<AttractionState>& states,
                                      double t_span) {
  if (states.size() < 2) throw ConfigError("make_uniform_path: need at least 2 states");
  DiscretePath p;
  p.states = states;
  p.times.resize(states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    p.times[i] = t_span * static_cast<double>(i) / (states.size() - 1);
  return p;
}

inline double path_action(const DiscretePath& path, const PayoffTable& table,
                          const LearningParams& lp, bool* floored = nullptr) {
  if (path.states.size() < 2 || path.states.size() != path.times.size())
    throw ConfigError("path_action: malformed path");
  std::vector<Vec2> pts(path.states.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = {path.states[i].a_1, path.states[i].a_2};
  const double dt = path.times[1] - path.times[0];
  const MarketKmModel model{table, lp};
  if (floored) *floored = false;
  return detail::path_action_core(model, pts, dt, nullptr, floored);
}

inline double path_action(const DiscretePath& path, const Aggregates& aggr,
                          const GameParams& par, const LearningParams& lp, int cls = 0) {
  return path_action(path, class_payoffs_at(cls, aggr, par), lp);
}

struct TransitionSpec {
  FixedPoint from_point;
  FixedPoint to_point;  // relaxation target beyond the saddle; set by chain assembly
  FixedPoint saddle;
  double min_action = kNan;  // rate exponent: transitions occur at rate ~ exp(-S*/r)
  DiscretePath path;         // activation segment from -> saddle
  bool converged = false;
  bool sigma_floored = false;
};

inline TransitionSpec minimize_action(const FixedPoint& from, const FixedPoint& saddle,
                                      const PayoffTable& table, const LearningParams& lp,
                                      int n_steps = 10, double t_span = 10.0) {
  if (!from.stable || saddle.stable)
    throw ConfigError("minimize_action: endpoints must be a stable point and a saddle");
  const MarketKmModel model{table, lp};
  const auto res = detail::minimize_action_core(
      model, {from.state.a_1, from.state.a_2}, {saddle.state.a_1, saddle.state.a_2}, n_steps,
      t_span);
  TransitionSpec spec;
  spec.from_point = from;
  spec.to_point = saddle;
  spec.saddle = saddle;
  spec.min_action = res.action;
  spec.converged = res.converged;
  spec.sigma_floored = res.floored;
  std::vector<AttractionState> states(res.states.size());
  for (std::size_t i = 0; i < states.size(); ++i) states[i] = {res.states[i].x, res.states[i].y};
  spec.path = make_uniform_path(states, t_span);
  spec.path.action = res.action;
  return spec;
}

inline TransitionSpec minimize_action(const FixedPoint& from, const FixedPoint& saddle,
                                      const Aggregates& aggr, const GameParams& par,
                                      const LearningParams& lp, int n_steps = 10,
                                      double t_span = 10.0, int cls = 0) {
  return minimize_action(from, saddle, class_payoffs_at(cls, aggr, par), lp, n_steps, t_span);
}

// S*(a -> saddle) - S*(b -> saddle): positive means reaching the saddle is
// harder from a, so peak a outweighs peak b as r -> 0.
inline double action_difference(const FixedPoint& fp_a, const FixedPoint& fp_b,
                                const FixedPoint& saddle, const PayoffTable& table,
                                const LearningParams& lp, int n_steps = 10,
                                double t_span = 10.0) {
  return minimize_action(fp_a, saddle, table, lp, n_steps, t_span).min_action -
         minimize_action(fp_b, saddle, table, lp, n_steps, t_span).min_action;
}

inline double action_difference(const FixedPoint& fp_a, const FixedPoint& fp_b,
                                const FixedPoint& saddle, const Aggregates& aggr,
                                const GameParams& par, const LearningParams& lp,
                                int n_steps = 10, double t_span = 10.0, int cls = 0) {
  return action_difference(fp_a, fp_b, saddle, class_payoffs_at(cls, aggr, par), lp, n_steps,
                           t_span);
}

namespace detail {

// Relative log-weights of the stable peaks in the r -> 0 limit. Detailed
// balance between neighbors i and i+1 through their shared saddle gives
// w_{i+1}/w_i = exp((S*_{i+1 -> s} - S*_{i -> s}) / r); the log-weights chain
// these up with L_0 = 0.
struct PeakChain {
  std::vector<int> stable_idx;     // indices into FixedPointSet.points
  std::vector<double> delta;       // per stable peak
  std::vector<double> log_weight;  // r-free exponents, relative to peak 0
  int dominant = 0;
  bool converged = true;
  bool floored = false;
};

inline PeakChain peak_chain(const FixedPointSet& set, const PayoffTable& table,
                            const LearningParams& lp, int n_steps, double t_span) {
  PeakChain chain;
  chain.stable_idx = set.stable_indices();
  for (const int i : chain.stable_idx) chain.delta.push_back(set.points[i].delta);
  chain.log_weight.assign(chain.stable_idx.size(), 0.0);
  for (std::size_t k = 0; k + 1 < chain.stable_idx.size(); ++k) {
    const int lo = chain.stable_idx[k], hi = chain.stable_idx[k + 1];
    int saddle = -1;
    for (int j = lo + 1; j < hi; ++j)
      if (!set.points[j].stable) saddle = j;
    if (saddle < 0) throw NumericalError("peak_chain: no saddle between stable points");
    const auto up = minimize_action(set.points[lo], set.points[saddle], table, lp, n_steps,
                                    t_span);
    const auto down = minimize_action(set.points[hi], set.points[saddle], table, lp, n_steps,
                                      t_span);
    chain.log_weight[k + 1] = chain.log_weight[k] + down.min_action - up.min_action;
    chain.converged = chain.converged && up.converged && down.converged;
    chain.floored = chain.floored || up.sigma_floored || down.sigma_floored;
  }
  for (std::size_t k = 1; k < chain.log_weight.size(); ++k)
    if (chain.log_weight[k] > chain.log_weight[chain.dominant]) chain.dominant = k;
  return chain;
}

}  // namespace detail

// Aggregate where two stable peaks (identified by their deltas, tracked by
// continuity as the aggregate moves) exchange dominance: the signed log-weight
// difference crosses zero. Symmetric mode, bisection on pbar_1.
inline double coexistence_aggregate(double delta_a, double delta_b, const GameParams& par,
                                    const LearningParams& lp, double x_lo, double x_hi,
                                    double tol = 1e-6, int n_steps = 10, double t_span = 10.0) {
  const auto weight_gap = [&](double x) {
    const PayoffTable table = class_payoffs_at(0, {x, 1.0 - x}, par);
    const auto set = fixed_points(table, lp);
    const auto chain = detail::peak_chain(set, table, lp, n_steps, t_span);
    int ia = -1, ib = -1;
    for (std::size_t k = 0; k < chain.delta.size(); ++k) {
      if (ia < 0 || std::abs(chain.delta[k] - delta_a) < std::abs(chain.delta[ia] - delta_a))
        ia = k;
      if (ib < 0 || std::abs(chain.delta[k] - delta_b) < std::abs(chain.delta[ib] - delta_b))
        ib = k;
    }
    if (ia == ib) throw NumericalError("coexistence_aggregate: peaks merged in bracket");
    return chain.log_weight[ib] - chain.log_weight[ia];
  };
  const double glo = weight_gap(x_lo), ghi = weight_gap(x_hi);
  if (glo != 0.0 && ghi != 0.0 && (glo > 0.0) == (ghi > 0.0))
    throw NumericalError("coexistence_aggregate: no dominance switch in bracket");
  return bisect(weight_gap, x_lo, x_hi, {tol, 200});
}

enum class SteadyStateKind {
  homogeneous_mixed,
  heterogeneous_mixed,
  heterogeneous_pure,
  three_peak,
};

inline const char* to_string(SteadyStateKind k) {
  switch (k) {
    case SteadyStateKind::homogeneous_mixed: return "homogeneous_mixed";
    case SteadyStateKind::heterogeneous_mixed: return "heterogeneous_mixed";
    case SteadyStateKind::heterogeneous_pure: return "heterogeneous_pure";
    case SteadyStateKind::three_peak: return "three_peak";
  }
  return "unknown";
}

struct WeightedPeak {
  FixedPoint point;
  double weight = 0.0;
};

struct SteadyStateSolution {
  Aggregates aggregates;
  std::vector<WeightedPeak> peaks;  // class 1, ascending delta; class 2 mirrors
  SteadyStateKind kind = SteadyStateKind::homogeneous_mixed;
  bool optimizer_converged = true;
  bool sigma_floored = false;
  // Populated for three_peak: the weight vector is a one-parameter family;
  // these are its endpoints and `peaks` carries the midpoint.
  std::vector<double> weight_family_lo, weight_family_hi;
  std::vector<double> crossings;  // every self-consistent aggregate found
};

struct SteadyStateOptions {
  double x_lo = 0.15;
  double x_hi = 0.85;
  int n_grid = 141;
  int n_steps = 10;
  double t_span = 10.0;
  double switch_tol = 1e-6;       // bisection tolerance on switch aggregates
  double family_action_tol = 1e-4;  // third peak joins if its log-weight deficit is below this
};

struct TildePoint {
  double x = 0.0;        // scanned aggregate pbar_1
  double p_tilde = 0.0;  // aggregate regenerated by the dominant peak
  int n_stable = 0;
  double dominant_delta = 0.0;
};

struct TildeCurve {
  std::vector<TildePoint> points;
  std::vector<double> switch_points;  // aggregates where dominance changes hands
};

namespace detail {

struct GridPoint {
  double x;
  FixedPointSet set;
  PeakChain chain;
  PayoffTable table;

  double p_tilde(double beta) const {
    return softmax_choice(chain.delta[chain.dominant], beta);
  }
  double dominant_delta() const { return chain.delta[chain.dominant]; }
};

inline GridPoint grid_point(double x, const GameParams& par, const LearningParams& lp,
                            const SteadyStateOptions& opt) {
  GridPoint g;
  g.x = x;
  g.table = class_payoffs_at(0, {x, 1.0 - x}, par);
  g.set = fixed_points(g.table, lp);
  g.chain = peak_chain(g.set, g.table, lp, opt.n_steps, opt.t_span);
  return g;
}

// Index of the chain peak nearest a reference delta.
inline int nearest_peak(const PeakChain& chain, double delta_ref) {
  int best = 0;
  for (std::size_t k = 1; k < chain.delta.size(); ++k)
    if (std::abs(chain.delta[k] - delta_ref) < std::abs(chain.delta[best] - delta_ref))
      best = static_cast<int>(k);
  return best;
}

}  // namespace detail

// Aggregate regenerated by the action-dominant peak, over a scan grid. The
// switch points are where the curve jumps between branches.
inline TildeCurve tilde_p_curve(const GameParams& par, const LearningParams& lp,
                                const SteadyStateOptions& opt = {}) {
  par.validate();
  lp.validate();
  if (opt.n_grid < 2 || !(opt.x_lo < opt.x_hi))
    throw ConfigError("tilde_p_curve: malformed scan grid");
  TildeCurve curve;
  std::vector<detail::GridPoint> grid;
  grid.reserve(opt.n_grid);
  for (int i = 0; i < opt.n_grid; ++i) {
    const double x = opt.x_lo + (opt.x_hi - opt.x_lo) * i / (opt.n_grid - 1);
    grid.push_back(detail::grid_point(x, par, lp, opt));
    curve.points.push_back({x, grid.back().p_tilde(lp.beta),
                            grid.back().set.stable_count(), grid.back().dominant_delta()});
  }
  for (int i = 0; i + 1 < opt.n_grid; ++i) {
    const auto& a = grid[i];
    const auto& b = grid[i + 1];
    if (a.chain.delta.size() < 2 && b.chain.delta.size() < 2) continue;
    // Same branch if b's peak nearest a's dominant delta is b's dominant.
    if (detail::nearest_peak(b.chain, a.dominant_delta()) == b.chain.dominant) continue;
    const double da = a.dominant_delta(), db = b.dominant_delta();
    try {
      curve.switch_points.push_back(
          coexistence_aggregate(da, db, par, lp, a.x, b.x, opt.switch_tol, opt.n_steps,
                                opt.t_span));
    } catch (const NumericalError&) {
      // Structural change (peak appeared or vanished) rather than an action
      // switch: record the midpoint as the jump location.
      curve.switch_points.push_back(0.5 * (a.x + b.x));
    }
  }
  return curve;
}

// Self-consistent steady state of one class (class 2 mirrored): scans the
// dominant-peak aggregate map for diagonal crossings. A crossing on a smooth
// branch is a one-peak state; a crossing inside a dominance switch is a
// two-peak state with weights read off the lever rule; a third peak within
// the action tolerance at a switch opens the underconstrained three-peak
// family.
inline SteadyStateSolution solve_steady_state(const GameParams& par, const LearningParams& lp,
                                              const SteadyStateOptions& opt = {}) {
  par.validate();
  lp.validate();
  std::vector<detail::GridPoint> grid;
  grid.reserve(opt.n_grid);
  for (int i = 0; i < opt.n_grid; ++i) {
    const double x = opt.x_lo + (opt.x_hi - opt.x_lo) * i / (opt.n_grid - 1);
    grid.push_back(detail::grid_point(x, par, lp, opt));
  }

  struct Crossing {
    double x;
    bool at_switch;
    double delta_lo, delta_hi;  // competing branch deltas when at_switch
  };
  std::vector<Crossing> found;
  const auto add = [&](Crossing c) {
    for (const auto& prev : found)
      if (std::abs(prev.x - c.x) < 1e-9) return;
    found.push_back(c);
  };

  const auto diag = [&](const detail::GridPoint& g) { return g.p_tilde(lp.beta) - g.x; };
  // Branch-tracked diagonal gap; needs only fixed points, not action chains.
  const auto branch_diag = [&](double x, double delta_ref) {
    const auto set = fixed_points(class_payoffs_at(0, {x, 1.0 - x}, par), lp);
    double best = kNan;
    for (const auto& p : set.points)
      if (p.stable && (std::isnan(best) || std::abs(p.delta - delta_ref) < std::abs(best - delta_ref)))
        best = p.delta;
    if (std::isnan(best)) throw NumericalError("solve_steady_state: lost stable branch");
    return softmax_choice(best, lp.beta) - x;
  };

  // Bisect the branch-tracked gap over [lo, hi] and keep the root only if it
  // is genuine; a root whose residual stays large marks a branch fold, not a
  // diagonal crossing.
  const auto bisect_branch = [&](double lo, double hi, double ref) {
    const double x = bisect([&](double xx) { return branch_diag(xx, ref); }, lo, hi, {1e-10, 200});
    if (std::abs(branch_diag(x, ref)) < 1e-6) add({x, false, 0, 0});
  };

  for (int i = 0; i + 1 < opt.n_grid; ++i) {
    const auto& a = grid[i];
    const auto& b = grid[i + 1];
    const double da = diag(a), db = diag(b);
    const bool same_branch =
        detail::nearest_peak(b.chain, a.dominant_delta()) == b.chain.dominant;
    if (same_branch) {
      if (da == 0.0) add({a.x, false, 0, 0});
      if ((da > 0.0) != (db > 0.0) && da != 0.0 && db != 0.0)
        bisect_branch(a.x, b.x, a.dominant_delta());
      continue;
    }
    // Dominance changed hands inside (a.x, b.x): either an action switch
    // (both peaks alive, log-weights tie at some x_sw) or a structural jump
    // (a peak was born or died). Locate the tie point; a pairwise tie that a
    // third peak out-weighs is not a real hand-over, so the interval splits
    // there and each half is searched for its own switch.
    struct SwitchJob {
      double x_lo, x_hi, d_lo, d_hi;
      int depth;
    };
    if (da == 0.0) add({a.x, false, 0, 0});
    std::vector<SwitchJob> jobs;
    jobs.push_back({a.x, b.x, a.dominant_delta(), b.dominant_delta(), 0});
    while (!jobs.empty()) {
      const SwitchJob jb = jobs.back();
      jobs.pop_back();
      double x_sw = kNan;
      try {
        x_sw = coexistence_aggregate(jb.d_lo, jb.d_hi, par, lp, jb.x_lo, jb.x_hi,
                                     opt.switch_tol, opt.n_steps, opt.t_span);
      } catch (const NumericalError&) {
        // Structural jump: no coexistence point, fall through to the flanks.
      }
      if (!std::isnan(x_sw)) {
        const auto g_sw = detail::grid_point(x_sw, par, lp, opt);
        const int k_lo = detail::nearest_peak(g_sw.chain, jb.d_lo);
        const int k_hi = detail::nearest_peak(g_sw.chain, jb.d_hi);
        const double l_tie =
            std::max(g_sw.chain.log_weight[k_lo], g_sw.chain.log_weight[k_hi]);
        int k_dom = -1;
        for (std::size_t k = 0; k < g_sw.chain.delta.size(); ++k) {
          if (static_cast<int>(k) == k_lo || static_cast<int>(k) == k_hi) continue;
          if (g_sw.chain.log_weight[k] > l_tie + opt.family_action_tol)
            k_dom = static_cast<int>(k);
        }
        if (k_dom >= 0 && jb.depth < 4) {
          jobs.push_back({jb.x_lo, x_sw, jb.d_lo, g_sw.chain.delta[k_dom], jb.depth + 1});
          jobs.push_back({x_sw, jb.x_hi, g_sw.chain.delta[k_dom], jb.d_hi, jb.depth + 1});
          continue;
        }
        const double p_lo = softmax_choice(g_sw.chain.delta[k_lo], lp.beta);
        const double p_hi = softmax_choice(g_sw.chain.delta[k_hi], lp.beta);
        const double omega = (x_sw - p_lo) / (p_hi - p_lo);
        if (omega >= -1e-6 && omega <= 1.0 + 1e-6) {
          add({x_sw, true, jb.d_lo, jb.d_hi});
          continue;
        }
      }
      // No self-consistent mixture at the switch itself; the diagonal may
      // still cross either flanking smooth sub-branch. A switch far from the
      // diagonal legitimately yields no crossing in this interval at all.
      const double split_lo = std::isnan(x_sw) ? jb.x_hi : x_sw - 1e-9;
      const double split_hi = std::isnan(x_sw) ? jb.x_lo : x_sw + 1e-9;
      const double f_lo = branch_diag(jb.x_lo, jb.d_lo);
      const double f_hi = branch_diag(jb.x_hi, jb.d_hi);
      if (f_lo != 0.0 && (f_lo > 0.0) != (branch_diag(split_lo, jb.d_lo) > 0.0))
        bisect_branch(jb.x_lo, split_lo, jb.d_lo);
      if (f_hi != 0.0 && (branch_diag(split_hi, jb.d_hi) > 0.0) != (f_hi > 0.0))
        bisect_branch(split_hi, jb.x_hi, jb.d_hi);
    }
  }
  if (diag(grid.back()) == 0.0) add({grid.back().x, false, 0, 0});
  if (found.empty())
    throw NumericalError("solve_steady_state: no self-consistent aggregate in scan range");

  // Primary crossing: nearest the symmetric aggregate. Mirror pairs are
  // numerically near-equidistant, so compare at coarse resolution and break
  // ties toward the lower aggregate.
  std::sort(found.begin(), found.end(), [](const Crossing& a, const Crossing& b) {
    return a.x < b.x;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < found.size(); ++i) {
    const double di = std::round(std::abs(found[i].x - 0.5) * 100.0);
    const double db = std::round(std::abs(found[best].x - 0.5) * 100.0);
    if (di < db) best = i;
  }
  const Crossing sel = found[best];

  SteadyStateSolution sol;
  for (const auto& c : found) sol.crossings.push_back(c.x);
  sol.aggregates = {sel.x, 1.0 - sel.x};
  const auto g = detail::grid_point(sel.x, par, lp, opt);
  sol.optimizer_converged = g.chain.converged;
  sol.sigma_floored = g.chain.floored;

  if (!sel.at_switch) {
    const int k = g.chain.dominant;
    sol.peaks.push_back({g.set.points[g.chain.stable_idx[k]], 1.0});
    sol.kind = SteadyStateKind::homogeneous_mixed;
    return sol;
  }

  const int k_lo = detail::nearest_peak(g.chain, sel.delta_lo);
  const int k_hi = detail::nearest_peak(g.chain, sel.delta_hi);
  const double p_lo = softmax_choice(g.chain.delta[k_lo], lp.beta);
  const double p_hi = softmax_choice(g.chain.delta[k_hi], lp.beta);
  double omega = (sel.x - p_lo) / (p_hi - p_lo);
  omega = std::clamp(omega, 0.0, 1.0);

  // Third peak within the action tolerance of the balanced pair?
  int k_third = -1;
  const double l_ref = g.chain.log_weight[k_lo];
  for (std::size_t k = 0; k < g.chain.delta.size(); ++k) {
    if (static_cast<int>(k) == k_lo || static_cast<int>(k) == k_hi) continue;
    if (std::abs(g.chain.log_weight[k] - l_ref) <= opt.family_action_tol)
      k_third = static_cast<int>(k);
  }

  if (k_third < 0) {
    sol.peaks.push_back({g.set.points[g.chain.stable_idx[k_lo]], 1.0 - omega});
    sol.peaks.push_back({g.set.points[g.chain.stable_idx[k_hi]], omega});
    std::sort(sol.peaks.begin(), sol.peaks.end(),
              [](const WeightedPeak& a, const WeightedPeak& b) {
                return a.point.delta < b.point.delta;
              });
    const bool any_central =
        sol.peaks[0].point.central || sol.peaks[1].point.central;
    sol.kind = any_central ? SteadyStateKind::heterogeneous_mixed
                           : SteadyStateKind::heterogeneous_pure;
    return sol;
  }

  // Three near-degenerate peaks: weights satisfy sum = 1 and the lever rule,
  // leaving one free parameter. Parametrize by the third peak's weight.
  std::array<int, 3> ks = {k_lo, k_hi, k_third};
  std::sort(ks.begin(), ks.end(),
            [&](int a, int b) { return g.chain.delta[a] < g.chain.delta[b]; });
  const std::array<double, 3> ps = {softmax_choice(g.chain.delta[ks[0]], lp.beta),
                                    softmax_choice(g.chain.delta[ks[1]], lp.beta),
                                    softmax_choice(g.chain.delta[ks[2]], lp.beta)};
  // With w1 = t: w0 + w2 = 1 - t, w0 p0 + w2 p2 = x - t p1.
  const auto family_weights = [&](double t) {
    const double w0 = ((1.0 - t) * ps[2] - (sel.x - t * ps[1])) / (ps[2] - ps[0]);
    return std::array<double, 3>{w0, t, 1.0 - t - w0};
  };
  double t_max = 1.0;
  for (double t = 1.0; t >= 0.0; t -= 1e-4) {
    const auto w = family_weights(t);
    if (w[0] >= -1e-12 && w[2] >= -1e-12) {
      t_max = t;
      break;
    }
    t_max = 0.0;
  }
  const auto w_lo = family_weights(0.0);
  const auto w_hi = family_weights(t_max);
  const auto w_mid = family_weights(0.5 * t_max);
  for (int j = 0; j < 3; ++j) {
    sol.peaks.push_back({g.set.points[g.chain.stable_idx[ks[j]]], w_mid[j]});
    sol.weight_family_lo.push_back(w_lo[j]);
    sol.weight_family_hi.push_back(w_hi[j]);
  }
  sol.kind = SteadyStateKind::three_peak;
  return sol;
}

struct CriticalAlphas {
  double alpha_c = kNan;        // heterogeneity onset
  double alpha_c_prime = kNan;  // mixed-plus-pure pair gives way to two pure peaks
  double alpha_c_dprime = kNan;  // central fixed point vanishes at the solved aggregates
};

// The three alpha thresholds at fixed beta. The first two bisect the solved
// steady-state kind in log alpha; the third comes from the fixed-point-count
// threshold evaluated at the heterogeneous solution's aggregates.
inline CriticalAlphas critical_alphas(double beta, const GameParams& par,
                                      const SteadyStateOptions& opt = {}) {
  const auto solve = [&](double alpha) {
    return solve_steady_state(par, {0.01, alpha, beta}, opt);
  };
  const auto heterogeneous = [&](double ln_alpha) {
    return solve(std::exp(ln_alpha)).kind != SteadyStateKind::homogeneous_mixed;
  };

  double lo = 0.001, hi = kNan;
  for (double a = lo * 1.5; a <= 0.5; a *= 1.5) {
    if (heterogeneous(std::log(a))) {
      hi = a;
      break;
    }
    lo = a;
  }
  if (std::isnan(hi))
    throw NumericalError("critical_alphas: no heterogeneous phase below alpha = 0.5");

  CriticalAlphas out;
  out.alpha_c =
      std::exp(bisect_predicate(heterogeneous, std::log(lo), std::log(hi), 5e-3, 300));

  const auto pure = [&](double ln_alpha) {
    const auto kind = solve(std::exp(ln_alpha)).kind;
    return kind == SteadyStateKind::heterogeneous_pure || kind == SteadyStateKind::three_peak;
  };
  double hi_prime = 0.3;
  if (!pure(std::log(hi_prime))) hi_prime = 0.5;
  out.alpha_c_prime = std::exp(bisect_predicate(pure, std::log(out.alpha_c * 1.001),
                                                std::log(hi_prime), 1e-4, 300));

  // At the mixed/pure boundary all three peaks tie. The kind predicate only
  // brackets it; refine onto the tie by driving the gap between the highest
  // outer peak and the central peak to zero, so that solving at alpha_c_prime
  // lands inside the three-peak family window.
  const auto three_way_gap = [&](double ln_alpha) -> double {
    const double alpha = std::exp(ln_alpha);
    const LearningParams lp{0.01, alpha, beta};
    const auto sol = solve_steady_state(par, lp, opt);
    const auto gp = detail::grid_point(sol.aggregates.pbar_1, par, lp, opt);
    int central = -1, outer_hi = -1;
    for (std::size_t k = 0; k < gp.chain.delta.size(); ++k) {
      if (gp.set.points[gp.chain.stable_idx[k]].central) central = static_cast<int>(k);
      if (outer_hi < 0 || gp.chain.delta[k] > gp.chain.delta[outer_hi])
        outer_hi = static_cast<int>(k);
    }
    if (central < 0) return 1.0;               // central peak gone: pure side
    if (central == outer_hi) return -1.0;      // no outer competitor: mixed side
    return gp.chain.log_weight[outer_hi] - gp.chain.log_weight[central];
  };
  try {
    const double ln_p = std::log(out.alpha_c_prime);
    double lo_b = ln_p, hi_b = ln_p;
    double g_lo = three_way_gap(ln_p), g_hi = g_lo;
    for (double step = 2e-4; step <= 8e-3 && (g_lo > 0.0) == (g_hi > 0.0); step *= 2.0) {
      lo_b = ln_p - step;
      hi_b = ln_p + step;
      g_lo = three_way_gap(lo_b);
      g_hi = three_way_gap(hi_b);
    }
    if ((g_lo > 0.0) != (g_hi > 0.0))
      out.alpha_c_prime = std::exp(bisect(three_way_gap, lo_b, hi_b, {1e-7, 100}));
  } catch (const std::exception&) {
    // Keep the bracketed estimate when the tie refinement cannot get a sign
    // change (e.g. the boundary is a structural rather than weight collapse).
  }

  // Saddle-node threshold, self-consistently at the heterogeneous solution's
  // aggregates. The solution aggregate barely moves with alpha, so one
  // refinement pass settles it.
  Aggregates aggr = solve(std::min(out.alpha_c_prime * 1.05, 0.9)).aggregates;
  double dprime = threshold_alphas_fixed_point_count(beta, par, aggr).alpha_back_to_3;
  if (!std::isnan(dprime)) {
    try {
      const auto refined = solve(0.95 * dprime);
      if (refined.kind != SteadyStateKind::homogeneous_mixed) aggr = refined.aggregates;
      dprime = threshold_alphas_fixed_point_count(beta, par, aggr).alpha_back_to_3;
    } catch (const NumericalError&) {
      // keep the first estimate
    }
  }
  out.alpha_c_dprime = dprime;
  return out;
}

}  // namespace agora
