#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "agora/common.hpp"
#include "agora/linalg.hpp"
#include "agora/market.hpp"

namespace agora {

enum class EquilibriumKind {
  potentially_heterogeneous,
  partially_potentially_heterogeneous,
  homogeneous_pure_same_market,
  homogeneous_pure_split,
};

inline const char* to_string(EquilibriumKind k) {
  switch (k) {
    case EquilibriumKind::potentially_heterogeneous: return "potentially_heterogeneous";
    case EquilibriumKind::partially_potentially_heterogeneous:
      return "partially_potentially_heterogeneous";
    case EquilibriumKind::homogeneous_pure_same_market: return "homogeneous_pure_same_market";
    case EquilibriumKind::homogeneous_pure_split: return "homogeneous_pure_split";
  }
  return "unknown";
}

struct EquilibriumPoint {
  Aggregates aggregates;
  EquilibriumKind kind;
  double payoff_gap_1 = 0.0;  // P_1 - P_2 for class 1 at the point
  double payoff_gap_2 = 0.0;
};

// Indifference residual for one class: expected-payoff difference between
// posting in market 1 and market 2, as a function of the aggregates.
inline double equal_payoff_residual(int cls, const Aggregates& aggr, const GameParams& par) {
  const PayoffTable t = class_payoffs_at(cls, aggr, par);
  return t.p_1 - t.p_2;
}

struct CurvePolyline {
  std::vector<Vec2> points;
  bool closed = false;
};

namespace detail {

// Exact zeros at grid nodes are nudged positive so every node has a sign.
inline double signed_value(double v) { return v == 0.0 ? 1e-300 : v; }

// Zero contours of res(x, y) over the unit square by marching squares.
// Each crossed cell edge gets one bisection-refined point; segments are
// stitched into chains through a shared-edge adjacency map.
template <class F>
std::vector<CurvePolyline> zero_contours(const F& res, int n, double tol = 1e-10) {
  const int m = n + 1;
  std::vector<double> vals(static_cast<size_t>(m) * m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      vals[static_cast<size_t>(j) * m + i] =
          signed_value(res(static_cast<double>(i) / n, static_cast<double>(j) / n));
  const auto at = [&](int i, int j) { return vals[static_cast<size_t>(j) * m + i]; };

  // Edge keys: 2*(node index) for the horizontal edge leaving node (i,j)
  // rightward, +1 for the vertical edge leaving it upward.
  const auto hkey = [m](int i, int j) { return 2 * (static_cast<std::int64_t>(j) * m + i); };
  const auto vkey = [m](int i, int j) { return 2 * (static_cast<std::int64_t>(j) * m + i) + 1; };

  std::map<std::int64_t, Vec2> points;
  const auto cross_h = [&](int i, int j) -> bool {
    if ((at(i, j) > 0.0) == (at(i + 1, j) > 0.0)) return false;
    const std::int64_t key = hkey(i, j);
    if (!points.count(key)) {
      const double y = static_cast<double>(j) / n;
      const double x = bisect([&](double t) { return signed_value(res(t, y)); },
                              static_cast<double>(i) / n, static_cast<double>(i + 1) / n,
                              {tol, 80});
      points[key] = {x, y};
    }
    return true;
  };
  const auto cross_v = [&](int i, int j) -> bool {
    if ((at(i, j) > 0.0) == (at(i, j + 1) > 0.0)) return false;
    const std::int64_t key = vkey(i, j);
    if (!points.count(key)) {
      const double x = static_cast<double>(i) / n;
      const double y = bisect([&](double t) { return signed_value(res(x, t)); },
                              static_cast<double>(j) / n, static_cast<double>(j + 1) / n,
                              {tol, 80});
      points[key] = {x, y};
    }
    return true;
  };

  // Segment list as linked edge pairs.
  std::vector<std::pair<std::int64_t, std::int64_t>> links;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      std::int64_t crossed[4];
      int nc = 0;
      if (cross_h(i, j)) crossed[nc++] = hkey(i, j);
      if (cross_v(i + 1, j)) crossed[nc++] = vkey(i + 1, j);
      if (cross_h(i, j + 1)) crossed[nc++] = hkey(i, j + 1);
      if (cross_v(i, j)) crossed[nc++] = vkey(i, j);
      if (nc == 2) {
        links.emplace_back(crossed[0], crossed[1]);
      } else if (nc == 4) {
        // Saddle cell: the center sign decides which opposite corners the
        // two contour branches separate.
        const double center =
            signed_value(res((i + 0.5) / n, (j + 0.5) / n));
        if ((center > 0.0) == (at(i, j) > 0.0)) {
          links.emplace_back(crossed[0], crossed[1]);  // bottom-right
          links.emplace_back(crossed[2], crossed[3]);  // top-left
        } else {
          links.emplace_back(crossed[3], crossed[0]);  // left-bottom
          links.emplace_back(crossed[1], crossed[2]);  // right-top
        }
      }
    }
  }

  // Per-edge incident link indices (an edge touches at most 2 links).
  std::map<std::int64_t, std::vector<int>> incident;
  for (int li = 0; li < static_cast<int>(links.size()); ++li) {
    incident[links[li].first].push_back(li);
    incident[links[li].second].push_back(li);
  }

  std::vector<bool> used(links.size(), false);
  const auto walk = [&](std::int64_t start, std::vector<Vec2>& out) {
    std::int64_t edge = start;
    out.push_back(points.at(edge));
    for (;;) {
      int next_link = -1;
      for (int li : incident[edge])
        if (!used[li]) { next_link = li; break; }
      if (next_link < 0) break;
      used[next_link] = true;
      edge = links[next_link].first == edge ? links[next_link].second : links[next_link].first;
      out.push_back(points.at(edge));
    }
  };

  std::vector<CurvePolyline> out;
  // Open chains first: start from edges with a single incident link.
  for (const auto& [edge, inc] : incident) {
    if (inc.size() != 1 || used[inc[0]]) continue;
    CurvePolyline c;
    walk(edge, c.points);
    if (c.points.size() >= 2) out.push_back(std::move(c));
  }
  // Remaining links belong to closed loops.
  for (int li = 0; li < static_cast<int>(links.size()); ++li) {
    if (used[li]) continue;
    CurvePolyline c;
    c.closed = true;
    walk(links[li].first, c.points);
    if (c.points.size() >= 2) out.push_back(std::move(c));
  }
  return out;
}

inline std::optional<Vec2> segment_intersection(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double rx = b.x - a.x, ry = b.y - a.y;
  const double sx = d.x - c.x, sy = d.y - c.y;
  const double den = rx * sy - ry * sx;
  if (den == 0.0) return std::nullopt;
  const double t = ((c.x - a.x) * sy - (c.y - a.y) * sx) / den;
  const double u = ((c.x - a.x) * ry - (c.y - a.y) * rx) / den;
  if (t < -1e-9 || t > 1.0 + 1e-9 || u < -1e-9 || u > 1.0 + 1e-9) return std::nullopt;
  return Vec2{a.x + t * rx, a.y + t * ry};
}

// Refines a crossing of two residual zero sets near (u0, v0): solves
// f_inner = 0 for u at fixed v by bisection, then bisects the composed
// f_outer along v. Returns nothing when bracketing fails in this wiring.
template <class FI, class FO>
std::optional<Vec2> nested_bisect(const FI& f_inner, const FO& f_outer, double u0, double v0,
                                  double h) {
  const auto inner_root = [&](double v) -> std::optional<double> {
    double lo = std::clamp(u0 - h, 0.0, 1.0), hi = std::clamp(u0 + h, 0.0, 1.0);
    double flo = f_inner(lo, v), fhi = f_inner(hi, v);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) return std::nullopt;
    for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = f_inner(mid, v);
      if (fm == 0.0) return mid;
      ((fm > 0.0) == (flo > 0.0) ? lo : hi) = mid;
      ((fm > 0.0) == (flo > 0.0) ? flo : fhi) = fm;
    }
    return 0.5 * (lo + hi);
  };
  const auto outer = [&](double v) -> std::optional<double> {
    const auto u = inner_root(v);
    if (!u) return std::nullopt;
    return f_outer(*u, v);
  };

  double vlo = std::clamp(v0 - h, 0.0, 1.0), vhi = std::clamp(v0 + h, 0.0, 1.0);
  auto glo = outer(vlo), ghi = outer(vhi);
  if (!glo || !ghi || ((*glo > 0.0) == (*ghi > 0.0) && *glo != 0.0 && *ghi != 0.0))
    return std::nullopt;
  for (int it = 0; it < 80 && vhi - vlo > 1e-14; ++it) {
    const double vm = 0.5 * (vlo + vhi);
    const auto gm = outer(vm);
    if (!gm) return std::nullopt;
    if (*gm == 0.0) { vlo = vhi = vm; break; }
    if ((*gm > 0.0) == (*glo > 0.0)) { vlo = vm; glo = gm; }
    else { vhi = vm; ghi = gm; }
  }
  const double v = 0.5 * (vlo + vhi);
  const auto u = inner_root(v);
  if (!u) return std::nullopt;
  return Vec2{*u, v};
}

}  // namespace detail

// Zero set of the class indifference residual over the aggregates square,
// as bisection-refined polylines.
inline std::vector<CurvePolyline> equal_payoff_curve(int cls, const GameParams& par,
                                                     int grid_n = 512) {
  if (grid_n < 16) throw ConfigError("equal_payoff_curve: grid_n must be at least 16");
  return detail::zero_contours(
      [&](double x, double y) { return equal_payoff_residual(cls, {x, y}, par); }, grid_n);
}

namespace detail {

// Crossing of the two classes' indifference curves near a segment-pair hit.
// The four bisection wirings (either residual solved along either axis)
// cover the generic transversal orientations.
inline std::optional<Vec2> refine_crossing(Vec2 guess, const GameParams& par, double h) {
  const auto r1 = [&](double x, double y) { return equal_payoff_residual(0, {x, y}, par); };
  const auto r2 = [&](double x, double y) { return equal_payoff_residual(1, {x, y}, par); };
  const auto r1t = [&](double u, double v) { return r1(v, u); };
  const auto r2t = [&](double u, double v) { return r2(v, u); };
  if (auto p = nested_bisect(r1, r2, guess.x, guess.y, h)) return p;
  if (auto p = nested_bisect(r2, r1, guess.x, guess.y, h)) return p;
  if (auto p = nested_bisect(r1t, r2t, guess.y, guess.x, h)) return Vec2{p->y, p->x};
  if (auto p = nested_bisect(r2t, r1t, guess.y, guess.x, h)) return Vec2{p->y, p->x};
  return std::nullopt;
}

}  // namespace detail

// Candidate Nash equilibria of the mean-field market game: interior
// indifference-curve crossings, single-class boundary candidates, and the
// four pure corners with their sign conditions.
inline std::vector<EquilibriumPoint> find_equilibria(const GameParams& par, int grid_n = 512) {
  par.validate();
  const auto gap = [&](int cls, double x, double y) {
    return equal_payoff_residual(cls, {x, y}, par);
  };
  const auto curves_1 = equal_payoff_curve(0, par, grid_n);
  const auto curves_2 = equal_payoff_curve(1, par, grid_n);

  constexpr double kEdgeTol = 1e-6;  // interior means both coords in [tol, 1-tol]
  std::vector<EquilibriumPoint> out;

  // Interior crossings -> potentially heterogeneous equilibria.
  std::vector<Vec2> crossings;
  const double h = 1.5 / grid_n;
  const auto each_segment = [](const CurvePolyline& c, auto&& fn) {
    const size_t n = c.points.size();
    for (size_t i = 0; i + 1 < n; ++i) fn(c.points[i], c.points[i + 1]);
    if (c.closed && n >= 3) fn(c.points[n - 1], c.points[0]);
  };
  for (const auto& c1 : curves_1) {
    each_segment(c1, [&](Vec2 a, Vec2 b) {
      for (const auto& c2 : curves_2) {
        each_segment(c2, [&](Vec2 c, Vec2 d) {
          const auto hit = detail::segment_intersection(a, b, c, d);
          if (!hit) return;
          const auto refined = detail::refine_crossing(*hit, par, h);
          const Vec2 pt = refined.value_or(*hit);
          if (pt.x < kEdgeTol || pt.x > 1.0 - kEdgeTol || pt.y < kEdgeTol ||
              pt.y > 1.0 - kEdgeTol)
            return;
          for (const auto& prev : crossings)
            if (norm(prev - pt) < 2e-6) return;
          crossings.push_back(pt);
        });
      }
    });
  }
  for (const Vec2& pt : crossings)
    out.push_back({{pt.x, pt.y},
                   EquilibriumKind::potentially_heterogeneous,
                   gap(0, pt.x, pt.y),
                   gap(1, pt.x, pt.y)});

  // Boundary candidates: an endpoint of one class's curve on an edge where
  // only the other class is pinned, kept when the pinned class's payoff gap
  // points toward that edge.
  std::vector<Vec2> partials;
  const auto consider_partial = [&](int cls_curve, Vec2 pt) {
    if (cls_curve == 0) {
      // Class 1 indifferent; class 2 pinned at pbar_2 in {0, 1}.
      if (pt.x < kEdgeTol || pt.x > 1.0 - kEdgeTol) return;
      const bool at_zero = pt.y <= kEdgeTol, at_one = pt.y >= 1.0 - kEdgeTol;
      if (!at_zero && !at_one) return;
      const double y = at_zero ? 0.0 : 1.0;
      const double g2 = gap(1, pt.x, y);
      if (at_zero ? g2 > 0.0 : g2 < 0.0) return;
      partials.push_back({pt.x, y});
    } else {
      if (pt.y < kEdgeTol || pt.y > 1.0 - kEdgeTol) return;
      const bool at_zero = pt.x <= kEdgeTol, at_one = pt.x >= 1.0 - kEdgeTol;
      if (!at_zero && !at_one) return;
      const double x = at_zero ? 0.0 : 1.0;
      const double g1 = gap(0, x, pt.y);
      if (at_zero ? g1 > 0.0 : g1 < 0.0) return;
      partials.push_back({x, pt.y});
    }
  };
  for (const auto& c : curves_1)
    if (!c.closed && c.points.size() >= 2) {
      consider_partial(0, c.points.front());
      consider_partial(0, c.points.back());
    }
  for (const auto& c : curves_2)
    if (!c.closed && c.points.size() >= 2) {
      consider_partial(1, c.points.front());
      consider_partial(1, c.points.back());
    }
  std::vector<Vec2> kept;
  for (const Vec2& pt : partials) {
    bool dup = false;
    for (const auto& prev : kept) dup = dup || norm(prev - pt) < 2e-6;
    if (!dup) kept.push_back(pt);
  }
  for (const Vec2& pt : kept)
    out.push_back({{pt.x, pt.y},
                   EquilibriumKind::partially_potentially_heterogeneous,
                   gap(0, pt.x, pt.y),
                   gap(1, pt.x, pt.y)});

  // Corners. Both-same-market corners are always equilibria (the empty
  // market pays nothing, so nobody gains by deviating alone). Split corners
  // need each class to weakly prefer its own market.
  out.push_back({{0.0, 0.0},
                 EquilibriumKind::homogeneous_pure_same_market,
                 gap(0, 0.0, 0.0),
                 gap(1, 0.0, 0.0)});
  out.push_back({{1.0, 1.0},
                 EquilibriumKind::homogeneous_pure_same_market,
                 gap(0, 1.0, 1.0),
                 gap(1, 1.0, 1.0)});
  {
    const double g1 = gap(0, 1.0, 0.0), g2 = gap(1, 1.0, 0.0);
    if (g1 >= 0.0 && g2 <= 0.0)
      out.push_back({{1.0, 0.0}, EquilibriumKind::homogeneous_pure_split, g1, g2});
  }
  {
    const double g1 = gap(0, 0.0, 1.0), g2 = gap(1, 0.0, 1.0);
    if (g1 <= 0.0 && g2 >= 0.0)
      out.push_back({{0.0, 1.0}, EquilibriumKind::homogeneous_pure_split, g1, g2});
  }
  return out;
}

// Buyer-fraction roots of the split-corner stability condition along the
// symmetric parameter slice, from the closed-form quadratic in pb_1.
//
// At the split corner each class fills one market alone, so both trading
// prices and per-side score moments are explicit; requiring the filled
// market to weakly beat a lone deviation into the other market reduces to
// c2 x^2 + c1 x + c0 >= 0 with x = pb_1. The boundary roots below bracket
// the split-Nash window; roots where the deviating side would saturate the
// matching cap are spurious and dropped.
inline std::vector<double> phase_boundary_roots(double theta_1, const GameParams& base) {
  GameParams par = base;
  par.theta_1 = theta_1;
  par.theta_2 = 1.0 - theta_1;
  par.validate();
  // Corner pbar = (0, 1): class 1 fills market 2, class 2 fills market 1.
  const double pi_w = trading_price(par.theta_1, par.mu_b, par.mu_a);  // market 1
  const double pi_u = trading_price(par.theta_2, par.mu_b, par.mu_a);  // market 2
  const double vaw = validity_prob(Side::ask, pi_w, par);
  const double vau = validity_prob(Side::ask, pi_u, par);
  const double vbu = validity_prob(Side::bid, pi_u, par);
  const double saw = score_moments(Side::ask, pi_w, par).mean;
  const double sbw = score_moments(Side::bid, pi_w, par).mean;
  const double sau = score_moments(Side::ask, pi_u, par).mean;
  const double sbu = score_moments(Side::bid, pi_u, par).mean;

  const double c2 = -(sbu * vbu + sau * vbu + sbw * vaw + saw * vaw);
  const double c1 = sbu * vbu + sau * vbu + 2.0 * saw * vaw;
  const double c0 = -saw * vaw;

  const double disc = c1 * c1 - 4.0 * c2 * c0;
  if (disc < 0.0) return {};
  const double sq = std::sqrt(disc);
  std::vector<double> roots;
  for (const double x : {(-c1 + sq) / (2.0 * c2), (-c1 - sq) / (2.0 * c2)}) {
    if (!(x >= 0.0 && x <= 1.0)) continue;
    // Deviating buyers in market 2 must not saturate the matching cap, or
    // the linearized payoff comparison behind the quadratic breaks down.
    const double fu = x == 1.0 ? kInf : x / (1.0 - x);
    if (fu * vbu <= vau * (1.0 + 1e-9)) roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

struct PhaseRegion {
  bool has_pot_heterogeneous = false;
  bool has_pure_split = false;
  int partially_het_count = 0;
};

// Equilibrium inventory of one parameter point, summarized for the map.
inline PhaseRegion classify_region(const GameParams& par, int grid_n = 96) {
  PhaseRegion r;
  for (const auto& e : find_equilibria(par, grid_n)) {
    switch (e.kind) {
      case EquilibriumKind::potentially_heterogeneous: r.has_pot_heterogeneous = true; break;
      case EquilibriumKind::homogeneous_pure_split: r.has_pure_split = true; break;
      case EquilibriumKind::partially_potentially_heterogeneous: ++r.partially_het_count; break;
      case EquilibriumKind::homogeneous_pure_same_market: break;
    }
  }
  return r;
}

struct PhaseDiagram {
  std::vector<double> theta_values;  // theta_1 axis over [0, 1]
  std::vector<double> pb_values;     // pb_1 axis over [0, 1/2]
  std::vector<PhaseRegion> cells;    // row-major, index = it * pb_count + ip
  std::vector<std::vector<double>> boundary_roots;  // quadratic roots per theta

  const PhaseRegion& cell(int it, int ip) const {
    return cells[static_cast<size_t>(it) * pb_values.size() + ip];
  }
};

// Map of equilibrium structure over the symmetric slice theta_2 = 1-theta_1,
// pb_2 = 1-pb_1. The pb axis stops at 1/2; the other half mirrors.
inline PhaseDiagram phase_diagram(const GameParams& base, int n_theta = 32, int n_pb = 32,
                                  int grid_n = 96, int jobs = 1) {
  if (n_theta < 32 || n_pb < 32) throw ConfigError("phase_diagram: need at least a 32x32 grid");
  if (jobs < 1) throw ConfigError("phase_diagram: jobs must be positive");
  PhaseDiagram d;
  d.theta_values.resize(n_theta);
  d.pb_values.resize(n_pb);
  for (int i = 0; i < n_theta; ++i) d.theta_values[i] = static_cast<double>(i) / (n_theta - 1);
  for (int k = 0; k < n_pb; ++k) d.pb_values[k] = 0.5 * k / (n_pb - 1);
  d.cells.resize(static_cast<size_t>(n_theta) * n_pb);

  std::atomic<int> next{0};
  const int total = n_theta * n_pb;
  const auto worker = [&] {
    for (int idx = next.fetch_add(1); idx < total; idx = next.fetch_add(1)) {
      const int it = idx / n_pb, ip = idx % n_pb;
      GameParams par = base;
      par.theta_1 = d.theta_values[it];
      par.theta_2 = 1.0 - par.theta_1;
      par.pb_1 = d.pb_values[ip];
      par.pb_2 = 1.0 - par.pb_1;
      d.cells[idx] = classify_region(par, grid_n);
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  d.boundary_roots.reserve(n_theta);
  for (const double tv : d.theta_values) d.boundary_roots.push_back(phase_boundary_roots(tv, base));
  return d;
}

}  // namespace agora
