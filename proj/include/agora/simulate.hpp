#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "agora/common.hpp"
#include "agora/fokker_planck.hpp"
#include "agora/market.hpp"
#include "agora/rng.hpp"
#include "agora/stats.hpp"

namespace agora {

struct SimConfig {
  int n_agents = 1000;  // split equally between the two classes
  GameParams params;
  LearningParams learning;
  long n_rounds = 1000;
  std::uint64_t seed = 0;
  std::vector<double> snapshot_times;  // rescaled times t = r * round
  int trace_stride = 1;                // record every k-th round
  AttractionState init_1;              // initial attractions, class 1
  AttractionState init_2;

  void validate() const {
    params.validate();
    learning.validate();
    if (n_agents < 2 || n_agents % 2 != 0)
      throw ConfigError("SimConfig: n_agents must be even and positive");
    if (n_rounds < 1) throw ConfigError("SimConfig: n_rounds must be at least 1");
    if (trace_stride < 1) throw ConfigError("SimConfig: trace_stride must be positive");
    const double t_end = learning.r * static_cast<double>(n_rounds);
    for (const double t : snapshot_times)
      if (t < 0.0 || t > t_end + 1e-12)
        throw ConfigError("SimConfig: snapshot time outside the simulated window");
  }
};

struct Agent {
  int cls = 0;
  AttractionState a;
};

struct Population {
  std::vector<Agent> agents;
  Aggregates realized{kNan, kNan};  // last round's realized choice fractions

  std::vector<double> deltas(int cls) const {
    std::vector<double> out;
    for (const auto& ag : agents)
      if (ag.cls == cls) out.push_back(ag.a.delta());
    return out;
  }
};

inline Population make_population(const SimConfig& cfg) {
  cfg.validate();
  Population pop;
  pop.agents.resize(cfg.n_agents);
  for (int i = 0; i < cfg.n_agents; ++i) {
    pop.agents[i].cls = i < cfg.n_agents / 2 ? 0 : 1;
    pop.agents[i].a = pop.agents[i].cls == 0 ? cfg.init_1 : cfg.init_2;
  }
  return pop;
}

struct RoundStats {
  Aggregates realized;
  double pi_1 = kNan, pi_2 = kNan;  // NaN when a side of the market was empty
  int matched_1 = 0, matched_2 = 0;
  int bids_1 = 0, asks_1 = 0, bids_2 = 0, asks_2 = 0;              // submitted
  int valid_bids_1 = 0, valid_asks_1 = 0, valid_bids_2 = 0, valid_asks_2 = 0;
};

namespace detail {

// Counter layout. Agents own counters (agent_id, round << 2 | slot): slot 0
// supplies the market and side uniforms, slot 1 the price normal. Markets
// own counters (sentinel | market, round << 32 | draw) consumed sequentially
// by the matching shuffle. No stream can collide with another.
struct MarketStream {
  std::uint64_t key;
  std::uint64_t c0;
  std::uint64_t base;
  std::uint64_t draw = 0;

  MarketStream(std::uint64_t seed, int market, long round)
      : key(seed),
        c0(0xFFFFFFFF00000000ull | static_cast<std::uint64_t>(market)),
        base(static_cast<std::uint64_t>(round) << 32) {}

  std::uint64_t bits() { return philox::block(key, c0, base | draw++)[0]; }
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    for (;;) {
      const std::uint64_t b = bits();
      if (b < limit) return b % n;
    }
  }
};

}  // namespace detail

// One trading round: simultaneous market choices, order submission, price
// formation from the realized order means, uniform matching of the valid
// orders, and the attraction update.
inline RoundStats run_round(Population& pop, const GameParams& par, const LearningParams& lp,
                            std::uint64_t seed, long round) {
  const int n = static_cast<int>(pop.agents.size());
  static thread_local std::vector<int> market_of, side_of;
  static thread_local std::vector<double> price_of, score_of;
  market_of.assign(n, 0);
  side_of.assign(n, 0);
  price_of.assign(n, 0.0);
  score_of.assign(n, 0.0);

  int chose_1[2] = {0, 0}, class_size[2] = {0, 0};
  const std::uint64_t round_base = static_cast<std::uint64_t>(round) << 2;
  for (int i = 0; i < n; ++i) {
    const Agent& ag = pop.agents[i];
    const auto u = philox::block(seed, static_cast<std::uint64_t>(i), round_base | 0);
    const int m = philox::u01(u[0]) < softmax_choice(ag.a.delta(), lp.beta) ? 0 : 1;
    const bool buyer = philox::u01(u[1]) < par.pb(ag.cls);
    const auto z = philox::block(seed, static_cast<std::uint64_t>(i), round_base | 1);
    const double zn = philox::normal_pair(z[0], z[1])[0];
    const double price = buyer ? par.mu_b + par.sigma_b * zn : par.mu_a + par.sigma_a * zn;
    market_of[i] = m;
    side_of[i] = buyer ? 1 : 0;
    price_of[i] = price;
    ++class_size[ag.cls];
    if (m == 0) ++chose_1[ag.cls];
  }

  RoundStats stats;
  stats.realized = {static_cast<double>(chose_1[0]) / class_size[0],
                    static_cast<double>(chose_1[1]) / class_size[1]};

  for (int m = 0; m < 2; ++m) {
    static thread_local std::vector<int> bids, asks;
    bids.clear();
    asks.clear();
    double bid_sum = 0.0, ask_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (market_of[i] != m) continue;
      if (side_of[i]) {
        bids.push_back(i);
        bid_sum += price_of[i];
      } else {
        asks.push_back(i);
        ask_sum += price_of[i];
      }
    }
    (m == 0 ? stats.bids_1 : stats.bids_2) = static_cast<int>(bids.size());
    (m == 0 ? stats.asks_1 : stats.asks_2) = static_cast<int>(asks.size());
    // One empty side: no price forms, nobody trades, everyone scores zero.
    if (bids.empty() || asks.empty()) continue;
    const double pi = trading_price(par.theta(m), bid_sum / bids.size(), ask_sum / asks.size());
    (m == 0 ? stats.pi_1 : stats.pi_2) = pi;

    static thread_local std::vector<int> valid_bids, valid_asks;
    valid_bids.clear();
    valid_asks.clear();
    for (const int i : bids)
      if (price_of[i] > pi) valid_bids.push_back(i);
    for (const int i : asks)
      if (price_of[i] < pi) valid_asks.push_back(i);
    (m == 0 ? stats.valid_bids_1 : stats.valid_bids_2) = static_cast<int>(valid_bids.size());
    (m == 0 ? stats.valid_asks_1 : stats.valid_asks_2) = static_cast<int>(valid_asks.size());

    const int k = static_cast<int>(std::min(valid_bids.size(), valid_asks.size()));
    (m == 0 ? stats.matched_1 : stats.matched_2) = k;
    if (k == 0) continue;
    // The short side trades in full; a partial Fisher-Yates picks which k of
    // the long side trade. Uniform selection is equivalent to uniform random
    // pairing, since the score depends only on the agent's own price.
    auto& longer = valid_bids.size() > valid_asks.size() ? valid_bids : valid_asks;
    auto& shorter = valid_bids.size() > valid_asks.size() ? valid_asks : valid_bids;
    detail::MarketStream ms(seed, m, round);
    for (int j = 0; j < k && j < static_cast<int>(longer.size()) - 1; ++j)
      std::swap(longer[j], longer[j + ms.below(longer.size() - j)]);
    for (int j = 0; j < k; ++j) {
      score_of[longer[j]] = std::abs(price_of[longer[j]] - pi);
      score_of[shorter[j]] = std::abs(price_of[shorter[j]] - pi);
    }
  }

  const double r = lp.r, ar = lp.alpha * lp.r;
  for (int i = 0; i < n; ++i) {
    Agent& ag = pop.agents[i];
    if (market_of[i] == 0) {
      ag.a.a_1 = (1.0 - r) * ag.a.a_1 + r * score_of[i];
      ag.a.a_2 = (1.0 - ar) * ag.a.a_2;
    } else {
      ag.a.a_2 = (1.0 - r) * ag.a.a_2 + r * score_of[i];
      ag.a.a_1 = (1.0 - ar) * ag.a.a_1;
    }
  }
  pop.realized = stats.realized;
  return stats;
}

struct TraceRow {
  double t = 0.0;
  double pbar_1 = kNan, pbar_2 = kNan;
  double pi_1 = kNan, pi_2 = kNan;
  int matched_1 = 0, matched_2 = 0;
};

struct Snapshot {
  double t = 0.0;
  long round = 0;
  std::vector<double> deltas_1, deltas_2;  // raw A_1 - A_2 samples per class
};

struct SimTrace {
  std::vector<TraceRow> rows;
  std::vector<Snapshot> snapshots;
};

inline SimTrace simulate(const SimConfig& cfg) {
  cfg.validate();
  Population pop = make_population(cfg);

  std::vector<long> snap_rounds;
  for (const double t : cfg.snapshot_times)
    snap_rounds.push_back(cfg.learning.r > 0.0 ? std::llround(t / cfg.learning.r) : 0);
  SimTrace trace;

  const auto take_snapshot = [&](long round) {
    Snapshot s;
    s.t = cfg.learning.r * static_cast<double>(round);
    s.round = round;
    s.deltas_1 = pop.deltas(0);
    s.deltas_2 = pop.deltas(1);
    trace.snapshots.push_back(std::move(s));
  };
  for (std::size_t k = 0; k < snap_rounds.size(); ++k)
    if (snap_rounds[k] == 0) take_snapshot(0);

  for (long round = 0; round < cfg.n_rounds; ++round) {
    const RoundStats st = run_round(pop, cfg.params, cfg.learning, cfg.seed, round);
    if (round % cfg.trace_stride == 0 || round == cfg.n_rounds - 1) {
      trace.rows.push_back({cfg.learning.r * static_cast<double>(round + 1), st.realized.pbar_1,
                            st.realized.pbar_2, st.pi_1, st.pi_2, st.matched_1, st.matched_2});
    }
    for (std::size_t k = 0; k < snap_rounds.size(); ++k)
      if (snap_rounds[k] == round + 1) take_snapshot(round + 1);
  }
  return trace;
}

// Attraction-difference histogram of one class; every agent lands in a bin.
inline Histogram histogram(const Population& pop, int cls, int bins, double lo, double hi) {
  return make_histogram(pop.deltas(cls), bins, lo, hi);
}
inline Histogram histogram(const Population& pop, int cls, int bins = 100) {
  return make_histogram(pop.deltas(cls), bins);
}

struct EscapeObservation {
  int n_agents = 0;
  int rep = 0;
  double exit_time = kNan;  // rescaled time of first exit from the band
  bool censored = false;    // still inside when the round budget ran out
};

struct EscapeScan {
  double band_center = kNan;
  double band_delta = kNan;
  std::vector<EscapeObservation> observations;

  double median_exit(int n_agents) const {
    std::vector<double> v;
    for (const auto& o : observations)
      if (o.n_agents == n_agents) v.push_back(o.exit_time);
    if (v.empty()) throw ConfigError("median_exit: no observations for that size");
    return median_of(std::move(v));
  }
};

// First-exit times of the realized class-1 aggregate from a band around the
// metastable mixed state, across population sizes. Initial attractions sit
// at the self-consistent central fixed point of each class, so the walk
// starts at the bottom of the metastable well.
inline EscapeScan escape_time_scan(const SimConfig& base, const std::vector<int>& n_agents_list,
                                   double band_delta = 0.1, int reps = 3,
                                   double band_center = kNan) {
  base.validate();
  if (!(band_delta >= 0.0)) throw ConfigError("escape_time_scan: negative band width");
  if (reps < 1) throw ConfigError("escape_time_scan: need at least one repetition");

  EscapeScan scan;
  scan.band_delta = band_delta;
  const auto self = homogeneous_self_consistent(base.params, base.learning).primary();
  scan.band_center = std::isnan(band_center) ? self.aggregates.pbar_1 : band_center;

  SimConfig cfg = base;
  const auto central = [](const FixedPointSet& set) {
    for (const auto& p : set.points)
      if (p.stable && p.central) return p.state;
    throw NumericalError("escape_time_scan: no central fixed point at the mixed state");
  };
  cfg.init_1 = central(self.fixed_points_1);
  cfg.init_2 = central(self.fixed_points_2);

  for (const int n : n_agents_list) {
    cfg.n_agents = n;
    for (int rep = 0; rep < reps; ++rep) {
      cfg.seed = base.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(rep + 1) +
                 static_cast<std::uint64_t>(n);
      cfg.validate();
      Population pop = make_population(cfg);
      EscapeObservation obs;
      obs.n_agents = n;
      obs.rep = rep;
      obs.censored = true;
      obs.exit_time = cfg.learning.r * static_cast<double>(cfg.n_rounds);
      for (long round = 0; round < cfg.n_rounds; ++round) {
        const RoundStats st = run_round(pop, cfg.params, cfg.learning, cfg.seed, round);
        if (std::abs(st.realized.pbar_1 - scan.band_center) > band_delta) {
          obs.exit_time = cfg.learning.r * static_cast<double>(round + 1);
          obs.censored = false;
          break;
        }
      }
      scan.observations.push_back(obs);
    }
  }
  return scan;
}

struct MomentCheck {
  Vec2 analytic_mu;
  Sym2 analytic_sigma;
  Vec2 mc_mu;
  Sym2 mc_sigma;
  Vec2 mu_z;      // |mc - analytic| in standard errors, per component
  double sigma_z_max = 0.0;  // worst z across the three covariance entries
};

// Mean-field one-agent round, sampled: market by softmax, side by class
// probability, Gaussian price, validity against the deterministic price,
// matching as a Bernoulli draw, then the attraction jump. The first two jump
// moments estimate drift and diffusion directly.
inline MomentCheck moment_check(const AttractionState& a, const Aggregates& aggr,
                                const GameParams& par, const LearningParams& lp,
                                long n_samples, std::uint64_t seed, int cls = 0) {
  par.validate();
  lp.validate();
  if (n_samples < 1000) throw ConfigError("moment_check: sample count too small");
  const PayoffTable table = class_payoffs_at(cls, aggr, par);
  const MarketConditions mc = buyer_seller_ratios(aggr, par);

  double pi[2], m_ask[2], m_bid[2];
  for (int m = 0; m < 2; ++m) {
    pi[m] = trading_price(par.theta(m), par.mu_b, par.mu_a);
    if (mc.empty(m)) {
      m_ask[m] = m_bid[m] = 0.0;
    } else {
      const double va = validity_prob(Side::ask, pi[m], par);
      const double vb = validity_prob(Side::bid, pi[m], par);
      m_ask[m] = matching_prob(Side::ask, mc.f(m), va, vb);
      m_bid[m] = matching_prob(Side::bid, mc.f(m), va, vb);
    }
  }

  CounterRng rng(seed);
  const double s = softmax_choice(a.delta(), lp.beta);
  double sum[2] = {0, 0}, sum2[3] = {0, 0, 0};
  for (long it = 0; it < n_samples; ++it) {
    const int m = rng.uniform() < s ? 0 : 1;
    const bool buyer = rng.uniform() < par.pb(cls);
    const double price = buyer ? par.mu_b + par.sigma_b * rng.normal()
                               : par.mu_a + par.sigma_a * rng.normal();
    double score = 0.0;
    if (!mc.empty(m)) {
      const bool valid = buyer ? price > pi[m] : price < pi[m];
      if (valid && rng.uniform() < (buyer ? m_bid[m] : m_ask[m]))
        score = std::abs(price - pi[m]);
    }
    // Jump divided by r: the drift/diffusion normalization.
    const double j1 = m == 0 ? score - a.a_1 : -lp.alpha * a.a_1;
    const double j2 = m == 1 ? score - a.a_2 : -lp.alpha * a.a_2;
    sum[0] += j1;
    sum[1] += j2;
    sum2[0] += j1 * j1;
    sum2[1] += j1 * j2;
    sum2[2] += j2 * j2;
  }
  const double inv = 1.0 / static_cast<double>(n_samples);
  MomentCheck out;
  out.analytic_mu = drift(a, table, lp);
  out.analytic_sigma = diffusion(a, table, lp);
  out.mc_mu = {sum[0] * inv, sum[1] * inv};
  out.mc_sigma = {sum2[0] * inv, sum2[1] * inv, sum2[2] * inv};

  const double se1 = std::sqrt(std::max(out.mc_sigma.xx - out.mc_mu.x * out.mc_mu.x, 1e-300) *
                               inv);
  const double se2 = std::sqrt(std::max(out.mc_sigma.yy - out.mc_mu.y * out.mc_mu.y, 1e-300) *
                               inv);
  out.mu_z = {std::abs(out.mc_mu.x - out.analytic_mu.x) / se1,
              std::abs(out.mc_mu.y - out.analytic_mu.y) / se2};
  // Variance of a second-moment estimator: (E[x^4] - E[x^2]^2) / n, bounded
  // here by a normal-tail proxy from the fourth-moment inequality.
  const auto z2 = [&](double mc2, double an2, double fourth_proxy) {
    const double se = std::sqrt(std::max(fourth_proxy - an2 * an2, 1e-300) * inv);
    return std::abs(mc2 - an2) / se;
  };
  // Proxy fourth moments from the sampled second moments (scores are
  // bounded; 3x Gaussian kurtosis is a safe envelope).
  out.sigma_z_max = std::max({z2(out.mc_sigma.xx, out.analytic_sigma.xx,
                                 3.0 * out.mc_sigma.xx * out.mc_sigma.xx),
                              z2(out.mc_sigma.xy, out.analytic_sigma.xy,
                                 3.0 * out.mc_sigma.xx * out.mc_sigma.yy),
                              z2(out.mc_sigma.yy, out.analytic_sigma.yy,
                                 3.0 * out.mc_sigma.yy * out.mc_sigma.yy)});
  return out;
}

}  // namespace agora
