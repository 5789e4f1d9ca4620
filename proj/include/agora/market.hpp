#pragma once

#include <cmath>

#include "agora/common.hpp"

namespace agora {

// Two markets, two agent classes. theta_m is market m's price-setting bias:
// the weight it puts on the mean received bid, the rest going to the mean
// received ask. pb_c is the probability that a class-c agent submits a bid
// rather than an ask. Bid and ask prices are Gaussian around mu_b and mu_a.
//
// Only the difference mu_b - mu_a matters for payoffs (translation
// invariance). The defaults put the bid mean one order-noise sigma above the
// ask mean; both validity probabilities stay interior for all theta.
struct GameParams {
  double theta_1 = 0.3;
  double theta_2 = 0.7;
  double mu_b = 10.0;
  double mu_a = 9.0;
  double sigma_b = 1.0;
  double sigma_a = 1.0;
  double pb_1 = 0.2;
  double pb_2 = 0.8;

  double theta(int market) const { return market == 0 ? theta_1 : theta_2; }
  double pb(int cls) const { return cls == 0 ? pb_1 : pb_2; }

  // Simultaneous class and market relabeling is a symmetry of the game iff
  // theta_2 = 1 - theta_1 and pb_2 = 1 - pb_1.
  bool symmetric(double tol = 1e-9) const {
    return std::abs(theta_1 + theta_2 - 1.0) <= tol &&
           std::abs(pb_1 + pb_2 - 1.0) <= tol;
  }

  void validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(theta_1) || !in01(theta_2)) throw ConfigError("theta out of [0,1]");
    if (!in01(pb_1) || !in01(pb_2)) throw ConfigError("pb out of [0,1]");
    if (!(sigma_b > 0.0) || !(sigma_a > 0.0)) throw ConfigError("sigma must be positive");
    if (!std::isfinite(mu_b) || !std::isfinite(mu_a)) throw ConfigError("mu must be finite");
  }
};

enum class Side { ask, bid };

// Price at which market m clears: theta weighs the mean bid, the complement
// the mean ask. Bids sit above asks on average, so a larger theta pushes the
// price toward the buyers' side.
inline double trading_price(double theta, double mean_bid, double mean_ask) {
  return theta * mean_bid + (1.0 - theta) * mean_ask;
}

// Probability that an order is on the tradable side of pi: asks must
// undercut it, bids must overbid it.
inline double validity_prob(Side side, double pi, const GameParams& p) {
  return side == Side::ask ? norm_cdf((pi - p.mu_a) / p.sigma_a)
                           : norm_cdf((p.mu_b - pi) / p.sigma_b);
}

// Mean and mean square of the score |order price - pi| conditional on the
// order being valid: one-sided truncated Gaussian moments in closed form.
struct Moments {
  double mean = 0.0;
  double mean_sq = 0.0;
};

inline Moments score_moments(Side side, double pi, const GameParams& p) {
  const double sigma = side == Side::ask ? p.sigma_a : p.sigma_b;
  const double z = side == Side::ask ? (pi - p.mu_a) / sigma : (p.mu_b - pi) / sigma;
  const double v = norm_cdf(z);
  if (v < 1e-300) throw NumericalError("score_moments: vanishing validity");
  const double mills = norm_pdf(z) / v;
  return {sigma * (z + mills), sigma * sigma * (z * z + 1.0 + z * mills)};
}

// Fraction of valid orders on one side that find a counterparty, given the
// buyer-to-seller ratio f. The scarcer side always matches in full.
// Conventions: f = 0 (no buyers) matches every bid and no ask; f = inf is the
// mirror image. Both are the continuous limits of the ratio formulas.
inline double matching_prob(Side side, double f, double v_a, double v_b) {
  if (side == Side::ask) {
    if (f == 0.0 || v_b == 0.0) return 0.0;
    if (std::isinf(f) || v_a == 0.0) return 1.0;
    return std::min(f * v_b / v_a, 1.0);
  }
  if (f == 0.0 || v_b == 0.0) return 1.0;
  if (std::isinf(f) || v_a == 0.0) return 0.0;
  return std::min(v_a / (f * v_b), 1.0);
}

// Class-average probabilities of choosing market 1.
struct Aggregates {
  double pbar_1 = 0.5;
  double pbar_2 = 0.5;
};

// Buyer-to-seller ratio per market. A market that receives no orders at all
// carries f = NaN and the empty flag; payoffs there are 0 by convention.
struct MarketConditions {
  double f_1 = 1.0, f_2 = 1.0;
  bool empty_1 = false, empty_2 = false;
  double f(int market) const { return market == 0 ? f_1 : f_2; }
  bool empty(int market) const { return market == 0 ? empty_1 : empty_2; }
};

inline MarketConditions buyer_seller_ratios(const Aggregates& aggr, const GameParams& p) {
  const double w1 = aggr.pbar_1, w2 = aggr.pbar_2;
  const double buy1 = p.pb_1 * w1 + p.pb_2 * w2;
  const double sell1 = (1.0 - p.pb_1) * w1 + (1.0 - p.pb_2) * w2;
  const double buy2 = p.pb_1 * (1.0 - w1) + p.pb_2 * (1.0 - w2);
  const double sell2 = (1.0 - p.pb_1) * (1.0 - w1) + (1.0 - p.pb_2) * (1.0 - w2);
  MarketConditions mc;
  mc.empty_1 = buy1 == 0.0 && sell1 == 0.0;
  mc.empty_2 = buy2 == 0.0 && sell2 == 0.0;
  mc.f_1 = mc.empty_1 ? kNan : (sell1 == 0.0 ? kInf : buy1 / sell1);
  mc.f_2 = mc.empty_2 ? kNan : (sell2 == 0.0 ? kInf : buy2 / sell2);
  return mc;
}

// Expected payoff and squared payoff of one order of the given side at
// market m: validity times matching times the conditional score moment.
// f_m = NaN means the market is empty and pays 0.
struct OrderPayoff {
  double p = 0.0;
  double q = 0.0;
};

inline OrderPayoff order_payoff(Side side, int market, double f_m, const GameParams& par) {
  if (std::isnan(f_m)) return {};
  const double pi = trading_price(par.theta(market), par.mu_b, par.mu_a);
  const double v_a = validity_prob(Side::ask, pi, par);
  const double v_b = validity_prob(Side::bid, pi, par);
  const double v = side == Side::ask ? v_a : v_b;
  const double m = matching_prob(side, f_m, v_a, v_b);
  // Sub-1e-300 validity would trip the score_moments underflow guard; the
  // payoff it scales is indistinguishable from zero anyway.
  if (v < 1e-300 || m == 0.0) return {};
  const Moments sm = score_moments(side, pi, par);
  return {v * m * sm.mean, v * m * sm.mean_sq};
}

// Expected payoffs per market for one class, mixing its buy/sell propensity.
struct PayoffTable {
  double p_1 = 0.0, p_2 = 0.0;  // expected score at market 1 / market 2
  double q_1 = 0.0, q_2 = 0.0;  // expected squared score
  double p(int market) const { return market == 0 ? p_1 : p_2; }
  double q(int market) const { return market == 0 ? q_1 : q_2; }
};

inline PayoffTable class_payoffs(int cls, const MarketConditions& mc, const GameParams& par) {
  PayoffTable t;
  const double pb = par.pb(cls);
  for (int m = 0; m < 2; ++m) {
    const OrderPayoff b = order_payoff(Side::bid, m, mc.f(m), par);
    const OrderPayoff a = order_payoff(Side::ask, m, mc.f(m), par);
    (m == 0 ? t.p_1 : t.p_2) = pb * b.p + (1.0 - pb) * a.p;
    (m == 0 ? t.q_1 : t.q_2) = pb * b.q + (1.0 - pb) * a.q;
  }
  return t;
}

inline double mixed_payoff(double p, const PayoffTable& t) {
  return p * t.p_1 + (1.0 - p) * t.p_2;
}

inline PayoffTable class_payoffs_at(int cls, const Aggregates& aggr, const GameParams& par) {
  return class_payoffs(cls, buyer_seller_ratios(aggr, par), par);
}

}  // namespace agora
