#include "agora/large_deviation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"

using namespace agora;

namespace {

GameParams baseline_params() {
  GameParams p;
  p.theta_1 = 0.3;
  p.theta_2 = 0.7;
  p.pb_1 = 0.2;
  p.pb_2 = 0.8;
  return p;
}

const double kBeta = 1.0 / 0.11;

TEST(DoubleWell, ActivationActionMatchesAnalyticValue) {
  for (const double barrier : {0.1, 0.25, 0.5}) {
    const oracles::DoubleWellModel model{barrier};
    // 80 segments over 5 well-relaxation times: the midpoint-rule bias is
    // ~0.26% of the exact value, well inside the 1% tolerance.
    const double t_span = 5.0 / model.g;
    const auto res =
        detail::minimize_action_core(model, {-1.0, 0.0}, {0.0, 0.0}, 80, t_span);
    EXPECT_TRUE(res.converged) << "g = " << barrier;
    EXPECT_NEAR(res.action, model.exact_activation_action(),
                0.01 * model.exact_activation_action())
        << "g = " << barrier;
  }
}

TEST(DoubleWell, DownhillActionIsFree) {
  const oracles::DoubleWellModel model{0.25};
  const auto res = detail::minimize_action_core(model, {0.0, 0.0}, {-1.0, 0.0}, 40, 20.0);
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.action, 1e-3);
}

TEST(ActionGradient, MatchesFiniteDifferencesOnDoubleWell) {
  const oracles::DoubleWellModel model{0.25};
  const int n_steps = 8;
  const double dt = 20.0 / n_steps;
  std::vector<Vec2> states(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) {
    const double w = static_cast<double>(i) / n_steps;
    // A bent, non-optimal path so the gradient is far from zero.
    states[i] = {-1.0 + w, 0.3 * w * (1.0 - w)};
  }
  std::vector<double> grad(2 * (n_steps - 1));
  detail::path_action_core(model, states, dt, &grad);

  const auto pack = [&](const std::vector<double>& x) {
    std::vector<Vec2> s = states;
    for (int i = 1; i < n_steps; ++i) s[i] = {x[2 * (i - 1)], x[2 * (i - 1) + 1]};
    return s;
  };
  std::vector<double> x0(2 * (n_steps - 1));
  for (int i = 1; i < n_steps; ++i) {
    x0[2 * (i - 1)] = states[i].x;
    x0[2 * (i - 1) + 1] = states[i].y;
  }
  const auto fd = oracles::fd_gradient(
      [&](const std::vector<double>& x) {
        return detail::path_action_core(model, pack(x), dt);
      },
      x0);
  for (std::size_t i = 0; i < fd.size(); ++i)
    EXPECT_NEAR(grad[i], fd[i], 1e-5 * std::max(1.0, std::abs(fd[i]))) << "component " << i;
}

TEST(ActionGradient, MatchesFiniteDifferencesOnTheMarketModel) {
  const GameParams par = baseline_params();
  const LearningParams lp{0.01, 0.075, kBeta};
  const PayoffTable table = class_payoffs_at(0, {0.42, 0.58}, par);
  const auto set = fixed_points(table, lp);
  ASSERT_GE(set.points.size(), 2u);
  const Vec2 from{set.points[0].state.a_1, set.points[0].state.a_2};
  const Vec2 to{set.points[1].state.a_1, set.points[1].state.a_2};

  const MarketKmModel model{table, lp};
  const int n_steps = 8;
  const double dt = 10.0 / n_steps;
  std::vector<Vec2> states(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) {
    const double w = static_cast<double>(i) / n_steps;
    states[i] = (1.0 - w) * from + w * to;
  }
  std::vector<double> grad(2 * (n_steps - 1));
  detail::path_action_core(model, states, dt, &grad);

  const auto pack = [&](const std::vector<double>& x) {
    std::vector<Vec2> s = states;
    for (int i = 1; i < n_steps; ++i) s[i] = {x[2 * (i - 1)], x[2 * (i - 1) + 1]};
    return s;
  };
  std::vector<double> x0(2 * (n_steps - 1));
  for (int i = 1; i < n_steps; ++i) {
    x0[2 * (i - 1)] = states[i].x;
    x0[2 * (i - 1) + 1] = states[i].y;
  }
  const auto fd = oracles::fd_gradient(
      [&](const std::vector<double>& x) {
        return detail::path_action_core(model, pack(x), dt);
      },
      x0);
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i)
    worst = std::max(worst, std::abs(grad[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
  EXPECT_LT(worst, 1e-5);
}

TEST(MinimizeAction, FrozenActivationActionsAtHighAlpha) {
  const GameParams par = baseline_params();
  const LearningParams lp{0.01, 0.075, kBeta};
  const PayoffTable table = class_payoffs_at(0, {0.42, 0.58}, par);
  const auto set = fixed_points(table, lp);
  ASSERT_EQ(set.points.size(), 5u);

  const auto act = [&](int from, int saddle) {
    const auto spec = minimize_action(set.points[from], set.points[saddle], table, lp);
    EXPECT_TRUE(spec.converged);
    return spec.min_action;
  };
  EXPECT_NEAR(act(0, 1), 6.348e-2, 2e-4);
  EXPECT_NEAR(act(2, 1), 5.054e-2, 2e-4);
  EXPECT_NEAR(act(2, 3), 4.551e-2, 2e-4);
  EXPECT_NEAR(act(4, 3), 6.370e-2, 2e-4);
}

TEST(MinimizeAction, PathRecomputesToTheReportedAction) {
  const GameParams par = baseline_params();
  const LearningParams lp{0.01, 0.075, kBeta};
  const PayoffTable table = class_payoffs_at(0, {0.42, 0.58}, par);
  const auto set = fixed_points(table, lp);
  const auto spec = minimize_action(set.points[0], set.points[1], table, lp, 20);
  ASSERT_EQ(spec.path.states.size(), 21u);
  EXPECT_NEAR(spec.path.states.front().a_1, set.points[0].state.a_1, 1e-12);
  EXPECT_NEAR(spec.path.states.back().a_2, set.points[1].state.a_2, 1e-12);
  EXPECT_NEAR(path_action(spec.path, table, lp), spec.min_action, 1e-12);
}

TEST(MinimizeAction, RefinementIsStable) {
  const GameParams par = baseline_params();
  const LearningParams lp{0.01, 0.075, kBeta};
  const PayoffTable table = class_payoffs_at(0, {0.42, 0.58}, par);
  const auto set = fixed_points(table, lp);
  const double s10 = minimize_action(set.points[0], set.points[1], table, lp, 10).min_action;
  const double s20 = minimize_action(set.points[0], set.points[1], table, lp, 20).min_action;
  const double s40 = minimize_action(set.points[0], set.points[1], table, lp, 40).min_action;
  // Refinement changes the value by well under 2%; the midpoint rule is not
  // exactly one-sided, so monotonicity holds only up to a small slack.
  EXPECT_LT(std::abs(s40 - s20), 0.02 * s40);
  EXPECT_LE(s20, s10 * (1.0 + 1e-3));
  EXPECT_LE(s40, s20 * (1.0 + 1e-3));
}

TEST(MinimizeAction, RejectsWrongEndpointKinds) {
  const GameParams par = baseline_params();
  const LearningParams lp{0.01, 0.075, kBeta};
  const PayoffTable table = class_payoffs_at(0, {0.42, 0.58}, par);
  const auto set = fixed_points(table, lp);
  EXPECT_THROW(minimize_action(set.points[1], set.points[0], table, lp), ConfigError);
  EXPECT_THROW(minimize_action(set.points[0], set.points[2], table, lp), ConfigError);
}

TEST(ActionDifference, VanishesInTheSymmetricGame) {
  GameParams par;
  par.theta_1 = 0.5;
  par.theta_2 = 0.5;
  par.pb_1 = 0.5;
  par.pb_2 = 0.5;
  const LearningParams lp{0.01, 0.3, 10.0};
  const PayoffTable table = class_payoffs_at(0, {0.5, 0.5}, par);
  const auto set = fixed_points(table, lp);
  ASSERT_EQ(set.points.size(), 3u);
  EXPECT_NEAR(set.points[0].delta, -0.6932, 1e-3);
  EXPECT_NEAR(set.points[2].delta, 0.6932, 1e-3);
  const double ds = action_difference(set.points[0], set.points[2], set.points[1], table, lp);
  EXPECT_LT(std::abs(ds), 1e-6);
}

TEST(PeakChain, WeightsAreNormalizedAndConsistent) {
  const GameParams par = baseline_params();
  const LearningParams lp{0.01, 0.075, kBeta};
  const PayoffTable table = class_payoffs_at(0, {0.42, 0.58}, par);
  const auto set = fixed_points(table, lp);
  const auto chain = detail::peak_chain(set, table, lp, 10, 10.0);
  ASSERT_EQ(chain.delta.size(), 3u);
  EXPECT_TRUE(chain.converged);
  EXPECT_DOUBLE_EQ(chain.log_weight[0], 0.0);
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (chain.log_weight[k] > chain.log_weight[best]) best = k;
  EXPECT_EQ(chain.dominant, best);
  for (int k = 0; k < 3; ++k)
    EXPECT_NEAR(chain.delta[k], set.points[chain.stable_idx[k]].delta, 1e-12);
}

TEST(CoexistenceAggregate, FrozenTiePoints) {
  const GameParams par = baseline_params();
  EXPECT_NEAR(coexistence_aggregate(-0.5, 0.5, par, {0.01, 1.0, 10.0}, 0.3, 0.55), 0.438650,
              1e-4);
  EXPECT_NEAR(coexistence_aggregate(-0.49, 0.49, par, {0.01, 0.075, kBeta}, 0.40, 0.44),
              0.420789, 1e-4);
}

TEST(CoexistenceAggregate, ThrowsWithoutABracket) {
  const GameParams par = baseline_params();
  EXPECT_THROW(coexistence_aggregate(-0.5, 0.5, par, {0.01, 1.0, 10.0}, 0.6, 0.8),
               NumericalError);
}

TEST(TildeCurve, ScanIsWellFormed) {
  const GameParams par = baseline_params();
  const auto curve = tilde_p_curve(par, {0.01, 0.075, kBeta});
  SteadyStateOptions opt;
  ASSERT_EQ(curve.points.size(), static_cast<std::size_t>(opt.n_grid));
  for (const auto& pt : curve.points) {
    EXPECT_GT(pt.p_tilde, 0.0);
    EXPECT_LT(pt.p_tilde, 1.0);
    EXPECT_GE(pt.n_stable, 1);
  }
  EXPECT_TRUE(std::is_sorted(curve.switch_points.begin(), curve.switch_points.end()));
  for (const double s : curve.switch_points) {
    EXPECT_GT(s, opt.x_lo);
    EXPECT_LT(s, opt.x_hi);
  }
}

TEST(SteadyState, KindLadderAcrossAlpha) {
  const GameParams par = baseline_params();
  const auto solve = [&](double alpha) {
    return solve_steady_state(par, {0.01, alpha, kBeta});
  };
  const auto s045 = solve(0.045);
  EXPECT_EQ(s045.kind, SteadyStateKind::homogeneous_mixed);
  EXPECT_NEAR(s045.aggregates.pbar_1, 0.438924, 1e-3);

  const auto s065 = solve(0.065);
  EXPECT_EQ(s065.kind, SteadyStateKind::heterogeneous_mixed);
  EXPECT_NEAR(s065.aggregates.pbar_1, 0.432466, 1e-3);

  const auto s075 = solve(0.075);
  EXPECT_EQ(s075.kind, SteadyStateKind::heterogeneous_pure);
  EXPECT_NEAR(s075.aggregates.pbar_1, 0.420789, 1e-3);
  ASSERT_EQ(s075.peaks.size(), 2u);
  EXPECT_NEAR(s075.peaks[0].weight, 0.5810, 5e-3);
  EXPECT_NEAR(s075.peaks[1].weight, 0.4190, 5e-3);
}

TEST(SteadyState, WeightsReconstructTheAggregate) {
  const GameParams par = baseline_params();
  for (const double alpha : {0.045, 0.065, 0.0728, 0.075}) {
    const LearningParams lp{0.01, alpha, kBeta};
    const auto sol = solve_steady_state(par, lp);
    double w_sum = 0.0, p = 0.0;
    for (const auto& pk : sol.peaks) {
      w_sum += pk.weight;
      p += pk.weight * softmax_choice(pk.point.delta, lp.beta);
    }
    EXPECT_NEAR(w_sum, 1.0, 1e-9);
    EXPECT_NEAR(p, sol.aggregates.pbar_1, 1e-5);
    EXPECT_NEAR(sol.aggregates.pbar_1 + sol.aggregates.pbar_2, 1.0, 1e-12);
    EXPECT_TRUE(sol.optimizer_converged);
  }
}

TEST(SteadyState, ThreePeakFamilyAtTheTie) {
  const GameParams par = baseline_params();
  const LearningParams lp{0.01, 0.0728, kBeta};
  const auto sol = solve_steady_state(par, lp);
  ASSERT_EQ(sol.kind, SteadyStateKind::three_peak);
  ASSERT_EQ(sol.peaks.size(), 3u);
  ASSERT_EQ(sol.weight_family_lo.size(), 3u);
  ASSERT_EQ(sol.weight_family_hi.size(), 3u);
  // Family endpoints are valid weight vectors reconstructing the aggregate.
  for (const auto* w : {&sol.weight_family_lo, &sol.weight_family_hi}) {
    double sum = 0.0, p = 0.0;
    for (int j = 0; j < 3; ++j) {
      EXPECT_GE((*w)[j], -1e-9);
      sum += (*w)[j];
      p += (*w)[j] * softmax_choice(sol.peaks[j].point.delta, lp.beta);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_NEAR(p, sol.aggregates.pbar_1, 1e-6);
  }
  // One endpoint drops the central peak, the other an outer one: the family
  // connects the pure pair to the mixed pair.
  EXPECT_NEAR(sol.weight_family_lo[1], 0.0, 1e-9);
  EXPECT_NEAR(sol.weight_family_hi[2], 0.0, 1e-9);
}

TEST(SteadyState, SymmetricGameSplitsEvenly) {
  GameParams par;
  par.theta_1 = 0.5;
  par.theta_2 = 0.5;
  par.pb_1 = 0.5;
  par.pb_2 = 0.5;
  const auto sol = solve_steady_state(par, {0.01, 0.3, 10.0});
  EXPECT_EQ(sol.kind, SteadyStateKind::heterogeneous_pure);
  EXPECT_NEAR(sol.aggregates.pbar_1, 0.5, 1e-6);
  ASSERT_EQ(sol.peaks.size(), 2u);
  EXPECT_NEAR(sol.peaks[0].weight, 0.5, 1e-6);
  EXPECT_NEAR(sol.peaks[1].weight, 0.5, 1e-6);
}

TEST(CriticalAlphas, FrozenThresholdsAtPaperBeta) {
  const GameParams par = baseline_params();
  const auto ca = critical_alphas(kBeta, par);
  EXPECT_NEAR(ca.alpha_c, 0.063514, 1e-3);
  EXPECT_NEAR(ca.alpha_c_prime, 0.0728, 1e-3);
  EXPECT_NEAR(ca.alpha_c_dprime, 0.116547, 2e-3);
  EXPECT_LT(ca.alpha_c, ca.alpha_c_prime);
  EXPECT_LT(ca.alpha_c_prime, ca.alpha_c_dprime);
  // The mixed/pure boundary is the three-way tie: solving there opens the
  // one-parameter family.
  const auto sol = solve_steady_state(par, {0.01, ca.alpha_c_prime, kBeta});
  EXPECT_EQ(sol.kind, SteadyStateKind::three_peak);
}

TEST(CriticalAlphas, FailsCleanlyBelowTheHeterogeneousRegime) {
  const GameParams par = baseline_params();
  EXPECT_THROW(critical_alphas(1.0, par), NumericalError);
}

}  // namespace
