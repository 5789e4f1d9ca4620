// Command-line front end: every analysis as a subcommand, CSV/JSON outputs,
// config files, seeds, and a run manifest that makes re-runs byte-identical.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "agora/io.hpp"

namespace {

using nlohmann::json;

std::string default_out_dir() {
  const char* env = std::getenv("AGORA_OUT_DIR");
  return env != nullptr && *env != '\0' ? env : ".";
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return agora::unwrap_config(agora::read_json_file(path));
}

void write_manifest(const std::string& out_dir, const std::string& sub, const json& cfg,
                    std::uint64_t seed, std::vector<std::string> outputs) {
  agora::RunManifest m;
  m.subcommand = sub;
  m.config = cfg;
  m.seed = seed;
  m.version = agora::kToolVersion;
  m.outputs = std::move(outputs);
  agora::write_json_file(out_dir + "/manifest.json", json(m));
}

// Options shared by every subcommand. The seed is recorded in the manifest
// even by deterministic commands so re-runs are uniform.
struct CommonFlags {
  std::string out_dir = default_out_dir();
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* o_seed = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--out-dir", out_dir, "output directory (default: $AGORA_OUT_DIR or .)");
    app->add_option("--config", config_path, "JSON config file; a run manifest also works");
    o_seed = app->add_option("--seed", seed, "RNG seed for stochastic commands");
  }
  void prepare() const { std::filesystem::create_directories(out_dir); }
};

// Game parameter flags. Single-sided theta/pb flags complete the mirror
// class so the symmetric slice needs only two numbers.
struct GameFlags {
  double theta1 = 0, theta2 = 0, pb = 0, pb1 = 0, pb2 = 0;
  double mu_b = 0, mu_a = 0, sigma_b = 0, sigma_a = 0;
  CLI::Option *o_theta1 = nullptr, *o_theta2 = nullptr, *o_pb = nullptr, *o_pb1 = nullptr,
              *o_pb2 = nullptr, *o_mu_b = nullptr, *o_mu_a = nullptr, *o_sigma_b = nullptr,
              *o_sigma_a = nullptr;

  void attach(CLI::App* app) {
    o_theta1 = app->add_option("--theta1", theta1, "bid weight of market 1's clearing price");
    o_theta2 = app->add_option("--theta2", theta2, "bid weight of market 2 (default 1-theta1)");
    o_pb = app->add_option("--pb", pb, "class-1 buyer probability; class 2 gets 1-pb");
    o_pb1 = app->add_option("--pb1", pb1, "class-1 buyer probability");
    o_pb2 = app->add_option("--pb2", pb2, "class-2 buyer probability");
    o_mu_b = app->add_option("--mu-b", mu_b, "mean bid price");
    o_mu_a = app->add_option("--mu-a", mu_a, "mean ask price");
    o_sigma_b = app->add_option("--sigma-b", sigma_b, "bid price spread");
    o_sigma_a = app->add_option("--sigma-a", sigma_a, "ask price spread");
  }
  void apply(agora::GameParams& p) const {
    if (o_theta1->count()) {
      p.theta_1 = theta1;
      if (!o_theta2->count()) p.theta_2 = 1.0 - theta1;
    }
    if (o_theta2->count()) p.theta_2 = theta2;
    if (o_pb->count()) {
      p.pb_1 = pb;
      p.pb_2 = 1.0 - pb;
    }
    if (o_pb1->count()) {
      p.pb_1 = pb1;
      if (!o_pb2->count() && !o_pb->count()) p.pb_2 = 1.0 - pb1;
    }
    if (o_pb2->count()) p.pb_2 = pb2;
    if (o_mu_b->count()) p.mu_b = mu_b;
    if (o_mu_a->count()) p.mu_a = mu_a;
    if (o_sigma_b->count()) p.sigma_b = sigma_b;
    if (o_sigma_a->count()) p.sigma_a = sigma_a;
  }
};

struct LearningFlags {
  double r = 0, alpha = 0, beta = 0;
  CLI::Option *o_r = nullptr, *o_alpha = nullptr, *o_beta = nullptr;

  void attach(CLI::App* app) {
    o_r = app->add_option("--r", r, "inverse memory (per-round learning rate)");
    o_alpha = app->add_option("--alpha", alpha, "unplayed-attraction discount");
    o_beta = app->add_option("--beta", beta, "intensity of choice");
  }
  void apply(agora::LearningParams& lp) const {
    if (o_r->count()) lp.r = r;
    if (o_alpha->count()) lp.alpha = alpha;
    if (o_beta->count()) lp.beta = beta;
  }
};

agora::GameParams params_from(const json& cfg, const GameFlags& gf) {
  agora::GameParams par;
  if (cfg.contains("params")) cfg.at("params").get_to(par);
  gf.apply(par);
  return par;
}

agora::LearningParams learning_from(const json& cfg, const LearningFlags& lf) {
  agora::LearningParams lp;
  if (cfg.contains("learning")) cfg.at("learning").get_to(lp);
  lf.apply(lp);
  return lp;
}

int run_nash(const CommonFlags& common, const GameFlags& gf, const CLI::Option* o_grid,
             int grid_flag) {
  const json cfg_in = load_config(common.config_path);
  const agora::GameParams par = params_from(cfg_in, gf);
  int grid_n = cfg_in.value("grid_n", 512);
  if (o_grid->count()) grid_n = grid_flag;
  par.validate();

  const auto eqs = agora::find_equilibria(par, grid_n);
  auto curves = agora::equal_payoff_curve(0, par, grid_n);
  const std::size_t class_1_curves = curves.size();
  for (auto& c : agora::equal_payoff_curve(1, par, grid_n)) curves.push_back(std::move(c));

  common.prepare();
  const json cfg = {{"params", par}, {"grid_n", grid_n}};
  agora::write_equilibria_csv(common.out_dir + "/equilibria.csv", eqs,
                              {"config " + cfg.dump()});
  agora::write_curves_csv(
      common.out_dir + "/indifference_curves.csv", curves,
      {"config " + cfg.dump(),
       "curves 0.." + agora::fmt(class_1_curves) + " exclusive belong to class 1"});
  write_manifest(common.out_dir, "nash", cfg, common.seed,
                 {"equilibria.csv", "indifference_curves.csv"});
  for (const auto& e : eqs)
    std::cout << agora::to_string(e.kind) << " pbar=(" << agora::fmt(e.aggregates.pbar_1)
              << ", " << agora::fmt(e.aggregates.pbar_2) << ")\n";
  return 0;
}

int run_phase_diagram(const CommonFlags& common, const GameFlags& gf, const json& dims) {
  const json cfg_in = load_config(common.config_path);
  agora::GameParams par = params_from(cfg_in, gf);
  const int n_theta = dims.value("n_theta", cfg_in.value("n_theta", 64));
  const int n_pb = dims.value("n_pb", cfg_in.value("n_pb", 64));
  const int grid_n = dims.value("grid_n", cfg_in.value("grid_n", 96));
  const int jobs = dims.value("jobs", 1);
  par.validate();

  const agora::PhaseDiagram pd = agora::phase_diagram(par, n_theta, n_pb, grid_n, jobs);
  common.prepare();
  const json cfg = {
      {"params", par}, {"n_theta", n_theta}, {"n_pb", n_pb}, {"grid_n", grid_n}};
  agora::write_phase_csv(common.out_dir + "/phase_grid.csv",
                         common.out_dir + "/phase_boundary.csv", pd, {"config " + cfg.dump()});
  write_manifest(common.out_dir, "phase-diagram", cfg, common.seed,
                 {"phase_grid.csv", "phase_boundary.csv"});
  std::cout << "phase map " << n_theta << "x" << n_pb << " written\n";
  return 0;
}

int run_steady_state(const CommonFlags& common, const GameFlags& gf, const LearningFlags& lf) {
  const json cfg_in = load_config(common.config_path);
  const agora::GameParams par = params_from(cfg_in, gf);
  const agora::LearningParams lp = learning_from(cfg_in, lf);
  par.validate();
  lp.validate();

  const auto sol = agora::solve_steady_state(par, lp);
  const auto curve = agora::tilde_p_curve(par, lp);
  common.prepare();
  const json cfg = {{"params", par}, {"learning", lp}};
  json out = sol;
  out["config"] = cfg;
  agora::write_json_file(common.out_dir + "/steady_state.json", out);
  agora::write_tilde_curve_csv(common.out_dir + "/tilde_curve.csv", curve,
                               {"config " + cfg.dump()});
  write_manifest(common.out_dir, "steady-state", cfg, common.seed,
                 {"steady_state.json", "tilde_curve.csv"});
  std::cout << agora::to_string(sol.kind) << " pbar1=" << agora::fmt(sol.aggregates.pbar_1)
            << " peaks=" << sol.peaks.size() << "\n";
  return 0;
}

int run_critical_alphas(const CommonFlags& common, const GameFlags& gf,
                        std::vector<double> betas, int jobs) {
  const json cfg_in = load_config(common.config_path);
  const agora::GameParams par = params_from(cfg_in, gf);
  if (betas.empty() && cfg_in.contains("betas"))
    betas = cfg_in.at("betas").get<std::vector<double>>();
  if (betas.empty()) betas.push_back(1.0 / 0.11);
  par.validate();
  if (jobs < 1) throw agora::ConfigError("critical-alphas: jobs must be positive");

  std::vector<std::pair<double, agora::CriticalAlphas>> rows(betas.size());
  std::vector<std::exception_ptr> errors(betas.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < betas.size(); i = next.fetch_add(1)) {
      try {
        rows[i] = {betas[i], agora::critical_alphas(betas[i], par)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(jobs, static_cast<int>(betas.size())); ++t)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  common.prepare();
  const json cfg = {{"params", par}, {"betas", betas}};
  agora::write_thresholds_csv(common.out_dir + "/thresholds.csv", rows,
                              {"config " + cfg.dump()});
  write_manifest(common.out_dir, "critical-alphas", cfg, common.seed, {"thresholds.csv"});
  for (const auto& [beta, ca] : rows)
    std::cout << "beta_inv=" << agora::fmt(1.0 / beta) << " alpha_c=" << agora::fmt(ca.alpha_c)
              << " alpha_c_prime=" << agora::fmt(ca.alpha_c_prime)
              << " alpha_c_dprime=" << agora::fmt(ca.alpha_c_dprime) << "\n";
  return 0;
}

struct SimulateFlags {
  int n_agents = 0, stride = 0, bins = 0;
  long rounds = 0;
  std::vector<double> snapshots;
  double init1_a1 = 0, init1_a2 = 0, init2_a1 = 0, init2_a2 = 0;
  bool moment_check = false;
  long samples = 1000000;
  CLI::Option *o_n = nullptr, *o_rounds = nullptr, *o_stride = nullptr, *o_bins = nullptr,
              *o_snap = nullptr, *o_i1a = nullptr, *o_i1b = nullptr, *o_i2a = nullptr,
              *o_i2b = nullptr;

  void attach(CLI::App* app) {
    o_n = app->add_option("--n-agents", n_agents, "population size (even)");
    o_rounds = app->add_option("--rounds", rounds, "number of trading rounds");
    o_stride = app->add_option("--stride", stride, "record every k-th round");
    o_bins = app->add_option("--bins", bins, "histogram bins");
    o_snap = app->add_option("--snapshot", snapshots,
                             "rescaled time t = r*round of a histogram snapshot (repeatable)");
    o_i1a = app->add_option("--init1-a1", init1_a1, "class-1 initial attraction, market 1");
    o_i1b = app->add_option("--init1-a2", init1_a2, "class-1 initial attraction, market 2");
    o_i2a = app->add_option("--init2-a1", init2_a1, "class-2 initial attraction, market 1");
    o_i2b = app->add_option("--init2-a2", init2_a2, "class-2 initial attraction, market 2");
    app->add_flag("--moment-check", moment_check,
                  "compare one-round Monte-Carlo jump moments against drift/diffusion");
    app->add_option("--samples", samples, "Monte-Carlo samples for --moment-check");
  }
};

int run_simulate(const CommonFlags& common, const GameFlags& gf, const LearningFlags& lf,
                 const SimulateFlags& sf) {
  const json cfg_in = load_config(common.config_path);
  agora::SimConfig cfg;
  if (!cfg_in.empty()) cfg_in.get_to(cfg);
  gf.apply(cfg.params);
  lf.apply(cfg.learning);
  if (sf.o_n->count()) cfg.n_agents = sf.n_agents;
  if (sf.o_rounds->count()) cfg.n_rounds = sf.rounds;
  if (sf.o_stride->count()) cfg.trace_stride = sf.stride;
  if (sf.o_snap->count()) cfg.snapshot_times = sf.snapshots;
  if (sf.o_i1a->count()) cfg.init_1.a_1 = sf.init1_a1;
  if (sf.o_i1b->count()) cfg.init_1.a_2 = sf.init1_a2;
  if (sf.o_i2a->count()) cfg.init_2.a_1 = sf.init2_a1;
  if (sf.o_i2b->count()) cfg.init_2.a_2 = sf.init2_a2;
  if (common.o_seed->count()) cfg.seed = common.seed;
  cfg.validate();
  common.prepare();

  if (sf.moment_check) {
    if (sf.samples < 1000)
      throw agora::ConfigError("simulate --moment-check: need at least 1000 samples");
    const auto self = agora::homogeneous_self_consistent(cfg.params, cfg.learning).primary();
    const auto idx = self.fixed_points_1.stable_indices();
    if (idx.empty()) throw agora::NumericalError("moment check: no stable fixed point");
    int central = idx[0];
    for (const int i : idx)
      if (self.fixed_points_1.points[i].central) central = i;
    const auto& fp = self.fixed_points_1.points[central];
    const auto mc = agora::moment_check(fp.state, self.aggregates, cfg.params, cfg.learning,
                                        sf.samples, cfg.seed);
    const json out = {{"aggregates", self.aggregates},
                      {"state", fp.state},
                      {"samples", sf.samples},
                      {"seed", cfg.seed},
                      {"analytic_mu", {mc.analytic_mu.x, mc.analytic_mu.y}},
                      {"mc_mu", {mc.mc_mu.x, mc.mc_mu.y}},
                      {"analytic_sigma",
                       {mc.analytic_sigma.xx, mc.analytic_sigma.xy, mc.analytic_sigma.yy}},
                      {"mc_sigma", {mc.mc_sigma.xx, mc.mc_sigma.xy, mc.mc_sigma.yy}},
                      {"mu_z", {mc.mu_z.x, mc.mu_z.y}},
                      {"sigma_z_max", mc.sigma_z_max}};
    agora::write_json_file(common.out_dir + "/moment_check.json", out);
    write_manifest(common.out_dir, "simulate",
                   json{{"sim", cfg}, {"moment_check", true}, {"samples", sf.samples}},
                   cfg.seed, {"moment_check.json"});
    std::cout << "mu_z=(" << agora::fmt(mc.mu_z.x) << ", " << agora::fmt(mc.mu_z.y)
              << ") sigma_z_max=" << agora::fmt(mc.sigma_z_max) << "\n";
    return 0;
  }

  const agora::SimTrace trace = agora::simulate(cfg);
  const int bins = sf.o_bins->count() ? sf.bins : 100;
  agora::write_trace_csv(common.out_dir + "/trace.csv", trace, cfg);
  agora::write_histogram_csv(common.out_dir + "/histograms.csv", trace, cfg, bins);
  write_manifest(common.out_dir, "simulate", json(cfg), cfg.seed,
                 {"trace.csv", "histograms.csv"});
  std::cout << "simulated " << cfg.n_agents << " agents for " << cfg.n_rounds << " rounds, "
            << trace.snapshots.size() << " snapshots\n";
  return 0;
}

int run_action_path(const CommonFlags& common, const GameFlags& gf, const LearningFlags& lf,
                    const json& path_opts) {
  const json cfg_in = load_config(common.config_path);
  const agora::GameParams par = params_from(cfg_in, gf);
  const agora::LearningParams lp = learning_from(cfg_in, lf);
  const double x = path_opts.value("x", cfg_in.value("x", agora::kNan));
  const double from_delta = path_opts.value("from_delta", cfg_in.value("from_delta", agora::kNan));
  const double to_delta = path_opts.value("to_delta", cfg_in.value("to_delta", agora::kNan));
  const int n_steps = path_opts.value("n_steps", cfg_in.value("n_steps", 20));
  const double t_span = path_opts.value("t_span", cfg_in.value("t_span", 10.0));
  par.validate();
  lp.validate();
  if (std::isnan(x) || std::isnan(from_delta) || std::isnan(to_delta))
    throw agora::ConfigError("action-path: --x, --from-delta and --to-delta are required");

  const auto set = agora::fixed_points({x, 1.0 - x}, par, lp);
  const agora::FixedPoint* from = nullptr;
  const agora::FixedPoint* saddle = nullptr;
  for (const auto& p : set.points) {
    if (p.stable && (!from || std::abs(p.delta - from_delta) < std::abs(from->delta - from_delta)))
      from = &p;
    if (!p.stable && (!saddle || std::abs(p.delta - to_delta) < std::abs(saddle->delta - to_delta)))
      saddle = &p;
  }
  if (!from) throw agora::NumericalError("action-path: no stable fixed point at x");
  if (!saddle) throw agora::NumericalError("action-path: no saddle at x");

  const auto spec =
      agora::minimize_action(*from, *saddle, {x, 1.0 - x}, par, lp, n_steps, t_span);
  common.prepare();
  const json cfg = {{"params", par},   {"learning", lp},     {"x", x},
                    {"from_delta", from_delta}, {"to_delta", to_delta}, {"n_steps", n_steps},
                    {"t_span", t_span}};
  agora::write_path_csv(common.out_dir + "/path.csv", spec.path,
                        {"config " + cfg.dump(),
                         "converged " + std::string(spec.converged ? "1" : "0"),
                         "sigma_floored " + std::string(spec.sigma_floored ? "1" : "0")});
  write_manifest(common.out_dir, "action-path", cfg, common.seed, {"path.csv"});
  std::cout << "min_action=" << agora::fmt(spec.min_action)
            << " converged=" << (spec.converged ? 1 : 0) << "\n";
  return 0;
}

int run_fixed_points(const CommonFlags& common, const GameFlags& gf, const LearningFlags& lf,
                     const CLI::Option* o_x, double x_flag) {
  const json cfg_in = load_config(common.config_path);
  const agora::GameParams par = params_from(cfg_in, gf);
  const agora::LearningParams lp = learning_from(cfg_in, lf);
  double x = cfg_in.value("x", agora::kNan);
  if (o_x->count()) x = x_flag;
  par.validate();
  lp.validate();
  if (std::isnan(x)) throw agora::ConfigError("fixed-points: --x is required");
  if (!(x > 0.0 && x < 1.0))
    throw agora::ConfigError("fixed-points: x must lie strictly inside (0, 1)");

  const auto set = agora::fixed_points({x, 1.0 - x}, par, lp);
  common.prepare();
  const json cfg = {{"params", par}, {"learning", lp}, {"x", x}};
  agora::write_fixed_points_csv(common.out_dir + "/fixed_points.csv", set,
                                {"config " + cfg.dump()});
  json out = set;
  out = json{{"config", cfg}, {"points", out}};
  agora::write_json_file(common.out_dir + "/fixed_points.json", out);
  write_manifest(common.out_dir, "fixed-points", cfg, common.seed,
                 {"fixed_points.csv", "fixed_points.json"});
  std::cout << set.points.size() << " fixed points, " << set.stable_count() << " stable\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for a two-market double-auction choice game"};
  app.require_subcommand(1);

  // nash
  auto* nash = app.add_subcommand("nash", "equal-payoff equilibria and indifference curves");
  CommonFlags nash_common;
  GameFlags nash_game;
  int nash_grid = 512;
  nash_common.attach(nash);
  nash_game.attach(nash);
  CLI::Option* nash_o_grid = nash->add_option("--grid-n", nash_grid, "marching-squares grid");

  // phase-diagram
  auto* phase = app.add_subcommand("phase-diagram", "equilibrium-structure map over (theta1, pb)");
  CommonFlags phase_common;
  GameFlags phase_game;
  int ph_n_theta = 64, ph_n_pb = 64, ph_grid = 96, ph_jobs = 1;
  phase_common.attach(phase);
  phase_game.attach(phase);
  CLI::Option* o_nt = phase->add_option("--n-theta", ph_n_theta, "theta axis resolution");
  CLI::Option* o_np = phase->add_option("--n-pb", ph_n_pb, "pb axis resolution");
  CLI::Option* o_pg = phase->add_option("--grid-n", ph_grid, "per-cell search grid");
  phase->add_option("--jobs", ph_jobs, "parallel workers");

  // steady-state
  auto* steady = app.add_subcommand("steady-state", "weak-noise steady state of the learning flow");
  CommonFlags steady_common;
  GameFlags steady_game;
  LearningFlags steady_learn;
  steady_common.attach(steady);
  steady_game.attach(steady);
  steady_learn.attach(steady);

  // critical-alphas
  auto* crit = app.add_subcommand("critical-alphas", "alpha thresholds per beta");
  CommonFlags crit_common;
  GameFlags crit_game;
  std::vector<double> crit_betas;
  int crit_jobs = 1;
  crit_common.attach(crit);
  crit_game.attach(crit);
  crit->add_option("--beta", crit_betas, "intensity of choice (repeatable)");
  crit->add_option("--jobs", crit_jobs, "parallel workers");

  // simulate
  auto* sim = app.add_subcommand("simulate", "multi-agent learning simulation");
  CommonFlags sim_common;
  GameFlags sim_game;
  LearningFlags sim_learn;
  SimulateFlags sim_flags;
  sim_common.attach(sim);
  sim_game.attach(sim);
  sim_learn.attach(sim);
  sim_flags.attach(sim);

  // action-path
  auto* act = app.add_subcommand("action-path", "minimal activation path between fixed points");
  CommonFlags act_common;
  GameFlags act_game;
  LearningFlags act_learn;
  double act_x = agora::kNan, act_from = agora::kNan, act_to = agora::kNan, act_span = 10.0;
  int act_steps = 20;
  act_common.attach(act);
  act_game.attach(act);
  act_learn.attach(act);
  CLI::Option* o_ax = act->add_option("--x", act_x, "class-1 aggregate");
  CLI::Option* o_af = act->add_option("--from-delta", act_from, "stable peak to start from");
  CLI::Option* o_at = act->add_option("--to-delta", act_to, "saddle to reach");
  CLI::Option* o_as = act->add_option("--n-steps", act_steps, "path segments");
  CLI::Option* o_asp = act->add_option("--t-span", act_span, "path duration");

  // fixed-points
  auto* fps = app.add_subcommand("fixed-points", "single-agent fixed points at one aggregate");
  CommonFlags fps_common;
  GameFlags fps_game;
  LearningFlags fps_learn;
  double fps_x = agora::kNan;
  fps_common.attach(fps);
  fps_game.attach(fps);
  fps_learn.attach(fps);
  CLI::Option* o_fx = fps->add_option("--x", fps_x, "class-1 aggregate");

  int rc = 0;
  try {
    app.parse(argc, argv);
    if (nash->parsed()) rc = run_nash(nash_common, nash_game, nash_o_grid, nash_grid);
    if (phase->parsed()) {
      json dims = json::object();
      if (o_nt->count()) dims["n_theta"] = ph_n_theta;
      if (o_np->count()) dims["n_pb"] = ph_n_pb;
      if (o_pg->count()) dims["grid_n"] = ph_grid;
      dims["jobs"] = ph_jobs;
      rc = run_phase_diagram(phase_common, phase_game, dims);
    }
    if (steady->parsed()) rc = run_steady_state(steady_common, steady_game, steady_learn);
    if (crit->parsed()) rc = run_critical_alphas(crit_common, crit_game, crit_betas, crit_jobs);
    if (sim->parsed()) rc = run_simulate(sim_common, sim_game, sim_learn, sim_flags);
    if (act->parsed()) {
      json popts = json::object();
      if (o_ax->count()) popts["x"] = act_x;
      if (o_af->count()) popts["from_delta"] = act_from;
      if (o_at->count()) popts["to_delta"] = act_to;
      if (o_as->count()) popts["n_steps"] = act_steps;
      if (o_asp->count()) popts["t_span"] = act_span;
      rc = run_action_path(act_common, act_game, act_learn, popts);
    }
    if (fps->parsed()) rc = run_fixed_points(fps_common, fps_game, fps_learn, o_fx, fps_x);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const agora::ConfigError& e) {
    std::cerr << json{{"error", "config"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const agora::NumericalError& e) {
    std::cerr << json{{"error", "numerical"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 3;
  }
  return rc;
}
