#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "agora/common.hpp"
#include "agora/fokker_planck.hpp"
#include "agora/large_deviation.hpp"
#include "agora/market.hpp"
#include "agora/nash.hpp"
#include "agora/simulate.hpp"
#include "agora/stats.hpp"

namespace agora {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest representation that parses back to the same bits, so identical
// runs produce byte-identical files.
inline std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }
inline std::string fmt(const char* v) { return v; }
inline std::string fmt(const std::string& v) { return v; }

// CSV with '#'-prefixed metadata lines, a header row, then data rows.
struct Csv {
  std::vector<std::string> comments;
  std::string header;
  std::vector<std::string> rows;

  void comment(const std::string& line) { comments.push_back(line); }

  template <typename... Args>
  void columns(const Args&... names) {
    header = join(fmt(names)...);
  }
  template <typename... Args>
  void row(const Args&... vals) {
    rows.push_back(join(fmt(vals)...));
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path);
    for (const auto& c : comments) out << "# " << c << "\n";
    out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
    if (!out) throw ConfigError("write failed: " + path);
  }

 private:
  template <typename... Rest>
  static std::string join(const std::string& first, const Rest&... rest) {
    std::string s = first;
    ((s += ',', s += rest), ...);
    return s;
  }
};

// --- JSON bindings (snake_case keys mirror the field names) ---

inline void to_json(nlohmann::json& j, const GameParams& p) {
  j = {{"theta_1", p.theta_1}, {"theta_2", p.theta_2}, {"mu_b", p.mu_b},
       {"mu_a", p.mu_a},       {"sigma_b", p.sigma_b}, {"sigma_a", p.sigma_a},
       {"pb_1", p.pb_1},       {"pb_2", p.pb_2}};
}
inline void from_json(const nlohmann::json& j, GameParams& p) {
  p.theta_1 = j.value("theta_1", p.theta_1);
  p.theta_2 = j.value("theta_2", p.theta_2);
  p.mu_b = j.value("mu_b", p.mu_b);
  p.mu_a = j.value("mu_a", p.mu_a);
  p.sigma_b = j.value("sigma_b", p.sigma_b);
  p.sigma_a = j.value("sigma_a", p.sigma_a);
  p.pb_1 = j.value("pb_1", p.pb_1);
  p.pb_2 = j.value("pb_2", p.pb_2);
}

inline void to_json(nlohmann::json& j, const LearningParams& p) {
  j = {{"r", p.r}, {"alpha", p.alpha}, {"beta", p.beta}};
}
inline void from_json(const nlohmann::json& j, LearningParams& p) {
  p.r = j.value("r", p.r);
  p.alpha = j.value("alpha", p.alpha);
  p.beta = j.value("beta", p.beta);
}

inline void to_json(nlohmann::json& j, const AttractionState& a) {
  j = {{"a_1", a.a_1}, {"a_2", a.a_2}};
}
inline void from_json(const nlohmann::json& j, AttractionState& a) {
  a.a_1 = j.value("a_1", a.a_1);
  a.a_2 = j.value("a_2", a.a_2);
}

inline void to_json(nlohmann::json& j, const Aggregates& a) {
  j = {{"pbar_1", a.pbar_1}, {"pbar_2", a.pbar_2}};
}
inline void from_json(const nlohmann::json& j, Aggregates& a) {
  a.pbar_1 = j.value("pbar_1", a.pbar_1);
  a.pbar_2 = j.value("pbar_2", a.pbar_2);
}

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"n_agents", c.n_agents},
       {"params", c.params},
       {"learning", c.learning},
       {"n_rounds", c.n_rounds},
       {"seed", c.seed},
       {"snapshot_times", c.snapshot_times},
       {"trace_stride", c.trace_stride},
       {"init_1", c.init_1},
       {"init_2", c.init_2}};
}
inline void from_json(const nlohmann::json& j, SimConfig& c) {
  c.n_agents = j.value("n_agents", c.n_agents);
  if (j.contains("params")) j.at("params").get_to(c.params);
  if (j.contains("learning")) j.at("learning").get_to(c.learning);
  c.n_rounds = j.value("n_rounds", c.n_rounds);
  c.seed = j.value("seed", c.seed);
  if (j.contains("snapshot_times"))
    c.snapshot_times = j.at("snapshot_times").get<std::vector<double>>();
  c.trace_stride = j.value("trace_stride", c.trace_stride);
  if (j.contains("init_1")) j.at("init_1").get_to(c.init_1);
  if (j.contains("init_2")) j.at("init_2").get_to(c.init_2);
}

inline void to_json(nlohmann::json& j, const FixedPoint& p) {
  j = {{"delta", p.delta},
       {"a_1", p.state.a_1},
       {"a_2", p.state.a_2},
       {"stable", p.stable},
       {"central", p.central},
       {"cov", {p.peak_covariance.xx, p.peak_covariance.xy, p.peak_covariance.yy}}};
}

inline void to_json(nlohmann::json& j, const FixedPointSet& s) {
  j = nlohmann::json::array();
  for (const auto& p : s.points) j.push_back(p);
}

inline void to_json(nlohmann::json& j, const SteadyStateSolution& s) {
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& pk : s.peaks)
    peaks.push_back({{"delta", pk.point.delta},
                     {"a_1", pk.point.state.a_1},
                     {"a_2", pk.point.state.a_2},
                     {"weight", pk.weight}});
  j = {{"aggregates", s.aggregates},
       {"peaks", peaks},
       {"kind", to_string(s.kind)},
       {"optimizer_converged", s.optimizer_converged},
       {"sigma_floored", s.sigma_floored}};
  if (s.kind == SteadyStateKind::three_peak) {
    j["weight_family_lo"] = s.weight_family_lo;
    j["weight_family_hi"] = s.weight_family_hi;
  }
}

// --- Run manifests ---

struct RunManifest {
  std::string subcommand;
  nlohmann::json config;  // every default materialized
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::vector<std::string> outputs;
};

inline void to_json(nlohmann::json& j, const RunManifest& m) {
  j = {{"subcommand", m.subcommand},
       {"config", m.config},
       {"seed", m.seed},
       {"version", m.version},
       {"outputs", m.outputs}};
}
inline void from_json(const nlohmann::json& j, RunManifest& m) {
  j.at("subcommand").get_to(m.subcommand);
  m.config = j.value("config", nlohmann::json::object());
  m.seed = j.value("seed", std::uint64_t{0});
  m.version = j.value("version", std::string{});
  if (j.contains("outputs")) m.outputs = j.at("outputs").get<std::vector<std::string>>();
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw ConfigError("write failed: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

// A manifest file is accepted anywhere a config is: the wrapper is peeled.
inline nlohmann::json unwrap_config(const nlohmann::json& j) {
  if (j.is_object() && j.contains("subcommand") && j.contains("config")) return j.at("config");
  return j;
}

// --- Canned writers shared by the CLI and the demos ---

inline void write_equilibria_csv(const std::string& path,
                                 const std::vector<EquilibriumPoint>& eq,
                                 const std::vector<std::string>& comments = {}) {
  Csv csv;
  for (const auto& c : comments) csv.comment(c);
  csv.columns("pbar1", "pbar2", "kind", "gap1", "gap2");
  for (const auto& e : eq)
    csv.row(e.aggregates.pbar_1, e.aggregates.pbar_2, to_string(e.kind), e.payoff_gap_1,
            e.payoff_gap_2);
  csv.write(path);
}

inline void write_curves_csv(const std::string& path, const std::vector<CurvePolyline>& curves,
                             const std::vector<std::string>& comments = {}) {
  Csv csv;
  for (const auto& c : comments) csv.comment(c);
  csv.columns("curve", "closed", "pbar1", "pbar2");
  for (std::size_t k = 0; k < curves.size(); ++k)
    for (const auto& pt : curves[k].points) csv.row(k, curves[k].closed, pt.x, pt.y);
  csv.write(path);
}

inline void write_phase_csv(const std::string& grid_path, const std::string& boundary_path,
                            const PhaseDiagram& pd,
                            const std::vector<std::string>& comments = {}) {
  Csv grid;
  for (const auto& c : comments) grid.comment(c);
  grid.columns("theta1", "pb", "pot_heterogeneous", "pure_split", "partial_count");
  for (std::size_t it = 0; it < pd.theta_values.size(); ++it)
    for (std::size_t ip = 0; ip < pd.pb_values.size(); ++ip) {
      const auto& cell = pd.cell(static_cast<int>(it), static_cast<int>(ip));
      grid.row(pd.theta_values[it], pd.pb_values[ip], cell.has_pot_heterogeneous,
               cell.has_pure_split, cell.partially_het_count);
    }
  grid.write(grid_path);

  Csv bnd;
  for (const auto& c : comments) bnd.comment(c);
  bnd.comment("pure-split saturation boundary, quadratic roots per theta1");
  bnd.columns("theta1", "pb_root");
  for (std::size_t it = 0; it < pd.theta_values.size(); ++it)
    for (const double r : pd.boundary_roots[it]) bnd.row(pd.theta_values[it], r);
  bnd.write(boundary_path);
}

inline void write_fixed_points_csv(const std::string& path, const FixedPointSet& set,
                                   const std::vector<std::string>& comments = {}) {
  Csv csv;
  for (const auto& c : comments) csv.comment(c);
  csv.columns("delta", "A1", "A2", "stable", "central", "cov11", "cov12", "cov22");
  for (const auto& p : set.points)
    csv.row(p.delta, p.state.a_1, p.state.a_2, p.stable, p.central, p.peak_covariance.xx,
            p.peak_covariance.xy, p.peak_covariance.yy);
  csv.write(path);
}

inline void write_path_csv(const std::string& path, const DiscretePath& dp,
                           const std::vector<std::string>& comments = {}) {
  Csv csv;
  for (const auto& c : comments) csv.comment(c);
  csv.comment("action " + fmt(dp.action));
  csv.columns("t", "A1", "A2");
  for (std::size_t k = 0; k < dp.states.size(); ++k)
    csv.row(dp.times[k], dp.states[k].a_1, dp.states[k].a_2);
  csv.write(path);
}

inline void write_thresholds_csv(
    const std::string& path,
    const std::vector<std::pair<double, CriticalAlphas>>& rows,
    const std::vector<std::string>& comments = {}) {
  Csv csv;
  for (const auto& c : comments) csv.comment(c);
  csv.columns("beta_inv", "alpha_c", "alpha_c_prime", "alpha_c_dprime");
  for (const auto& [beta, ca] : rows)
    csv.row(1.0 / beta, ca.alpha_c, ca.alpha_c_prime, ca.alpha_c_dprime);
  csv.write(path);
}

inline void write_tilde_curve_csv(const std::string& path, const TildeCurve& curve,
                                  const std::vector<std::string>& comments = {}) {
  Csv csv;
  for (const auto& c : comments) csv.comment(c);
  for (const double s : curve.switch_points) csv.comment("dominance switch at x = " + fmt(s));
  csv.columns("x", "p_tilde", "n_stable", "dominant_delta");
  for (const auto& pt : curve.points) csv.row(pt.x, pt.p_tilde, pt.n_stable, pt.dominant_delta);
  csv.write(path);
}

inline void write_trace_csv(const std::string& path, const SimTrace& trace,
                            const SimConfig& cfg) {
  Csv csv;
  csv.comment("config " + nlohmann::json(cfg).dump());
  csv.comment("seed " + fmt(static_cast<std::size_t>(cfg.seed)));
  csv.columns("t", "pbar1", "pbar2", "pi1", "pi2", "matched1", "matched2");
  for (const auto& r : trace.rows)
    csv.row(r.t, r.pbar_1, r.pbar_2, r.pi_1, r.pi_2, r.matched_1, r.matched_2);
  csv.write(path);
}

inline void write_histogram_csv(const std::string& path, const SimTrace& trace,
                                const SimConfig& cfg, int n_bins = 100) {
  Csv csv;
  csv.comment("config " + nlohmann::json(cfg).dump());
  csv.comment("seed " + fmt(static_cast<std::size_t>(cfg.seed)));
  csv.comment("attraction-difference histograms per snapshot and class");
  csv.columns("bin_left", "bin_right", "count", "class", "t");
  for (const auto& snap : trace.snapshots) {
    for (int cls = 0; cls < 2; ++cls) {
      const auto& samples = cls == 0 ? snap.deltas_1 : snap.deltas_2;
      const Histogram h = make_histogram(samples, n_bins);
      for (std::size_t b = 0; b + 1 < h.edges.size(); ++b)
        csv.row(h.edges[b], h.edges[b + 1], h.counts[b], cls + 1, snap.t);
    }
  }
  csv.write(path);
}

}  // namespace agora
