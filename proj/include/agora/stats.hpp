#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "agora/common.hpp"

namespace agora {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// Linear-interpolation quantile on a sorted copy, q in [0, 1].
inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile_of: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[lo + 1];
}

inline double median_of(std::vector<double> v) { return quantile_of(std::move(v), 0.5); }

struct Histogram {
  std::vector<double> edges;   // n_bins + 1
  std::vector<double> counts;  // n_bins; out-of-range samples clamp to end bins
  std::vector<double> density;  // counts normalized to unit integral
};

inline Histogram make_histogram(const std::vector<double>& samples, int n_bins, double lo,
                                double hi) {
  if (n_bins < 2) throw ConfigError("make_histogram: need at least 2 bins");
  if (!(hi > lo)) throw ConfigError("make_histogram: empty range");
  Histogram h;
  h.edges.resize(n_bins + 1);
  for (int i = 0; i <= n_bins; ++i)
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / n_bins;
  h.counts.assign(n_bins, 0.0);
  for (const double x : samples) {
    int k = static_cast<int>(std::floor((x - lo) / (hi - lo) * n_bins));
    k = std::clamp(k, 0, n_bins - 1);
    h.counts[k] += 1.0;
  }
  const double w = (hi - lo) / n_bins;
  const double total = static_cast<double>(samples.size());
  h.density.resize(n_bins);
  for (int i = 0; i < n_bins; ++i)
    h.density[i] = total > 0.0 ? h.counts[i] / (total * w) : 0.0;
  return h;
}

// Auto-ranged variant: sample span padded by 5% on each side.
inline Histogram make_histogram(const std::vector<double>& samples, int n_bins = 100) {
  if (samples.empty()) throw ConfigError("make_histogram: empty sample");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  double lo = *mn, hi = *mx;
  const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(0.5, std::abs(lo) * 0.05);
  return make_histogram(samples, n_bins, lo - pad, hi + pad);
}

struct GaussianMixture {
  double w_1 = 0.5, mu_1 = 0.0, sigma_1 = 1.0;
  double w_2 = 0.5, mu_2 = 0.0, sigma_2 = 1.0;
  // Ashman separation statistic: |mu_1-mu_2| / sqrt((s1^2+s2^2)/2).
  double separation() const {
    return std::abs(mu_1 - mu_2) / std::sqrt(0.5 * (sigma_1 * sigma_1 + sigma_2 * sigma_2));
  }
};

// Two-component Gaussian EM with deterministic quantile initialization.
// Fixed iteration count and collapse floors keep the fit reproducible.
inline GaussianMixture fit_two_gaussians(const std::vector<double>& samples, int iters = 300) {
  if (samples.size() < 8) throw ConfigError("fit_two_gaussians: sample too small");
  GaussianMixture m;
  m.mu_1 = quantile_of(samples, 0.25);
  m.mu_2 = quantile_of(samples, 0.75);
  const double sd = std::sqrt(std::max(variance_of(samples), 1e-12));
  m.sigma_1 = m.sigma_2 = std::max(0.5 * sd, 1e-6);

  const std::size_t n = samples.size();
  std::vector<double> resp(n);
  for (int it = 0; it < iters; ++it) {
    // E step in log space; underflow-safe responsibilities.
    for (std::size_t i = 0; i < n; ++i) {
      const double z1 = (samples[i] - m.mu_1) / m.sigma_1;
      const double z2 = (samples[i] - m.mu_2) / m.sigma_2;
      const double l1 = std::log(m.w_1) - 0.5 * z1 * z1 - std::log(m.sigma_1);
      const double l2 = std::log(m.w_2) - 0.5 * z2 * z2 - std::log(m.sigma_2);
      const double mx = std::max(l1, l2);
      const double e1 = std::exp(l1 - mx), e2 = std::exp(l2 - mx);
      resp[i] = e1 / (e1 + e2);
    }
    // M step.
    double n1 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n1 += resp[i];
      s1 += resp[i] * samples[i];
      s2 += (1.0 - resp[i]) * samples[i];
    }
    const double n2 = static_cast<double>(n) - n1;
    m.w_1 = std::max(n1 / static_cast<double>(n), 1e-9);
    m.w_2 = std::max(n2 / static_cast<double>(n), 1e-9);
    m.mu_1 = s1 / std::max(n1, 1e-9);
    m.mu_2 = s2 / std::max(n2, 1e-9);
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v1 += resp[i] * (samples[i] - m.mu_1) * (samples[i] - m.mu_1);
      v2 += (1.0 - resp[i]) * (samples[i] - m.mu_2) * (samples[i] - m.mu_2);
    }
    m.sigma_1 = std::sqrt(std::max(v1 / std::max(n1, 1e-9), 1e-12));
    m.sigma_2 = std::sqrt(std::max(v2 / std::max(n2, 1e-9), 1e-12));
  }
  if (m.mu_1 > m.mu_2) {
    std::swap(m.mu_1, m.mu_2);
    std::swap(m.sigma_1, m.sigma_2);
    std::swap(m.w_1, m.w_2);
  }
  return m;
}

// Pre-registered bimodality verdict: well-separated components (separation
// statistic above 2) that both carry at least 5% of the mass.
inline bool is_bimodal(const std::vector<double>& samples) {
  const GaussianMixture m = fit_two_gaussians(samples);
  return m.separation() > 2.0 && std::min(m.w_1, m.w_2) >= 0.05;
}

}  // namespace agora
