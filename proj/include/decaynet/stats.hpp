#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"

namespace decaynet {

/// Sorted sample with step-function CDF queries.
class EmpiricalSample {
 public:
  EmpiricalSample() = default;
  explicit EmpiricalSample(std::vector<double> values, std::string label = {})
      : values_(std::move(values)), label_(std::move(label)) {
    for (double v : values_)
      if (std::isnan(v)) throw InputError("sample '" + label_ + "' contains NaN");
    std::sort(values_.begin(), values_.end());
  }

  const std::vector<double>& values() const noexcept { return values_; }
  const std::string& label() const noexcept { return label_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  // P(X <= x)
  double cdf(double x) const {
    require_non_empty();
    const auto k = std::upper_bound(values_.begin(), values_.end(), x) - values_.begin();
    return static_cast<double>(k) / static_cast<double>(values_.size());
  }
  // P(X > x)
  double ccdf(double x) const { return 1.0 - cdf(x); }

 private:
  void require_non_empty() const {
    if (values_.empty()) throw InputError("sample '" + label_ + "' is empty");
  }
  std::vector<double> values_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Two-sample Kolmogorov-Smirnov.

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// Q_KS(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2). Returns 1 when
/// the series has not settled within 100 terms (tiny lambda).
inline double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  const double a = -2.0 * lambda * lambda;
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(a * j * j);
    sum += sign * term;
    if (term < 1e-10) return std::clamp(2.0 * sum, 0.0, 1.0);
    sign = -sign;
  }
  return 1.0;
}

inline KsResult ks_two_sample(const EmpiricalSample& a, const EmpiricalSample& b) {
  if (a.empty() || b.empty()) throw InputError("KS test needs two non-empty samples");
  const auto& x = a.values();
  const auto& y = b.values();
  const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // Step both ECDFs past each pooled value, so ties move together.
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  KsResult r;
  r.statistic = d;
  r.n1 = x.size();
  r.n2 = y.size();
  const double ne = n1 * n2 / (n1 + n2);
  const double root = std::sqrt(ne);
  r.p_value = kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
  return r;
}

// ---------------------------------------------------------------------------
// Information measures, base 2.

struct HistogramDistribution {
  std::vector<double> bin_edges;
  std::vector<double> probabilities;
};

inline double shannon_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return h;
}

// +inf when q has a zero bin where p does not.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw InputError("KL divergence needs distributions over the same bins");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log2(p[i] / q[i]);
  }
  return d;
}

inline double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw InputError("JS divergence needs distributions over the same bins");
  std::vector<double> r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r[i] = 0.5 * (p[i] + q[i]);
  return std::clamp(0.5 * (kl_divergence(p, r) + kl_divergence(q, r)), 0.0, 1.0);
}

namespace detail {
inline void require_shared_bins(const HistogramDistribution& p, const HistogramDistribution& q) {
  if (p.bin_edges != q.bin_edges) throw InputError("distributions do not share bin edges");
}
}  // namespace detail

inline double shannon_entropy(const HistogramDistribution& p) { return shannon_entropy(p.probabilities); }

inline double kl_divergence(const HistogramDistribution& p, const HistogramDistribution& q) {
  detail::require_shared_bins(p, q);
  return kl_divergence(p.probabilities, q.probabilities);
}

inline double js_divergence(const HistogramDistribution& p, const HistogramDistribution& q) {
  detail::require_shared_bins(p, q);
  return js_divergence(p.probabilities, q.probabilities);
}

inline constexpr std::size_t kDefaultHistogramBins = 20;

/// Equal-width bins over the pooled range; the last bin is closed. A pooled
/// range of zero width collapses to one bin holding everything.
inline std::pair<HistogramDistribution, HistogramDistribution> shared_histogram(const std::vector<double>& a,
                                                                                const std::vector<double>& b,
                                                                                std::size_t bins = kDefaultHistogramBins) {
  if (bins < 2) throw UsageError("histograms need at least 2 bins");
  if (a.empty() || b.empty()) throw InputError("histograms need two non-empty samples");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* s : {&a, &b})
    for (double x : *s) {
      if (!std::isfinite(x)) throw InputError("histogram samples must be finite");
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  std::vector<double> edges;
  if (hi == lo) {
    edges = {lo, hi};
    bins = 1;
  } else {
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) edges.push_back(lo + width * static_cast<double>(i));
    edges.push_back(hi);
  }
  auto fill = [&](const std::vector<double>& s) {
    HistogramDistribution h;
    h.bin_edges = edges;
    h.probabilities.assign(bins, 0.0);
    for (double x : s) {
      std::size_t k = 0;
      if (bins > 1) {
        k = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
        k = std::min(k, bins - 1);
      }
      h.probabilities[k] += 1.0;
    }
    for (auto& p : h.probabilities) p /= static_cast<double>(s.size());
    return h;
  };
  return {fill(a), fill(b)};
}

// ---------------------------------------------------------------------------
// Box-plot summaries.

struct FiveNumberSummary {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between order statistics at position p * (n - 1).
inline double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline FiveNumberSummary five_number_summary(const EmpiricalSample& s) {
  const auto& v = s.values();
  if (v.empty()) throw InputError("five-number summary of an empty sample");
  return {v.front(), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), v.back()};
}

// ---------------------------------------------------------------------------
// Cross-site comparison.

enum class SiteGroup { Decayed, Alive, Unlabeled };

struct PatternDistanceReport {
  std::string metric;
  std::size_t bins = kDefaultHistogramBins;
  std::vector<std::string> sites;  // row/column order
  std::vector<std::vector<double>> ks_statistic;
  std::vector<std::vector<double>> ks_p_value;
  std::vector<std::vector<double>> js;
  std::map<std::string, std::string> nearest_group;  // "decayed", "alive" or "undetermined"
};

/// Pairwise KS and JS matrices; each site is assigned to the group (decayed
/// or alive) whose other members sit at the smaller mean JS distance.
inline PatternDistanceReport pattern_distance_report(const std::map<std::string, std::vector<double>>& site_metrics,
                                                     const std::string& metric,
                                                     const std::map<std::string, SiteGroup>& groups = {},
                                                     std::size_t bins = kDefaultHistogramBins) {
  if (site_metrics.size() < 2) throw InputError("pattern comparison needs at least two sites");
  PatternDistanceReport r;
  r.metric = metric;
  r.bins = bins;
  std::vector<EmpiricalSample> samples;
  for (const auto& [name, values] : site_metrics) {
    if (values.empty()) throw InputError("site '" + name + "' has no " + metric + " values");
    r.sites.push_back(name);
    samples.emplace_back(values, name);
  }
  const std::size_t n = r.sites.size();
  r.ks_statistic.assign(n, std::vector<double>(n, 0.0));
  r.ks_p_value.assign(n, std::vector<double>(n, 1.0));
  r.js.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto ks = ks_two_sample(samples[i], samples[j]);
      const auto [p, q] = shared_histogram(samples[i].values(), samples[j].values(), bins);
      const double d = js_divergence(p, q);
      r.ks_statistic[i][j] = r.ks_statistic[j][i] = ks.statistic;
      r.ks_p_value[i][j] = r.ks_p_value[j][i] = ks.p_value;
      r.js[i][j] = r.js[j][i] = d;
    }
  for (std::size_t i = 0; i < n; ++i) {
    double sum[2] = {0, 0};
    std::size_t count[2] = {0, 0};
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto it = groups.find(r.sites[j]);
      if (it == groups.end() || it->second == SiteGroup::Unlabeled) continue;
      const int g = it->second == SiteGroup::Decayed ? 0 : 1;
      sum[g] += r.js[i][j];
      ++count[g];
    }
    std::string verdict = "undetermined";
    if (count[0] && count[1]) {
      const double dec = sum[0] / static_cast<double>(count[0]);
      const double alive = sum[1] / static_cast<double>(count[1]);
      if (dec < alive) verdict = "decayed";
      else if (alive < dec) verdict = "alive";
    }
    r.nearest_group[r.sites[i]] = verdict;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Plot exports.

inline void write_distribution_csv(std::ostream& os, const EmpiricalSample& s) {
  os << "x,cdf,ccdf\n";
  const auto& v = s.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    const double f = static_cast<double>(i + 1) / static_cast<double>(v.size());
    write_csv_row(os, {fmt_num(v[i]), fmt_num(f), fmt_num(1.0 - f)});
  }
}

inline void write_boxplot_csv(std::ostream& os, const std::vector<EmpiricalSample>& samples) {
  os << "label,min,q1,median,q3,max\n";
  for (const auto& s : samples) {
    const auto f = five_number_summary(s);
    write_csv_row(os, {s.label(), fmt_num(f.min), fmt_num(f.q1), fmt_num(f.median), fmt_num(f.q3), fmt_num(f.max)});
  }
}

inline void write_matrix_csv(std::ostream& os, const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& m) {
  std::vector<std::string> header{"site"};
  header.insert(header.end(), names.begin(), names.end());
  write_csv_row(os, header);
  for (std::size_t r = 0; r < names.size(); ++r) {
    std::vector<std::string> row{names[r]};
    for (double v : m[r]) row.push_back(fmt_num(v));
    write_csv_row(os, row);
  }
}

}  // namespace decaynet
