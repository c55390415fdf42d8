#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <map>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "decaynet/cascade.hpp"
#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"
#include "decaynet/graph.hpp"
#include "decaynet/parallel.hpp"

namespace decaynet {

inline std::size_t cascade_size(const CascadeTree& t) { return t.size(); }

inline double size_fraction(const CascadeTree& t, const StaticGraph& g0) {
  if (g0.node_count() == 0) throw InputError("size fraction needs a non-empty G_0");
  return static_cast<double>(t.size()) / static_cast<double>(g0.node_count());
}

/// Mean tau gap per edge, scaled by the number of snapshots. Singletons have
/// no edges and get 0.
inline double cascade_duration(const CascadeTree& t, int k) {
  if (k < 2) throw InputError("cascade duration needs k >= 2");
  if (t.edges.empty()) return 0.0;
  double gaps = 0.0;
  for (const auto& e : t.edges) gaps += t.tau_of.at(e.v) - t.tau_of.at(e.u);
  return gaps / (static_cast<double>(k) * static_cast<double>(t.edges.size()));
}

/// Mean hop distance over ordered node pairs on the undirected tree skeleton.
inline double cascade_virality(const CascadeTree& t) {
  const std::size_t n = t.size();
  if (n < 2) return 0.0;
  std::map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index.emplace(t.nodes[i], i);
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : t.edges) {
    adj[index.at(e.u)].push_back(index.at(e.v));
    adj[index.at(e.v)].push_back(index.at(e.u));
  }
  double total = 0.0;
  std::vector<std::size_t> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), SIZE_MAX);
    std::queue<std::size_t> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const auto v = q.front();
      q.pop();
      total += static_cast<double>(dist[v]);
      for (auto w : adj[v])
        if (dist[w] == SIZE_MAX) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

enum class ViralityNorm { Sigmoid, Tanh, MinMax };

inline ViralityNorm parse_virality_norm(const std::string& s) {
  if (s == "sigmoid") return ViralityNorm::Sigmoid;
  if (s == "tanh") return ViralityNorm::Tanh;
  if (s == "minmax") return ViralityNorm::MinMax;
  throw UsageError("unknown virality normalization '" + s + "' (sigmoid, tanh, minmax)");
}

inline const char* to_string(ViralityNorm n) {
  switch (n) {
    case ViralityNorm::Sigmoid: return "sigmoid";
    case ViralityNorm::Tanh: return "tanh";
    case ViralityNorm::MinMax: return "minmax";
  }
  return "sigmoid";
}

// Standardizes by the sample mean and (n-1) standard deviation, then squashes.
// A zero or undefined deviation falls back to s = 1.
inline std::vector<double> normalize_virality(const std::vector<double>& values,
                                              ViralityNorm mode = ViralityNorm::Sigmoid) {
  std::vector<double> out;
  if (values.empty()) return out;
  out.reserve(values.size());
  if (mode == ViralityNorm::MinMax) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    for (double x : values) out.push_back(*hi > *lo ? (x - *lo) / (*hi - *lo) : 0.5);
    return out;
  }
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  double s = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  if (!(s > 0.0)) s = 1.0;
  for (double x : values) {
    const double z = (x - mean) / s;
    out.push_back(mode == ViralityNorm::Tanh ? 0.5 * (1.0 + std::tanh(z)) : 1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

enum class DegreeBase {
  TreeInternal,  // max tree degree / (|V_tree| - 1)
  InitialGraph,  // max G_0 degree among tree nodes / (|V_G0| - 1)
};

inline DegreeBase parse_degree_base(const std::string& s) {
  if (s == "tree") return DegreeBase::TreeInternal;
  if (s == "g0") return DegreeBase::InitialGraph;
  throw UsageError("unknown degree base '" + s + "' (tree, g0)");
}

inline const char* to_string(DegreeBase b) { return b == DegreeBase::TreeInternal ? "tree" : "g0"; }

inline double max_degree_norm(const CascadeTree& t, const StaticGraph& g0, DegreeBase base = DegreeBase::TreeInternal) {
  if (base == DegreeBase::TreeInternal) {
    if (t.size() < 2) return 0.0;
    std::size_t best = 0;
    for (const auto& [v, nb] : t.skeleton()) best = std::max(best, nb.size());
    return static_cast<double>(best) / static_cast<double>(t.size() - 1);
  }
  if (g0.node_count() < 2) return 0.0;
  std::size_t best = 0;
  for (auto v : t.nodes) best = std::max(best, g0.degree(g0.require_index(v)));
  return static_cast<double>(best) / static_cast<double>(g0.node_count() - 1);
}

/// Jaccard-style similarity averaged over shared nodes, with neighbourhoods
/// taken on each tree's skeleton.
inline double cascade_similarity(const CascadeTree& a, const CascadeTree& b) {
  const auto na = a.skeleton();
  const auto nb = b.skeleton();
  std::vector<NodeId> shared;
  std::set_intersection(a.nodes.begin(), a.nodes.end(), b.nodes.begin(), b.nodes.end(), std::back_inserter(shared));
  if (shared.empty()) return 0.0;
  double sum = 0.0;
  for (auto z : shared) {
    const auto& x = na.at(z);
    const auto& y = nb.at(z);
    std::vector<NodeId> inter, uni;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(inter));
    std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(uni));
    sum += uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  }
  return sum / static_cast<double>(shared.size());
}

struct SimilarityMatrix {
  std::vector<std::size_t> ids;  // cascade ids, ascending (size, id)
  std::vector<std::vector<double>> values;
};

inline SimilarityMatrix similarity_matrix(const std::vector<CascadeTree>& trees, unsigned threads = 0) {
  if (trees.empty()) throw InputError("similarity matrix needs at least one cascade");
  std::vector<std::size_t> order(trees.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::pair(trees[x].size(), trees[x].id) < std::pair(trees[y].size(), trees[y].id);
  });
  const std::size_t n = order.size();
  SimilarityMatrix m;
  m.values.assign(n, std::vector<double>(n, 1.0));
  for (auto i : order) m.ids.push_back(trees[i].id);
  parallel_for(n, threads, [&](std::size_t r) {
    for (std::size_t c = r + 1; c < n; ++c) m.values[r][c] = cascade_similarity(trees[order[r]], trees[order[c]]);
  });
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < r; ++c) m.values[r][c] = m.values[c][r];
  return m;
}

struct CascadeMetrics {
  std::size_t cascade_id = 0;
  NodeId root = 0;
  std::size_t size = 0;
  double size_fraction = 0.0;
  double duration = 0.0;
  double virality_raw = 0.0;
  double virality_norm = 0.0;
  double max_degree_norm = 0.0;
};

struct MetricsConfig {
  ViralityNorm virality_norm = ViralityNorm::Sigmoid;
  DegreeBase degree_base = DegreeBase::TreeInternal;
};

// Virality normalization runs over the whole cascade set passed in.
inline std::vector<CascadeMetrics> compute_metrics(const std::vector<CascadeTree>& trees, const StaticGraph& g0, int k,
                                                   const MetricsConfig& cfg = {}) {
  std::vector<CascadeMetrics> out;
  std::vector<double> raw;
  for (const auto& t : trees) {
    CascadeMetrics m;
    m.cascade_id = t.id;
    m.root = t.root;
    m.size = cascade_size(t);
    m.size_fraction = size_fraction(t, g0);
    m.duration = cascade_duration(t, k);
    m.virality_raw = cascade_virality(t);
    m.max_degree_norm = max_degree_norm(t, g0, cfg.degree_base);
    raw.push_back(m.virality_raw);
    out.push_back(m);
  }
  const auto norm = normalize_virality(raw, cfg.virality_norm);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].virality_norm = norm[i];
  return out;
}

inline constexpr const char* kMetricsCsvHeader =
    "cascade_id,site,size,size_fraction,duration,virality_raw,virality_norm,max_degree_norm";

inline void write_metrics_csv(std::ostream& os, const std::vector<CascadeMetrics>& rows, const std::string& site) {
  os << kMetricsCsvHeader << '\n';
  for (const auto& m : rows)
    write_csv_row(os, {fmt_num(m.cascade_id), site, fmt_num(m.size), fmt_num(m.size_fraction), fmt_num(m.duration),
                       fmt_num(m.virality_raw), fmt_num(m.virality_norm), fmt_num(m.max_degree_norm)});
}

inline void write_similarity_csv(std::ostream& os, const SimilarityMatrix& m) {
  std::vector<std::string> header{"cascade_id"};
  for (auto id : m.ids) header.push_back(fmt_num(id));
  write_csv_row(os, header);
  for (std::size_t r = 0; r < m.ids.size(); ++r) {
    std::vector<std::string> row{fmt_num(m.ids[r])};
    for (double v : m.values[r]) row.push_back(fmt_num(v));
    write_csv_row(os, row);
  }
}

}  // namespace decaynet
