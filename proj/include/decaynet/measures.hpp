#pragma once

// Node- and edge-level measures on an undirected StaticGraph. Vector-valued
// results are aligned with StaticGraph::nodes() (slot i belongs to id_at(i)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"
#include "decaynet/graph.hpp"
#include "decaynet/parallel.hpp"

namespace decaynet {

inline constexpr int kUnreachable = -1;

// Hop counts from `source` by dense index; unreachable slots hold kUnreachable.
inline std::vector<int> bfs_hops(const StaticGraph& g, std::size_t source) {
  std::vector<int> dist(g.node_count(), kUnreachable);
  std::vector<std::size_t> queue;
  queue.reserve(g.node_count());
  dist[source] = 0;
  queue.push_back(source);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto v = queue[head];
    for (auto w : g.neighbors(v)) {
      if (dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

inline std::map<NodeId, std::size_t> bfs_distances(const StaticGraph& g, NodeId source) {
  const auto hops = bfs_hops(g, g.require_index(source));
  std::map<NodeId, std::size_t> out;
  for (std::size_t i = 0; i < hops.size(); ++i)
    if (hops[i] != kUnreachable) out.emplace(g.id_at(i), static_cast<std::size_t>(hops[i]));
  return out;
}

// Connected component label per node; labels are numbered in order of each
// component's smallest node.
inline std::vector<std::size_t> component_labels(const StaticGraph& g) {
  constexpr auto unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(g.node_count(), unset);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < g.node_count(); ++s) {
    if (label[s] != unset) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : g.neighbors(v))
        if (label[w] == unset) {
          label[w] = next;
          stack.push_back(w);
        }
    }
    ++next;
  }
  return label;
}

/// Brandes accumulation for node and edge betweenness.
///
/// Both are summed over unordered pairs {s,t}. `edge` is keyed by the edge's
/// (smaller id, larger id) endpoints.
struct Betweenness {
  std::vector<double> node;
  std::map<Edge, double> edge;
};

namespace detail {

// Offsets into a flat per-adjacency-slot array (CSR layout of g).
inline std::vector<std::size_t> slot_offsets(const StaticGraph& g) {
  std::vector<std::size_t> off(g.node_count() + 1, 0);
  for (std::size_t v = 0; v < g.node_count(); ++v) off[v + 1] = off[v] + g.degree(v);
  return off;
}

inline std::size_t slot_of(const StaticGraph& g, const std::vector<std::size_t>& off, std::size_t a,
                           std::size_t b) {
  const auto nb = g.neighbors(a);
  return off[a] + static_cast<std::size_t>(std::lower_bound(nb.begin(), nb.end(), b) - nb.begin());
}

}  // namespace detail

inline Betweenness brandes(const StaticGraph& g, unsigned threads = 0) {
  const std::size_t n = g.node_count();
  const auto off = detail::slot_offsets(g);
  const std::size_t slots = off[n];

  // Sources are grouped into fixed blocks whose partial sums are reduced in
  // block order, so the result does not depend on the thread count.
  const std::size_t block = std::max<std::size_t>(64, (n + 63) / 64);
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<std::vector<double>> node_part(blocks), edge_part(blocks);

  parallel_for(blocks, threads, [&](std::size_t b) {
    auto& nodes = node_part[b];
    auto& edges = edge_part[b];
    nodes.assign(n, 0.0);
    edges.assign(slots, 0.0);
    std::vector<double> sigma(n), delta(n);
    std::vector<int> dist(n);
    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t s = b * block; s < std::min(n, (b + 1) * block); ++s) {
      std::fill(sigma.begin(), sigma.end(), 0.0);
      std::fill(delta.begin(), delta.end(), 0.0);
      std::fill(dist.begin(), dist.end(), kUnreachable);
      order.clear();
      sigma[s] = 1.0;
      dist[s] = 0;
      order.push_back(s);
      for (std::size_t head = 0; head < order.size(); ++head) {
        const auto v = order[head];
        for (auto w : g.neighbors(v)) {
          if (dist[w] == kUnreachable) {
            dist[w] = dist[v] + 1;
            order.push_back(w);
          }
          if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
        }
      }
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto w = *it;
        for (auto v : g.neighbors(w)) {
          if (dist[v] != dist[w] - 1) continue;
          const double c = sigma[v] / sigma[w] * (1.0 + delta[w]);
          delta[v] += c;
          edges[detail::slot_of(g, off, v, w)] += c;
        }
        if (w != s) nodes[w] += delta[w];
      }
    }
  });

  Betweenness out;
  out.node.assign(n, 0.0);
  std::vector<double> slot_sum(slots, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < n; ++i) out.node[i] += node_part[b][i];
    for (std::size_t i = 0; i < slots; ++i) slot_sum[i] += edge_part[b][i];
  }
  // Every unordered pair was visited from both of its endpoints.
  for (auto& x : out.node) x /= 2.0;
  for (std::size_t a = 0; a < n; ++a)
    for (auto b : g.neighbors(a))
      if (a < b) {
        const double v = slot_sum[detail::slot_of(g, off, a, b)] + slot_sum[detail::slot_of(g, off, b, a)];
        out.edge.emplace(Edge{g.id_at(a), g.id_at(b)}, v / 2.0);
      }
  return out;
}

inline std::vector<double> betweenness_centrality(const StaticGraph& g, unsigned threads = 0) {
  return brandes(g, threads).node;
}

inline std::map<Edge, double> edge_betweenness(const StaticGraph& g, unsigned threads = 0) {
  return brandes(g, threads).edge;
}

// Mean betweenness of the edges incident to `v`; 0 for an isolated node.
inline double incident_edge_betweenness(const StaticGraph& g, const std::map<Edge, double>& eb, NodeId v) {
  const auto i = g.require_index(v);
  if (g.degree(i) == 0) return 0.0;
  double sum = 0.0;
  for (auto w : g.neighbors(i)) {
    const NodeId u = g.id_at(w);
    sum += eb.at(v < u ? Edge{v, u} : Edge{u, v});
  }
  return sum / static_cast<double>(g.degree(i));
}

inline double incident_edge_betweenness(const StaticGraph& g, NodeId v) {
  return incident_edge_betweenness(g, edge_betweenness(g, 1), v);
}

// Reciprocal of the distance sum within v's component; 0 when v is alone.
inline double closeness_from_hops(const std::vector<int>& hops) {
  long long sum = 0;
  for (auto d : hops)
    if (d > 0) sum += d;
  return sum == 0 ? 0.0 : 1.0 / static_cast<double>(sum);
}

inline double closeness_centrality(const StaticGraph& g, NodeId v) {
  return closeness_from_hops(bfs_hops(g, g.require_index(v)));
}

inline int eccentricity_from_hops(const std::vector<int>& hops) {
  return hops.empty() ? 0 : *std::max_element(hops.begin(), hops.end());
}

inline int eccentricity(const StaticGraph& g, NodeId v) {
  return eccentricity_from_hops(bfs_hops(g, g.require_index(v)));
}

/// Coreness by minimum-degree peeling with bucketed degrees
/// (Batagelj–Zaversnik), O(n + m).
inline std::vector<int> k_core_decomposition(const StaticGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<int> deg(n);
  int max_deg = 0;
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = static_cast<int>(g.degree(v));
    max_deg = std::max(max_deg, deg[v]);
  }
  std::vector<std::size_t> bin(static_cast<std::size_t>(max_deg) + 1, 0);
  for (auto d : deg) ++bin[static_cast<std::size_t>(d)];
  std::size_t start = 0;
  for (auto& b : bin) {
    const auto count = b;
    b = start;
    start += count;
  }
  std::vector<std::size_t> vert(n), pos(n);
  for (std::size_t v = 0; v < n; ++v) {
    pos[v] = bin[static_cast<std::size_t>(deg[v])]++;
    vert[pos[v]] = v;
  }
  for (std::size_t d = bin.size() - 1; d > 0; --d) bin[d] = bin[d - 1];
  if (!bin.empty()) bin[0] = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto v = vert[i];
    for (auto u : g.neighbors(v)) {
      if (deg[u] <= deg[v]) continue;
      const auto du = static_cast<std::size_t>(deg[u]);
      const auto pu = pos[u];
      const auto pw = bin[du];
      const auto w = vert[pw];
      if (u != w) {
        std::swap(vert[pu], vert[pw]);
        pos[u] = pw;
        pos[w] = pu;
      }
      ++bin[du];
      --deg[u];
    }
  }
  return deg;
}

// Unit-capacity max-flow between two nodes of an undirected graph (Dinic).
// Equals the number of edges that must be removed to separate them.
class UnitFlowNetwork {
 public:
  explicit UnitFlowNetwork(const StaticGraph& g) : g_(g), off_(detail::slot_offsets(g)) {
    reverse_.resize(off_.back());
    for (std::size_t a = 0; a < g.node_count(); ++a) {
      const auto nb = g.neighbors(a);
      for (std::size_t k = 0; k < nb.size(); ++k) reverse_[off_[a] + k] = detail::slot_of(g, off_, nb[k], a);
    }
  }

  // Max-flow value; afterwards source_side() reports the source's side of a
  // minimum cut.
  int max_flow(std::size_t s, std::size_t t) {
    flow_.assign(off_.back(), 0);
    int total = 0;
    if (s == t) return 0;
    while (build_levels(s, t)) {
      iter_.assign(g_.node_count(), 0);
      while (augment(s, t)) ++total;
    }
    return total;
  }

  // Nodes reachable from s in the residual graph of the last max_flow call.
  std::vector<bool> source_side(std::size_t s) const {
    std::vector<bool> seen(g_.node_count(), false);
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      const auto nb = g_.neighbors(v);
      for (std::size_t k = 0; k < nb.size(); ++k)
        if (!seen[nb[k]] && residual(off_[v] + k) > 0) {
          seen[nb[k]] = true;
          stack.push_back(nb[k]);
        }
    }
    return seen;
  }

 private:
  // Each undirected edge is a pair of opposite arcs of capacity 1 that share
  // one flow variable: flow_[slot] = -flow_[reverse slot].
  int residual(std::size_t slot) const { return 1 - flow_[slot]; }

  bool build_levels(std::size_t s, std::size_t t) {
    level_.assign(g_.node_count(), -1);
    std::vector<std::size_t> queue{s};
    level_[s] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto v = queue[head];
      const auto nb = g_.neighbors(v);
      for (std::size_t k = 0; k < nb.size(); ++k)
        if (level_[nb[k]] < 0 && residual(off_[v] + k) > 0) {
          level_[nb[k]] = level_[v] + 1;
          queue.push_back(nb[k]);
        }
    }
    return level_[t] >= 0;
  }

  bool augment(std::size_t s, std::size_t t) {
    // Iterative DFS along the level graph, pushing one unit.
    std::vector<std::size_t> path_slots;
    std::size_t v = s;
    while (v != t) {
      const auto nb = g_.neighbors(v);
      bool advanced = false;
      for (auto& k = iter_[v]; k < nb.size(); ++k) {
        const auto slot = off_[v] + k;
        if (residual(slot) > 0 && level_[nb[k]] == level_[v] + 1) {
          path_slots.push_back(slot);
          v = nb[k];
          advanced = true;
          break;
        }
      }
      if (advanced) continue;
      level_[v] = -1;  // dead end
      if (path_slots.empty()) return false;
      const auto slot = path_slots.back();
      path_slots.pop_back();
      v = owner_of(slot);
      ++iter_[v];
    }
    for (auto slot : path_slots) {
      ++flow_[slot];
      --flow_[reverse_[slot]];
    }
    return true;
  }

  std::size_t owner_of(std::size_t slot) const {
    return static_cast<std::size_t>(std::upper_bound(off_.begin(), off_.end(), slot) - off_.begin()) - 1;
  }

  const StaticGraph& g_;
  std::vector<std::size_t> off_;
  std::vector<std::size_t> reverse_;
  std::vector<int> flow_;
  std::vector<int> level_;
  std::vector<std::size_t> iter_;
};

inline int min_cut(const StaticGraph& g, NodeId u, NodeId v) {
  UnitFlowNetwork net(g);
  return net.max_flow(g.require_index(u), g.require_index(v));
}

/// All-pairs minimum edge cuts from n-1 max-flows (Gusfield's equivalent
/// flow tree). Entry [a][b] is MinCut between dense indices a and b.
inline std::vector<std::vector<int>> all_pairs_min_cut(const StaticGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::size_t> parent(n, 0);
  std::vector<int> weight(n, 0);
  UnitFlowNetwork net(g);
  for (std::size_t s = 1; s < n; ++s) {
    const auto t = parent[s];
    weight[s] = net.max_flow(s, t);
    const auto side = net.source_side(s);
    for (std::size_t i = s + 1; i < n; ++i)
      if (side[i] && parent[i] == t) parent[i] = s;
  }

  // Pairwise value = lightest edge on the tree path.
  std::vector<std::vector<std::size_t>> tree(n);
  for (std::size_t s = 1; s < n; ++s) {
    tree[s].push_back(parent[s]);
    tree[parent[s]].push_back(s);
  }
  auto edge_weight = [&](std::size_t a, std::size_t b) { return parent[a] == b ? weight[a] : weight[b]; };
  std::vector<std::vector<int>> cut(n, std::vector<int>(n, 0));
  for (std::size_t root = 0; root < n; ++root) {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, root}};
    cut[root][root] = std::numeric_limits<int>::max();
    while (!stack.empty()) {
      const auto [v, from] = stack.back();
      stack.pop_back();
      for (auto w : tree[v]) {
        if (w == from) continue;
        cut[root][w] = std::min(cut[root][v], edge_weight(v, w));
        stack.push_back({w, v});
      }
    }
    cut[root][root] = 0;
  }
  return cut;
}

// Mean of MinCut(u, v) over all u != v, by direct max-flows from v.
inline double averaged_min_cut(const StaticGraph& g, NodeId v) {
  const std::size_t n = g.node_count();
  const auto s = g.require_index(v);
  if (n <= 1) return 0.0;
  UnitFlowNetwork net(g);
  long long sum = 0;
  for (std::size_t t = 0; t < n; ++t)
    if (t != s) sum += net.max_flow(s, t);
  return static_cast<double>(sum) / static_cast<double>(n - 1);
}

struct MinCutOptions {
  // When set and the graph has more nodes than this, each node averages over
  // this many uniformly sampled partners instead of all n-1.
  std::optional<std::size_t> sample_cap;
  std::uint64_t seed = 1;
};

inline std::vector<double> averaged_min_cut_all(const StaticGraph& g, const MinCutOptions& opt = {},
                                                unsigned threads = 0) {
  const std::size_t n = g.node_count();
  std::vector<double> out(n, 0.0);
  if (n <= 1) return out;
  if (!opt.sample_cap || n <= *opt.sample_cap) {
    const auto cut = all_pairs_min_cut(g);
    for (std::size_t v = 0; v < n; ++v) {
      long long sum = 0;
      for (std::size_t u = 0; u < n; ++u)
        if (u != v) sum += cut[v][u];
      out[v] = static_cast<double>(sum) / static_cast<double>(n - 1);
    }
    return out;
  }
  const std::size_t cap = std::max<std::size_t>(1, *opt.sample_cap);
  parallel_for(n, threads, [&](std::size_t v) {
    std::mt19937_64 rng(opt.seed ^ (0x9E3779B97F4A7C15ULL * (v + 1)));
    std::vector<std::size_t> others;
    others.reserve(n - 1);
    for (std::size_t u = 0; u < n; ++u)
      if (u != v) others.push_back(u);
    std::vector<std::size_t> picked;
    std::sample(others.begin(), others.end(), std::back_inserter(picked), cap, rng);
    UnitFlowNetwork net(g);
    long long sum = 0;
    for (auto u : picked) sum += net.max_flow(v, u);
    out[v] = static_cast<double>(sum) / static_cast<double>(picked.size());
  });
  return out;
}

struct EigenvectorResult {
  std::vector<double> values;  // max-norm 1 on the largest component, 0 elsewhere
  double eigenvalue = 0.0;     // Rayleigh estimate
  std::size_t iterations = 0;
  double residual = 0.0;  // ||A x - lambda x||_inf
};

/// Eigenvector centrality on the largest connected component (ties go to the
/// component holding the smallest node id).
///
/// Iterates x <- (A + I) x with max-norm scaling. The shift leaves the
/// eigenvectors unchanged and keeps bipartite components from oscillating.
inline EigenvectorResult eigenvector_centrality_detail(const StaticGraph& g, double tol = 1e-10,
                                                       std::size_t max_iter = 10000) {
  if (g.edge_count() == 0) throw InputError("eigenvector centrality needs at least one edge");
  const std::size_t n = g.node_count();
  const auto label = component_labels(g);
  std::vector<std::size_t> size(*std::max_element(label.begin(), label.end()) + 1, 0);
  for (auto l : label) ++size[l];
  const auto big = static_cast<std::size_t>(std::max_element(size.begin(), size.end()) - size.begin());

  std::vector<double> x(n, 0.0), next(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    if (label[v] == big) x[v] = 1.0;

  auto rayleigh_residual = [&](const std::vector<double>& vec, double& lambda) {
    double num = 0.0, den = 0.0;
    std::vector<double> ax(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (auto w : g.neighbors(v)) ax[v] += vec[w];
      num += vec[v] * ax[v];
      den += vec[v] * vec[v];
    }
    lambda = num / den;
    double r = 0.0;
    for (std::size_t v = 0; v < n; ++v) r = std::max(r, std::abs(ax[v] - lambda * vec[v]));
    return r;
  };

  EigenvectorResult res;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    double scale = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (label[v] != big) continue;
      double s = x[v];
      for (auto w : g.neighbors(v)) s += x[w];
      next[v] = s;
      scale = std::max(scale, s);
    }
    double diff = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (label[v] != big) continue;
      next[v] /= scale;
      diff = std::max(diff, std::abs(next[v] - x[v]));
    }
    x.swap(next);
    if (diff < tol) {
      res.iterations = it;
      res.residual = rayleigh_residual(x, res.eigenvalue);
      res.values = std::move(x);
      return res;
    }
  }
  double lambda = 0.0;
  const double r = rayleigh_residual(x, lambda);
  throw NumericError("eigenvector centrality did not converge in " + std::to_string(max_iter) +
                     " iterations (residual " + fmt_num(r) + ")");
}

inline std::vector<double> eigenvector_centrality(const StaticGraph& g, double tol = 1e-10,
                                                  std::size_t max_iter = 10000) {
  return eigenvector_centrality_detail(g, tol, max_iter).values;
}

inline double avg_neighbor_degree(const StaticGraph& g, NodeId v) {
  const auto i = g.require_index(v);
  if (g.degree(i) == 0) return 0.0;
  double sum = 0.0;
  for (auto w : g.neighbors(i)) sum += static_cast<double>(g.degree(w));
  return sum / static_cast<double>(g.degree(i));
}

struct NodeMeasures {
  NodeId node = 0;
  std::size_t degree = 0;
  double betweenness = 0.0;
  double closeness = 0.0;
  int coreness = 0;
  int eccentricity = 0;
  double avg_min_cut = 0.0;
  double eigenvector = 0.0;
  double incident_edge_betweenness = 0.0;
  double avg_neighbor_degree = 0.0;
};

struct MeasureConfig {
  double eigen_tol = 1e-10;
  std::size_t eigen_max_iter = 10000;
  MinCutOptions min_cut;
  unsigned threads = 0;
};

inline std::vector<NodeMeasures> node_measures(const StaticGraph& g, const MeasureConfig& cfg = {}) {
  const std::size_t n = g.node_count();
  std::vector<NodeMeasures> out(n);
  if (n == 0) return out;

  const auto bw = brandes(g, cfg.threads);
  const auto core = k_core_decomposition(g);
  const auto mc = averaged_min_cut_all(g, cfg.min_cut, cfg.threads);
  std::vector<double> evec(n, 0.0);
  if (g.edge_count() > 0) evec = eigenvector_centrality(g, cfg.eigen_tol, cfg.eigen_max_iter);

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const auto hops = bfs_hops(g, i);
    auto& m = out[i];
    m.node = g.id_at(i);
    m.degree = g.degree(i);
    m.betweenness = bw.node[i];
    m.closeness = closeness_from_hops(hops);
    m.coreness = core[i];
    m.eccentricity = eccentricity_from_hops(hops);
    m.avg_min_cut = mc[i];
    m.eigenvector = evec[i];
    m.incident_edge_betweenness = incident_edge_betweenness(g, bw.edge, m.node);
    m.avg_neighbor_degree = avg_neighbor_degree(g, m.node);
  });
  return out;
}

inline constexpr const char* kMeasureCsvHeader =
    "node,degree,betweenness,closeness,coreness,eccentricity,avg_min_cut,eigenvector,"
    "incident_edge_betweenness,avg_neighbor_degree";

inline void write_measures_csv(std::ostream& os, const std::vector<NodeMeasures>& rows) {
  os << kMeasureCsvHeader << '\n';
  for (const auto& m : rows)
    write_csv_row(os, {fmt_num(m.node), fmt_num(m.degree), fmt_num(m.betweenness), fmt_num(m.closeness),
                       fmt_num(m.coreness), fmt_num(m.eccentricity), fmt_num(m.avg_min_cut),
                       fmt_num(m.eigenvector), fmt_num(m.incident_edge_betweenness),
                       fmt_num(m.avg_neighbor_degree)});
}

inline std::vector<NodeMeasures> read_measures_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMeasureCsvHeader) throw InputError("measure table has an unexpected header");
  std::vector<NodeMeasures> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    NodeMeasures m;
    const bool ok = f.size() == 10 && parse_number(f[0], m.node) && parse_number(f[1], m.degree) &&
                    parse_number(f[2], m.betweenness) && parse_number(f[3], m.closeness) &&
                    parse_number(f[4], m.coreness) && parse_number(f[5], m.eccentricity) &&
                    parse_number(f[6], m.avg_min_cut) && parse_number(f[7], m.eigenvector) &&
                    parse_number(f[8], m.incident_edge_betweenness) && parse_number(f[9], m.avg_neighbor_degree);
    if (!ok) throw InputError("measure table line " + std::to_string(line_no) + " is malformed");
    out.push_back(m);
  }
  return out;
}

}  // namespace decaynet
