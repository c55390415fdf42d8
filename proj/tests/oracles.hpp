#pragma once

// Brute-force reference computations used only by the tests. None of these
// share code with the library algorithms they check.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

// Plain adjacency-matrix graph on nodes 0..n-1.
struct Matrix {
  std::size_t n = 0;
  std::vector<std::vector<bool>> adj;

  explicit Matrix(std::size_t nodes) : n(nodes), adj(nodes, std::vector<bool>(nodes, false)) {}
  void add(std::size_t a, std::size_t b) {
    if (a == b) return;
    adj[a][b] = adj[b][a] = true;
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (adj[a][b]) out.emplace_back(a, b);
    return out;
  }
  std::size_t degree(std::size_t v) const { return static_cast<std::size_t>(std::count(adj[v].begin(), adj[v].end(), true)); }
};

inline Matrix random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  Matrix m(n);
  std::bernoulli_distribution coin(p);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (coin(rng)) m.add(a, b);
  return m;
}

// Every simple path between s and t, each as a node sequence.
inline std::vector<std::vector<std::size_t>> all_simple_paths(const Matrix& g, std::size_t s, std::size_t t) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> path{s};
  std::vector<bool> used(g.n, false);
  used[s] = true;
  std::function<void(std::size_t)> walk = [&](std::size_t v) {
    if (v == t) {
      out.push_back(path);
      return;
    }
    for (std::size_t w = 0; w < g.n; ++w) {
      if (!g.adj[v][w] || used[w]) continue;
      used[w] = true;
      path.push_back(w);
      walk(w);
      path.pop_back();
      used[w] = false;
    }
  };
  walk(s);
  return out;
}

// Shortest paths between s and t found by filtering all simple paths.
inline std::vector<std::vector<std::size_t>> all_shortest_paths(const Matrix& g, std::size_t s, std::size_t t) {
  auto paths = all_simple_paths(g, s, t);
  if (paths.empty()) return paths;
  std::size_t best = paths.front().size();
  for (const auto& p : paths) best = std::min(best, p.size());
  std::vector<std::vector<std::size_t>> out;
  for (auto& p : paths)
    if (p.size() == best) out.push_back(std::move(p));
  return out;
}

// Distance by exhaustive path enumeration; -1 when unreachable.
inline int distance(const Matrix& g, std::size_t s, std::size_t t) {
  if (s == t) return 0;
  const auto sp = all_shortest_paths(g, s, t);
  return sp.empty() ? -1 : static_cast<int>(sp.front().size()) - 1;
}

// Node betweenness over unordered pairs, by counting shortest paths.
inline std::vector<double> betweenness(const Matrix& g) {
  std::vector<double> b(g.n, 0.0);
  for (std::size_t s = 0; s < g.n; ++s)
    for (std::size_t t = s + 1; t < g.n; ++t) {
      const auto sp = all_shortest_paths(g, s, t);
      if (sp.empty()) continue;
      for (std::size_t v = 0; v < g.n; ++v) {
        if (v == s || v == t) continue;
        std::size_t through = 0;
        for (const auto& p : sp)
          if (std::find(p.begin(), p.end(), v) != p.end()) ++through;
        b[v] += static_cast<double>(through) / static_cast<double>(sp.size());
      }
    }
  return b;
}

// Edge betweenness keyed by (a < b).
inline std::vector<std::vector<double>> edge_betweenness(const Matrix& g) {
  std::vector<std::vector<double>> eb(g.n, std::vector<double>(g.n, 0.0));
  for (std::size_t s = 0; s < g.n; ++s)
    for (std::size_t t = s + 1; t < g.n; ++t) {
      const auto sp = all_shortest_paths(g, s, t);
      if (sp.empty()) continue;
      for (const auto& p : sp)
        for (std::size_t i = 0; i + 1 < p.size(); ++i) {
          const auto a = std::min(p[i], p[i + 1]);
          const auto b = std::max(p[i], p[i + 1]);
          eb[a][b] += 1.0 / static_cast<double>(sp.size());
        }
    }
  return eb;
}

// Coreness from the definition: for each k, delete nodes of degree < k until
// none remain; survivors form the maximal k-core.
inline std::vector<int> coreness(const Matrix& g) {
  std::vector<int> core(g.n, 0);
  for (int k = 1; k <= static_cast<int>(g.n); ++k) {
    std::vector<bool> alive(g.n, true);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t v = 0; v < g.n; ++v) {
        if (!alive[v]) continue;
        int d = 0;
        for (std::size_t w = 0; w < g.n; ++w)
          if (alive[w] && g.adj[v][w]) ++d;
        if (d < k) {
          alive[v] = false;
          changed = true;
        }
      }
    }
    for (std::size_t v = 0; v < g.n; ++v)
      if (alive[v]) core[v] = k;
  }
  return core;
}

inline bool connected_without(const Matrix& g, const std::vector<std::pair<std::size_t, std::size_t>>& removed,
                              std::size_t s, std::size_t t) {
  Matrix h = g;
  for (auto [a, b] : removed) h.adj[a][b] = h.adj[b][a] = false;
  std::vector<bool> seen(g.n, false);
  std::vector<std::size_t> stack{s};
  seen[s] = true;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (std::size_t w = 0; w < g.n; ++w)
      if (h.adj[v][w] && !seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
  }
  return seen[t];
}

// True when some set of exactly `size` edges separates s from t.
inline bool separable_with(const Matrix& g, std::size_t s, std::size_t t, std::size_t size) {
  const auto edges = g.edges();
  if (size > edges.size()) return false;
  std::vector<bool> pick(edges.size(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size), true);
  do {
    std::vector<std::pair<std::size_t, std::size_t>> removed;
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (pick[i]) removed.push_back(edges[i]);
    if (!connected_without(g, removed, s, t)) return true;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return false;
}

// Minimum edge cut by growing the subset size until s and t separate.
inline int min_cut(const Matrix& g, std::size_t s, std::size_t t) {
  for (std::size_t size = 0;; ++size)
    if (separable_with(g, s, t, size)) return static_cast<int>(size);
}

}  // namespace oracle
