#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"
#include "decaynet/graph.hpp"
#include "decaynet/measures.hpp"
#include "decaynet/snapshots.hpp"

namespace decaynet {

/// Rooted tree of inactivity propagation. Edges point from the node that went
/// inactive earlier to its later-inactive neighbour in G_0.
struct CascadeTree {
  std::size_t id = 0;
  NodeId root = 0;
  std::vector<NodeId> nodes;        // sorted
  std::vector<Edge> edges;          // (parent, child), in extraction order
  std::map<NodeId, int> tau_of;

  std::size_t size() const noexcept { return nodes.size(); }
  bool contains(NodeId v) const { return std::binary_search(nodes.begin(), nodes.end(), v); }

  // Undirected neighbourhoods on the tree skeleton.
  std::map<NodeId, std::vector<NodeId>> skeleton() const {
    std::map<NodeId, std::vector<NodeId>> adj;
    for (auto v : nodes) adj[v];
    for (const auto& e : edges) {
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
    for (auto& [v, list] : adj) std::sort(list.begin(), list.end());
    return adj;
  }

  std::map<NodeId, std::vector<NodeId>> children() const {
    std::map<NodeId, std::vector<NodeId>> out;
    for (auto v : nodes) out[v];
    for (const auto& e : edges) out[e.u].push_back(e.v);
    for (auto& [v, list] : out) std::sort(list.begin(), list.end());
    return out;
  }
};

enum class InitiatorMode {
  EarliestLevel,       // every node of the earliest non-alive level
  AllNeighborsActive,  // nodes that go inactive before all of their neighbours
};

struct ExtractOptions {
  bool include_alive = false;
  InitiatorMode initiators = InitiatorMode::EarliestLevel;
};

/// Extracts one cascade per initiator from G_0 and the last-activity index.
///
/// Nodes are grouped into levels by tau. For initiator v the tree first takes
/// every initiator adjacent to v, then visits the later levels in order: a
/// node adjacent to v hangs off v; any other node hangs off its in-tree
/// neighbour with the smallest (tau, id) among those that went inactive
/// strictly earlier, and is skipped when there is none. Each node is visited
/// once per tree, so no triangle can close.
inline std::vector<CascadeTree> extract_cascades(const StaticGraph& g0, const SnapshotSeries& series,
                                                 const ExtractOptions& opt = {}) {
  if (series.k() < 2) throw InputError("cascade extraction needs a series with k >= 2");
  const int last = series.k() - 1;

  std::map<NodeId, int> tau;
  for (auto v : g0.nodes()) {
    const auto it = series.last_activity.find(v);
    if (it == series.last_activity.end() || it->second < 0) continue;
    if (it->second == last && !opt.include_alive) continue;
    tau.emplace(v, it->second);
  }
  if (tau.empty()) return {};

  std::set<NodeId> initiators;
  if (opt.initiators == InitiatorMode::AllNeighborsActive) {
    for (const auto& [v, tv] : tau) {
      const auto i = *g0.index_of(v);
      bool first = true;
      for (auto w : g0.neighbors(i)) {
        const auto it = series.last_activity.find(g0.id_at(w));
        if (it != series.last_activity.end() && it->second <= tv) {
          first = false;
          break;
        }
      }
      if (first) initiators.insert(v);
    }
  }
  if (initiators.empty()) {
    int earliest = std::numeric_limits<int>::max();
    for (const auto& [v, tv] : tau) earliest = std::min(earliest, tv);
    for (const auto& [v, tv] : tau)
      if (tv == earliest) initiators.insert(v);
  }

  std::map<int, std::vector<NodeId>> later_levels;  // non-initiators by tau, ids ascending
  for (const auto& [v, tv] : tau)
    if (!initiators.count(v)) later_levels[tv].push_back(v);

  std::vector<CascadeTree> out;
  for (auto v : initiators) {
    CascadeTree tree;
    tree.id = out.size();
    tree.root = v;
    const int tv = tau.at(v);
    std::set<NodeId> members{v};
    tree.tau_of[v] = tv;

    for (auto q : initiators) {
      if (q == v || !g0.has_edge(v, q)) continue;
      members.insert(q);
      tree.tau_of[q] = tau.at(q);
      tree.edges.push_back({v, q});
    }

    for (const auto& [level, nodes] : later_levels) {
      if (level <= tv) continue;
      for (auto u : nodes) {
        if (g0.has_edge(v, u)) {
          tree.edges.push_back({v, u});
        } else {
          std::optional<std::pair<int, NodeId>> best;
          for (auto w : members) {
            const int tw = tree.tau_of.at(w);
            if (tw >= level || !g0.has_edge(u, w)) continue;
            const std::pair<int, NodeId> key{tw, w};
            if (!best || key < *best) best = key;
          }
          if (!best) continue;
          tree.edges.push_back({best->second, u});
        }
        members.insert(u);
        tree.tau_of[u] = level;
      }
    }
    tree.nodes.assign(members.begin(), members.end());
    out.push_back(std::move(tree));
  }
  return out;
}

// Checks the tree invariants against G_0; returns the first violation.
inline std::optional<std::string> validate_tree(const CascadeTree& t, const StaticGraph& g0) {
  if (!t.contains(t.root)) return "root is not a member";
  if (t.edges.size() + 1 != t.nodes.size()) return "edge count is not |V| - 1";
  std::map<NodeId, int> parents;
  for (const auto& e : t.edges) {
    if (!t.contains(e.u) || !t.contains(e.v)) return "edge endpoint outside the node set";
    if (!g0.has_edge(e.u, e.v)) return "edge missing from G_0";
    if (++parents[e.v] > 1) return "node with two parents";
    const int tu = t.tau_of.at(e.u), tc = t.tau_of.at(e.v);
    if (tu > tc) return "edge runs against inactivity order";
    if (tu == tc && tu != t.tau_of.at(t.root)) return "equal-tau edge between non-initiators";
  }
  if (parents.count(t.root)) return "root has a parent";
  for (const auto& [v, tv] : t.tau_of)
    if (tv < t.tau_of.at(t.root)) return "root is not the earliest node";
  // Connectivity from the root along directed edges.
  const auto kids = t.children();
  std::set<NodeId> seen{t.root};
  std::vector<NodeId> stack{t.root};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto c : kids.at(v))
      if (seen.insert(c).second) stack.push_back(c);
  }
  if (seen.size() != t.nodes.size()) return "tree is not connected from its root";
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Cascade paths and coreness monotonicity.

struct CascadePath {
  std::vector<NodeId> nodes;  // root first, ends at a leaf
  std::vector<int> coreness_seq;
};

using CorenessMap = std::map<NodeId, int>;

inline CorenessMap coreness_map(const StaticGraph& g) {
  const auto core = k_core_decomposition(g);
  CorenessMap out;
  for (std::size_t i = 0; i < g.node_count(); ++i) out.emplace(g.id_at(i), core[i]);
  return out;
}

// One root-to-leaf path per leaf, leaves in depth-first order (children by id).
inline std::vector<CascadePath> cascade_paths(const CascadeTree& tree, const CorenessMap* coreness = nullptr) {
  const auto kids = tree.children();
  std::vector<CascadePath> out;
  std::vector<NodeId> path;
  auto walk = [&](auto&& self, NodeId v) -> void {
    path.push_back(v);
    const auto& ch = kids.at(v);
    if (ch.empty()) {
      CascadePath p;
      p.nodes = path;
      if (coreness)
        for (auto x : path) p.coreness_seq.push_back(coreness->at(x));
      out.push_back(std::move(p));
    }
    for (auto c : ch) self(self, c);
    path.pop_back();
  };
  walk(walk, tree.root);
  return out;
}

enum class Monotonicity { Increasing, Decreasing, NonMonotone };

inline const char* to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::Increasing: return "increasing";
    case Monotonicity::Decreasing: return "decreasing";
    case Monotonicity::NonMonotone: return "nonmonotone";
  }
  return "nonmonotone";
}

// Flat sequences (and single nodes) count as non-monotone.
inline Monotonicity classify_monotonicity(const std::vector<int>& coreness_seq) {
  bool up = false, down = false;
  for (std::size_t i = 1; i < coreness_seq.size(); ++i) {
    if (coreness_seq[i] > coreness_seq[i - 1]) up = true;
    if (coreness_seq[i] < coreness_seq[i - 1]) down = true;
  }
  if (up && !down) return Monotonicity::Increasing;
  if (down && !up) return Monotonicity::Decreasing;
  return Monotonicity::NonMonotone;
}

inline Monotonicity classify_monotonicity(const CascadePath& path) { return classify_monotonicity(path.coreness_seq); }

struct MonotonicityProfile {
  std::size_t paths = 0;
  std::size_t increasing = 0;
  std::size_t decreasing = 0;
  std::size_t nonmonotone = 0;

  double fraction(std::size_t count) const { return static_cast<double>(count) / static_cast<double>(paths); }
  double increasing_fraction() const { return fraction(increasing); }
  double decreasing_fraction() const { return fraction(decreasing); }
  double nonmonotone_fraction() const { return fraction(nonmonotone); }
};

inline MonotonicityProfile monotonicity_profile(const std::vector<CascadeTree>& trees, const CorenessMap& coreness) {
  MonotonicityProfile prof;
  for (const auto& t : trees)
    for (const auto& p : cascade_paths(t, &coreness)) {
      ++prof.paths;
      switch (classify_monotonicity(p)) {
        case Monotonicity::Increasing: ++prof.increasing; break;
        case Monotonicity::Decreasing: ++prof.decreasing; break;
        case Monotonicity::NonMonotone: ++prof.nonmonotone; break;
      }
    }
  if (prof.paths == 0) throw InputError("monotonicity profile needs at least one cascade path");
  return prof;
}

/// Coreness in G_0 of cascade initiators versus every other node of G_0.
struct CorenessSplit {
  std::vector<double> initiators;
  std::vector<double> others;
};

inline CorenessSplit initiator_coreness_split(const StaticGraph& g0, const std::vector<CascadeTree>& trees) {
  std::set<NodeId> roots;
  for (const auto& t : trees) roots.insert(t.root);
  const auto core = k_core_decomposition(g0);
  CorenessSplit out;
  for (std::size_t i = 0; i < g0.node_count(); ++i)
    (roots.count(g0.id_at(i)) ? out.initiators : out.others).push_back(core[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: JSON lines and GraphViz.

inline void write_cascades_jsonl(std::ostream& os, const std::vector<CascadeTree>& trees) {
  for (const auto& t : trees) {
    nlohmann::ordered_json j;
    j["id"] = t.id;
    j["root"] = t.root;
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : t.edges) edges.push_back({e.u, e.v});
    j["edges"] = std::move(edges);
    auto tau = nlohmann::ordered_json::object();
    for (const auto& [v, l] : t.tau_of) tau[std::to_string(v)] = l;
    j["tau"] = std::move(tau);
    os << j.dump() << '\n';
  }
}

inline std::vector<CascadeTree> read_cascades_jsonl(std::istream& in) {
  std::vector<CascadeTree> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CascadeTree t;
      t.id = j.at("id").get<std::size_t>();
      t.root = j.at("root").get<NodeId>();
      for (const auto& e : j.at("edges")) t.edges.push_back({e.at(0).get<NodeId>(), e.at(1).get<NodeId>()});
      for (const auto& [key, value] : j.at("tau").items()) t.tau_of[std::stoll(key)] = value.get<int>();
      for (const auto& [v, l] : t.tau_of) t.nodes.push_back(v);
      out.push_back(std::move(t));
    } catch (const std::exception& ex) {
      throw InputError("cascade line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

// Figure-style dump: node colour darkens with earlier inactivity, node width
// grows with degree inside the cascade.
inline void write_cascades_dot(std::ostream& os, const std::vector<CascadeTree>& trees, int k) {
  os << "digraph cascades {\n  node [shape=circle, style=filled, label=\"\"];\n";
  for (const auto& t : trees) {
    os << "  subgraph cluster_" << t.id << " {\n    label=\"cascade " << t.id << "\";\n";
    const auto adj = t.skeleton();
    for (auto v : t.nodes) {
      const double shade = k > 1 ? static_cast<double>(t.tau_of.at(v)) / static_cast<double>(k - 1) : 0.0;
      os << "    c" << t.id << "_" << v << " [tooltip=\"" << v << "\", tau=" << t.tau_of.at(v)
         << ", fillcolor=\"0 0 " << fmt_num(0.15 + 0.85 * shade) << "\", width="
         << fmt_num(0.2 + 0.1 * static_cast<double>(adj.at(v).size())) << "];\n";
    }
    for (const auto& e : t.edges) os << "    c" << t.id << "_" << e.u << " -> c" << t.id << "_" << e.v << ";\n";
    os << "  }\n";
  }
  os << "}\n";
}

}  // namespace decaynet
