#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"
#include "decaynet/graph.hpp"
#include "decaynet/ingest.hpp"

namespace decaynet {

/// Disjoint-window temporal series G_0..G_{k-1} over the node universe of
/// G_0, with each node's last-activity index (the last snapshot in which it
/// has an incident edge).
struct SnapshotSeries {
  std::vector<StaticGraph> snapshots;
  std::int64_t window = 0;
  std::int64_t start = 0;
  std::vector<NodeId> core_nodes;          // == snapshots[0].nodes()
  std::map<NodeId, int> last_activity;     // tau
  std::vector<NodeId> alive;               // tau == k-1

  int k() const noexcept { return static_cast<int>(snapshots.size()); }
  const StaticGraph& initial() const { return snapshots.front(); }
  int tau(NodeId v) const { return last_activity.at(v); }
  bool is_alive(NodeId v) const { return std::binary_search(alive.begin(), alive.end(), v); }
};

// Last snapshot with an incident edge, for every node of G_0. Nodes that never
// have an edge get -1.
inline std::map<NodeId, int> compute_last_activity(const std::vector<StaticGraph>& snapshots) {
  std::map<NodeId, int> tau;
  if (snapshots.empty()) return tau;
  for (auto v : snapshots.front().nodes()) tau[v] = -1;
  for (int t = 0; t < static_cast<int>(snapshots.size()); ++t) {
    const auto& g = snapshots[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < g.node_count(); ++i)
      if (g.degree(i) > 0) tau[g.id_at(i)] = t;
  }
  return tau;
}

inline std::vector<NodeId> alive_nodes(const std::map<NodeId, int>& tau, int k) {
  std::vector<NodeId> out;
  for (const auto& [v, t] : tau)
    if (t == k - 1) out.push_back(v);
  return out;
}

// Checks the series invariants; returns a description of the first violation.
inline std::optional<std::string> validate_series(const SnapshotSeries& s) {
  if (s.k() < 2) return "k must be at least 2";
  const auto& g0 = s.initial();
  if (s.core_nodes != g0.nodes()) return "core nodes differ from the nodes of G_0";
  for (int t = 0; t < s.k(); ++t)
    for (auto v : s.snapshots[static_cast<std::size_t>(t)].nodes())
      if (!g0.contains(v)) return "snapshot " + std::to_string(t) + " has node outside G_0";
  const auto tau = compute_last_activity(s.snapshots);
  for (const auto& [v, t] : tau) {
    const auto it = s.last_activity.find(v);
    if (it == s.last_activity.end()) return "node " + std::to_string(v) + " has no last-activity index";
    if (it->second != t) return "node " + std::to_string(v) + " last-activity index disagrees with snapshots";
  }
  if (s.last_activity.size() != tau.size()) return "last-activity map has extra nodes";
  if (s.alive != alive_nodes(s.last_activity, s.k())) return "alive set inconsistent with last-activity";
  return std::nullopt;
}

struct BuildResult {
  SnapshotSeries series;
  std::size_t dropped_trailing = 0;  // events after start + k*window
  std::size_t dropped_emerging = 0;  // later events touching nodes absent from G_0
  std::vector<std::string> warnings;
};

/// Bins core-to-core events into k disjoint windows starting at the first
/// such event. G_0's nodes become the node universe; later edges touching
/// other nodes are ignored. Duplicate interactions in a window collapse to
/// one edge. With no window given, window = ceil((span + 1) / k).
inline BuildResult build_snapshots(std::vector<InteractionEvent> events, const std::vector<NodeId>& core,
                                   std::optional<std::int64_t> window, int k) {
  if (k < 2) throw UsageError("k must be at least 2");
  if (window && *window <= 0) throw UsageError("window must be positive");
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp, a.source, a.target) < std::tie(b.timestamp, b.source, b.target);
  });
  const std::set<NodeId> core_set(core.begin(), core.end());
  std::vector<const InteractionEvent*> kept;
  for (const auto& e : events)
    if (e.source != e.target && core_set.count(e.source) && core_set.count(e.target)) kept.push_back(&e);
  if (kept.empty()) throw InputError("no events involve two core members");

  BuildResult out;
  auto& s = out.series;
  s.start = kept.front()->timestamp;
  const std::int64_t span = kept.back()->timestamp - s.start;
  s.window = window ? *window : std::max<std::int64_t>(1, (span + k) / k);

  std::vector<std::vector<Edge>> edges(static_cast<std::size_t>(k));
  for (const auto* e : kept) {
    const auto t = (e->timestamp - s.start) / s.window;
    if (t >= k) {
      ++out.dropped_trailing;
      continue;
    }
    edges[static_cast<std::size_t>(t)].push_back({e->source, e->target});
  }
  if (out.dropped_trailing)
    out.warnings.push_back(std::to_string(out.dropped_trailing) + " events fall after the last window and were dropped");

  s.snapshots.reserve(static_cast<std::size_t>(k));
  s.snapshots.emplace_back(edges[0]);
  const auto& g0 = s.snapshots.front();
  for (std::size_t t = 1; t < edges.size(); ++t) {
    std::vector<Edge> inside;
    for (const auto& e : edges[t]) {
      if (g0.contains(e.u) && g0.contains(e.v))
        inside.push_back(e);
      else
        ++out.dropped_emerging;
    }
    s.snapshots.emplace_back(inside);
  }
  if (out.dropped_emerging)
    out.warnings.push_back(std::to_string(out.dropped_emerging) +
                           " later events involve core members absent from G_0 and were ignored");
  s.core_nodes = g0.nodes();
  s.last_activity = compute_last_activity(s.snapshots);
  s.alive = alive_nodes(s.last_activity, k);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: meta.json, snapshot_<t>.csv, tau.csv.

inline void save_series(const SnapshotSeries& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["k"] = s.k();
  meta["window"] = s.window;
  meta["start"] = s.start;
  meta["core_size"] = s.core_nodes.size();
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
  for (int t = 0; t < s.k(); ++t) {
    std::ofstream os(dir / ("snapshot_" + std::to_string(t) + ".csv"));
    os << "u,v\n";
    for (const auto& e : s.snapshots[static_cast<std::size_t>(t)].edges()) os << e.u << ',' << e.v << '\n';
  }
  std::ofstream os(dir / "tau.csv");
  os << "node,tau\n";
  for (const auto& [v, t] : s.last_activity) os << v << ',' << t << '\n';
}

inline SnapshotSeries load_series(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw MissingStageError("no snapshot series at " + dir.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& ex) {
    throw InputError("bad meta.json in " + dir.string() + ": " + ex.what());
  }
  SnapshotSeries s;
  const int k = meta.at("k").get<int>();
  s.window = meta.at("window").get<std::int64_t>();
  s.start = meta.at("start").get<std::int64_t>();

  auto read_pairs = [&](const std::filesystem::path& file, auto&& on_pair) {
    std::ifstream in(file);
    if (!in) throw InputError("missing " + file.string());
    std::string line;
    std::getline(in, line);  // header
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto cells = split_csv_line(line);
      std::int64_t a = 0, b = 0;
      if (cells.size() != 2 || !parse_number(cells[0], a) || !parse_number(cells[1], b))
        throw InputError(file.string() + ":" + std::to_string(line_no) + ": malformed row");
      on_pair(a, b);
    }
  };

  std::map<NodeId, int> tau;
  read_pairs(dir / "tau.csv", [&](std::int64_t v, std::int64_t t) { tau[v] = static_cast<int>(t); });
  std::vector<NodeId> universe;
  for (const auto& [v, t] : tau) universe.push_back(v);
  for (int t = 0; t < k; ++t) {
    std::vector<Edge> edges;
    read_pairs(dir / ("snapshot_" + std::to_string(t) + ".csv"),
               [&](std::int64_t a, std::int64_t b) { edges.push_back({a, b}); });
    s.snapshots.emplace_back(t == 0 ? universe : std::vector<NodeId>{}, edges);
  }
  s.core_nodes = s.snapshots.front().nodes();
  s.last_activity = std::move(tau);
  s.alive = alive_nodes(s.last_activity, k);
  if (meta.at("core_size").get<std::size_t>() != s.core_nodes.size())
    throw InputError("meta.json core_size disagrees with tau.csv in " + dir.string());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic decay with planted cascades.

struct PlantedSpec {
  NodeId root = 0;
  int children = 1;  // children per node at every level
  int depth = 1;     // number of levels below the root
};

/// A planted tree. Node ids are allocated breadth-first from `root`
/// upwards; level l gets tau = l + 1.
struct PlantedTree {
  NodeId root = 0;
  std::vector<NodeId> nodes;  // sorted
  std::vector<Edge> edges;    // (parent, child)
  std::map<NodeId, int> level;
};

struct SynthSpec {
  std::size_t n = 100;
  double p_edge = 0.0;
  std::vector<PlantedSpec> planted;
  int k = 8;
  std::uint64_t seed = 1;
};

struct SynthResult {
  SnapshotSeries series;
  std::vector<PlantedTree> planted;
};

inline PlantedTree expand_planted(const PlantedSpec& p) {
  if (p.children < 0 || p.depth < 0) throw UsageError("planted tree needs non-negative children and depth");
  PlantedTree tree;
  tree.root = p.root;
  std::vector<NodeId> frontier{p.root};
  NodeId next = p.root + 1;
  tree.level[p.root] = 0;
  for (int l = 1; l <= p.depth; ++l) {
    std::vector<NodeId> level;
    for (auto parent : frontier)
      for (int c = 0; c < p.children; ++c) {
        tree.edges.push_back({parent, next});
        tree.level[next] = l;
        level.push_back(next++);
      }
    frontier = std::move(level);
  }
  for (const auto& [v, l] : tree.level) tree.nodes.push_back(v);
  return tree;
}

/// Random G_0 (each pair present with probability p_edge) with planted tree
/// edges forced in. Planted level-l nodes get tau = l + 1, every other node
/// tau = k - 1. Later snapshots keep the G_0 edges among nodes still active
/// and tie any node left without an edge at its own tau to the lowest-id
/// surviving node, so every tau is witnessed.
inline SynthResult generate_synthetic_decay(const SynthSpec& spec) {
  if (spec.k < 2) throw UsageError("k must be at least 2");
  if (spec.p_edge < 0.0 || spec.p_edge > 1.0) throw UsageError("p_edge must lie in [0, 1]");
  SynthResult out;
  std::map<NodeId, int> tau;
  std::vector<Edge> planted_edges;
  for (const auto& p : spec.planted) {
    if (p.depth + 1 > spec.k - 2)
      throw UsageError("planted depth " + std::to_string(p.depth) + " needs k >= " + std::to_string(p.depth + 3));
    auto tree = expand_planted(p);
    for (auto v : tree.nodes) {
      if (v < 0 || v >= static_cast<NodeId>(spec.n))
        throw UsageError("planted tree rooted at " + std::to_string(p.root) + " does not fit in " +
                         std::to_string(spec.n) + " nodes");
      if (!tau.emplace(v, tree.level.at(v) + 1).second)
        throw UsageError("planted trees share node " + std::to_string(v));
    }
    planted_edges.insert(planted_edges.end(), tree.edges.begin(), tree.edges.end());
    out.planted.push_back(std::move(tree));
  }
  if (spec.n < tau.size() + 2) throw UsageError("synthetic series needs at least two unplanted nodes");

  std::vector<NodeId> nodes(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    nodes[i] = static_cast<NodeId>(i);
    tau.emplace(static_cast<NodeId>(i), spec.k - 1);
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> g0_edges = planted_edges;
  if (spec.p_edge > 0.0)
    for (std::size_t a = 0; a < spec.n; ++a)
      for (std::size_t b = a + 1; b < spec.n; ++b)
        if (unit(rng) < spec.p_edge) g0_edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});

  auto& s = out.series;
  s.window = 1;
  s.start = 0;
  s.snapshots.reserve(static_cast<std::size_t>(spec.k));
  s.snapshots.emplace_back(nodes, g0_edges);
  const auto& g0 = s.snapshots.front();

  const auto alive = alive_nodes(tau, spec.k);
  const NodeId anchor = alive[0];
  const NodeId anchor_partner = alive[1];
  for (int t = 1; t < spec.k; ++t) {
    std::vector<Edge> edges;
    for (const auto& e : g0.edges())
      if (tau.at(e.u) >= t && tau.at(e.v) >= t) edges.push_back(e);
    std::set<NodeId> touched;
    for (const auto& e : edges) {
      touched.insert(e.u);
      touched.insert(e.v);
    }
    for (const auto& [v, tv] : tau) {
      if (tv != t || touched.count(v)) continue;
      const NodeId other = v == anchor ? anchor_partner : anchor;
      edges.push_back({v, other});
      touched.insert(v);
      touched.insert(other);
    }
    s.snapshots.emplace_back(edges);
  }
  s.core_nodes = g0.nodes();
  s.last_activity = std::move(tau);
  s.alive = alive_nodes(s.last_activity, spec.k);
  return out;
}

}  // namespace decaynet
