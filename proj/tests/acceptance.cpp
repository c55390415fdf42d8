// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "decaynet/workspace.hpp"
#include "oracles.hpp"

using namespace decaynet;

namespace {

struct Check {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SnapshotSeries series_over(const StaticGraph& g0, const std::map<NodeId, int>& tau, int k) {
  SnapshotSeries s;
  s.window = 1;
  s.snapshots.push_back(g0);
  for (int t = 1; t < k; ++t) {
    std::vector<Edge> edges;
    for (const auto& e : g0.edges())
      if (tau.at(e.u) >= t && tau.at(e.v) >= t) edges.push_back(e);
    s.snapshots.emplace_back(edges);
  }
  s.core_nodes = g0.nodes();
  s.last_activity = tau;
  s.alive = alive_nodes(tau, k);
  return s;
}

CascadeTree tree_of(NodeId root, std::vector<Edge> edges, std::map<NodeId, int> tau = {}) {
  CascadeTree t;
  t.root = root;
  std::set<NodeId> nodes{root};
  for (const auto& e : edges) {
    nodes.insert(e.u);
    nodes.insert(e.v);
  }
  t.nodes.assign(nodes.begin(), nodes.end());
  t.edges = std::move(edges);
  for (auto v : t.nodes) t.tau_of[v] = tau.count(v) ? tau.at(v) : 1;
  return t;
}

std::set<Edge> edge_set(const std::vector<Edge>& e) { return {e.begin(), e.end()}; }

Check planted_recovery() {
  Check c;
  SynthSpec spec;
  spec.n = 400;
  spec.k = 8;
  spec.seed = 2;
  const std::vector<std::pair<int, int>> shapes{{2, 3}, {3, 2}, {1, 5}, {4, 1}, {2, 2},
                                                {1, 1}, {3, 1}, {2, 1}, {1, 4}, {0, 0}};
  NodeId next = 0;
  for (auto [children, depth] : shapes) {
    PlantedSpec p{next, children, depth};
    const auto size = expand_planted(p).nodes.size();
    c.expect(size <= 15, "planted tree larger than 15 nodes");
    next += static_cast<NodeId>(size) + 3;
    spec.planted.push_back(p);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto synth = generate_synthetic_decay(spec);
  const auto trees = extract_cascades(synth.series.initial(), synth.series);
  const double secs = seconds_since(t0);
  c.expect(trees.size() == 10, "expected 10 cascades, got " + std::to_string(trees.size()));
  if (!c.ok) return c;
  std::map<NodeId, const PlantedTree*> by_root;
  for (const auto& p : synth.planted) by_root[p.root] = &p;
  for (const auto& t : trees) {
    const auto it = by_root.find(t.root);
    c.expect(it != by_root.end(), "unexpected root " + std::to_string(t.root));
    if (it == by_root.end()) continue;
    c.expect(t.nodes == it->second->nodes, "node set differs at root " + std::to_string(t.root));
    c.expect(edge_set(t.edges) == edge_set(it->second->edges), "edges differ at root " + std::to_string(t.root));
  }
  c.expect(secs < 1.0, "took " + std::to_string(secs) + " s");
  return c;
}

Check hand_traces() {
  Check c;
  const std::map<NodeId, int> tau{{1, 1}, {2, 2}, {3, 3}};
  StaticGraph path({{1, 2}, {2, 3}});
  auto trees = extract_cascades(path, series_over(path, tau, 6));
  c.expect(trees.size() == 1 && trees[0].root == 1 && edge_set(trees[0].edges) == std::set<Edge>{{1, 2}, {2, 3}},
           "path-of-3 is not the chain 1-2-3");

  StaticGraph tri({{1, 2}, {2, 3}, {1, 3}});
  trees = extract_cascades(tri, series_over(tri, tau, 6));
  c.expect(trees.size() == 1 && edge_set(trees[0].edges) == std::set<Edge>{{1, 2}, {1, 3}},
           "triangle did not break into a star at the root");

  StaticGraph iso({{1, 3}, {2, 3}, {3, 4}});
  trees = extract_cascades(iso, series_over(iso, {{1, 1}, {2, 1}, {3, 4}, {4, 4}}, 5));
  c.expect(trees.size() == 2 && trees[0].size() == 1 && trees[1].size() == 1 && trees[0].root == 1 &&
               trees[1].root == 2,
           "isolated initiators are not two singletons");
  return c;
}

Check virality_oracle() {
  Check c;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 11;
    oracle::Matrix m(n);
    std::vector<Edge> edges;
    for (std::size_t v = 1; v < n; ++v) {
      const auto p = rng() % v;
      m.add(p, v);
      edges.push_back({static_cast<NodeId>(p), static_cast<NodeId>(v)});
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) sum += oracle::distance(m, i, j);
    const double expect = sum / static_cast<double>(n * (n - 1));
    c.expect(std::abs(cascade_virality(tree_of(0, edges)) - expect) <= 1e-12,
             "random tree " + std::to_string(trial) + " disagrees");
  }
  for (int n = 2; n <= 10; ++n) {
    std::vector<Edge> edges;
    for (int i = 1; i < n; ++i) edges.push_back({i - 1, i});
    c.expect(std::abs(cascade_virality(tree_of(0, edges)) - (n + 1) / 3.0) <= 1e-12,
             "path of " + std::to_string(n) + " is not (n+1)/3");
  }
  return c;
}

Check measure_oracles() {
  Check c;
  std::mt19937_64 rng(99);
  int graphs = 0;
  while (graphs < 50) {
    const std::size_t n = 2 + rng() % 9;
    // Sparse to moderate density keeps exhaustive cut enumeration tractable.
    const double p = 0.15 + 0.35 * static_cast<double>(rng() % 1000) / 1000.0;
    const auto m = oracle::random_graph(n, p, rng);
    if (m.edges().empty()) continue;
    ++graphs;
    std::vector<NodeId> nodes(n);
    for (std::size_t i = 0; i < n; ++i) nodes[i] = static_cast<NodeId>(i);
    std::vector<Edge> edges;
    for (auto [a, b] : m.edges()) edges.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
    const StaticGraph g(nodes, edges);
    const std::string tag = "graph " + std::to_string(graphs);

    const auto bw = betweenness_centrality(g);
    const auto obw = oracle::betweenness(m);
    const auto core = k_core_decomposition(g);
    const auto ocore = oracle::coreness(m);
    const auto cuts = all_pairs_min_cut(g);
    for (std::size_t v = 0; v < n; ++v) {
      c.expect(std::abs(bw[v] - obw[v]) <= 1e-12, tag + ": betweenness");
      c.expect(core[v] == ocore[v], tag + ": coreness");
      int ecc = 0;
      for (std::size_t t = 0; t < n; ++t) ecc = std::max(ecc, oracle::distance(m, v, t));
      c.expect(eccentricity(g, static_cast<NodeId>(v)) == ecc, tag + ": eccentricity");
      for (std::size_t t = v + 1; t < n; ++t) c.expect(cuts[v][t] == oracle::min_cut(m, v, t), tag + ": min cut");
    }
    const auto oeb = oracle::edge_betweenness(m);
    for (const auto& [e, val] : edge_betweenness(g))
      c.expect(std::abs(val - oeb[static_cast<std::size_t>(e.u)][static_cast<std::size_t>(e.v)]) <= 1e-12,
               tag + ": edge betweenness");
    c.expect(eigenvector_centrality_detail(g).residual < 1e-9, tag + ": eigenvector residual");
  }
  return c;
}

Check stats_fixtures() {
  Check c;
  const EmpiricalSample a(std::vector<double>{1, 2, 3, 4, 5});
  const auto same = ks_two_sample(a, a);
  c.expect(same.statistic == 0.0 && same.p_value == 1.0, "identical samples");
  const auto apart = ks_two_sample(a, EmpiricalSample(std::vector<double>{10, 11, 12}));
  c.expect(apart.statistic == 1.0, "disjoint samples");
  c.expect(js_divergence({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}) == 0.0, "JS(P,P)");
  c.expect(std::abs(js_divergence({1, 0}, {0, 1}) - 1.0) < 1e-12, "JS of disjoint points");
  c.expect(std::abs(js_divergence({0.5, 0.5}, {1, 0}) - 0.3113) < 1e-4, "JS((.5,.5),(1,0))");
  for (std::size_t n = 1; n <= 64; ++n)
    c.expect(std::abs(shannon_entropy(std::vector<double>(n, 1.0 / static_cast<double>(n))) -
                      std::log2(static_cast<double>(n))) < 1e-12,
             "uniform entropy");
  return c;
}

Check metric_fixtures() {
  Check c;
  c.expect(cascade_duration(tree_of(1, {{1, 2}}, {{1, 1}, {2, 2}}), 10) == 0.1, "duration 0.1");
  c.expect(cascade_duration(tree_of(1, {{1, 2}, {1, 3}}, {{1, 1}, {2, 2}, {3, 3}}), 10) == 0.15, "duration 0.15");
  c.expect(cascade_duration(tree_of(1, {{1, 2}, {1, 3}}, {{1, 1}, {2, 1}, {3, 1}}), 10) == 0.0, "duration 0");
  const auto seven = tree_of(1, {{1, 2}, {1, 3}, {2, 4}, {2, 5}, {3, 6}, {6, 7}});
  c.expect(cascade_similarity(seven, seven) == 1.0, "self similarity");
  c.expect(cascade_similarity(tree_of(1, {{1, 2}}), tree_of(3, {{3, 4}})) == 0.0, "disjoint similarity");
  c.expect(std::abs(cascade_similarity(tree_of(1, {{1, 2}, {1, 3}}), tree_of(1, {{1, 2}, {1, 4}})) - 2.0 / 3.0) <
               1e-15,
           "similarity 2/3");

  std::mt19937_64 rng(8);
  std::vector<CascadeTree> trees;
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t n = 1 + rng() % 9;
    const auto off = static_cast<NodeId>(rng() % 6);
    std::vector<Edge> edges;
    for (std::size_t v = 1; v < n; ++v)
      edges.push_back({off + static_cast<NodeId>(rng() % v), off + static_cast<NodeId>(v)});
    trees.push_back(tree_of(off, edges));
    trees.back().id = i;
  }
  const auto sm = similarity_matrix(trees, 4);
  for (std::size_t r = 0; r < trees.size(); ++r) {
    c.expect(sm.values[r][r] == 1.0, "diagonal");
    for (std::size_t col = 0; col < trees.size(); ++col) c.expect(sm.values[r][col] == sm.values[col][r], "symmetry");
  }
  return c;
}

Check prediction_sanity() {
  Check c;
  const auto names = feature_names();
  const auto idx = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> deg(1, 30);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> noise(0.0, 2.0);
  Dataset d;
  d.feature_names = names;
  for (std::size_t i = 0; i < 1000; ++i) {
    NodeMeasures m;
    m.degree = static_cast<std::size_t>(deg(rng));
    m.coreness = 1 + static_cast<int>(u(rng) * static_cast<double>(m.degree));
    m.betweenness = u(rng) * 50;
    m.closeness = u(rng);
    m.eccentricity = 1 + static_cast<int>(u(rng) * 6);
    m.avg_min_cut = u(rng) * 5;
    m.eigenvector = u(rng);
    m.incident_edge_betweenness = u(rng) * 20;
    m.avg_neighbor_degree = u(rng) * 10;
    const double signal = static_cast<double>(m.degree) + m.coreness;
    const double size = std::max(1.0, std::round(2.0 + 1.5 * signal + noise(rng)));
    d.rows.push_back({feature_vector(m), size, i, "synthetic", false});
  }
  ExperimentConfig cfg;  // 100 runs, 75/25 split, 100 trees of depth 3
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_experiment(d, cfg);
  const double secs = seconds_since(t0);
  c.expect(rep.runs.size() == 100, "run count");
  c.expect(rep.mean_mae_model <= 0.8 * rep.mean_mae_baseline,
           "improvement only " + std::to_string(rep.improvement * 100) + "%");
  double total = 0.0;
  for (double w : rep.importance.weights) total += w;
  c.expect(std::abs(total - 1.0) <= 1e-9, "importance does not sum to 1");
  const double signal_share = rep.importance.weights[idx("degree")] + rep.importance.weights[idx("coreness")];
  c.expect(signal_share > 0.7, "signal features hold only " + std::to_string(signal_share));
  c.expect(secs < 60.0, "took " + std::to_string(secs) + " s");

  auto flat = d;
  for (auto& r : flat.rows) r.target = 5.0;
  ExperimentConfig small;
  small.runs = 10;
  const auto frep = run_experiment(flat, small);
  c.expect(frep.mean_mae_model == 0.0 && frep.mean_mae_baseline == 0.0, "constant target MAE is not 0");
  std::cout << "  prediction: model MAE " << rep.mean_mae_model << ", baseline MAE " << rep.mean_mae_baseline
            << ", improvement " << rep.improvement * 100 << "%, signal importance " << signal_share << ", " << secs
            << " s\n";
  return c;
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    out[fs::relative(e.path(), root).generic_string()] = os.str();
  }
  return out;
}

Check pipeline_determinism() {
  Check c;
  const auto base = fs::temp_directory_path() / ("decaynet_accept_" + std::to_string(::getpid()));
  fs::remove_all(base);
  RunConfig cfg;
  cfg.k = 8;
  cfg.seed = 17;
  cfg.runs = 20;
  std::vector<std::map<std::string, std::string>> trees;
  for (const auto* name : {"one", "two"}) {
    const auto root = base / name;
    stage_synth(root, "decayed", {300, 0.02, parse_planted("0:2:3;30:3:2;60:1:5;80:2:2")}, cfg);
    stage_synth(root, "steady", {300, 0.01, parse_planted("0:1:2;10:4:1;20:2:2")}, cfg);
    for (const auto* s : {"decayed", "steady"}) {
      stage_cascades(root, s, cfg);
      stage_metrics(root, s, cfg);
    }
    for (const auto* metric : {"size", "duration", "virality_norm"})
      stage_compare(root, {"decayed", "steady"}, metric, {"decayed"}, {"steady"}, cfg);
    stage_predict(root, {"decayed", "steady"}, "size", cfg);
    stage_predict(root, {"decayed", "steady"}, "virality", cfg);
    stage_report(root, {}, cfg);
    trees.push_back(snapshot_tree(root));
  }
  fs::remove_all(base);
  std::size_t reports = 0;
  for (const auto& [rel, body] : trees[0]) {
    if (rel.ends_with(".csv") || rel.ends_with(".json")) ++reports;
    const auto it = trees[1].find(rel);
    c.expect(it != trees[1].end() && it->second == body, rel + " differs");
  }
  c.expect(trees[0].size() == trees[1].size(), "file sets differ");
  c.expect(reports > 30, "too few reports written");
  return c;
}

Check monotonicity() {
  Check c;
  c.expect(classify_monotonicity(std::vector<int>{1, 2, 3}) == Monotonicity::Increasing, "(1,2,3)");
  c.expect(classify_monotonicity(std::vector<int>{3, 2, 1}) == Monotonicity::Decreasing, "(3,2,1)");
  c.expect(classify_monotonicity(std::vector<int>{2, 2, 2}) == Monotonicity::NonMonotone, "(2,2,2)");
  c.expect(classify_monotonicity(std::vector<int>{1, 3, 2}) == Monotonicity::NonMonotone, "(1,3,2)");

  std::mt19937_64 rng(31);
  CorenessMap core;
  for (NodeId v = 0; v < 60; ++v) core[v] = static_cast<int>(rng() % 5);
  std::vector<CascadeTree> trees;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<Edge> edges;
    for (std::size_t v = 1; v < n; ++v) edges.push_back({static_cast<NodeId>(rng() % v), static_cast<NodeId>(v)});
    trees.push_back(tree_of(0, edges));
  }
  const auto p = monotonicity_profile(trees, core);
  const double sum = p.increasing_fraction() + p.decreasing_fraction() + p.nonmonotone_fraction();
  c.expect(std::abs(sum - 1.0) < 1e-12, "profile fractions do not sum to 1");
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"1 planted-cascade recovery", planted_recovery},
      {"2 extraction hand traces", hand_traces},
      {"3 virality oracle", virality_oracle},
      {"4 measure oracles", measure_oracles},
      {"5 statistics fixtures", stats_fixtures},
      {"6 duration and similarity fixtures", metric_fixtures},
      {"7 prediction sanity", prediction_sanity},
      {"8 pipeline determinism", pipeline_determinism},
      {"9 monotonicity classification", monotonicity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c = run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.why = std::string("exception: ") + e.what();
    }
    std::cout << (c.ok ? "PASS " : "FAIL ") << name;
    if (!c.ok) std::cout << " (" << c.why << ")";
    std::cout << " [" << seconds_since(t0) << " s]\n";
    failed += !c.ok;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed ? 1 : 0;
}
