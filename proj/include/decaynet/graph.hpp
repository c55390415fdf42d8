#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decaynet/error.hpp"

namespace decaynet {

using NodeId = std::int64_t;

struct Edge {
  NodeId u;
  NodeId v;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Undirected simple graph over an explicit node set. Nodes are kept sorted by
// id, so a node's dense index orders the same way as its id; adjacency lists
// hold dense indices in ascending order.
class StaticGraph {
 public:
  StaticGraph() = default;

  // Self-loops are dropped and parallel edges collapse. Edge endpoints that are
  // missing from `nodes` are added.
  StaticGraph(std::vector<NodeId> nodes, const std::vector<Edge>& edges) {
    for (const auto& e : edges) {
      nodes.push_back(e.u);
      nodes.push_back(e.v);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    ids_ = std::move(nodes);
    adj_.assign(ids_.size(), {});
    for (const auto& e : edges) {
      if (e.u == e.v) continue;
      const auto a = *index_of(e.u);
      const auto b = *index_of(e.v);
      adj_[a].push_back(b);
      adj_[b].push_back(a);
    }
    edge_count_ = 0;
    for (auto& list : adj_) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
      edge_count_ += list.size();
    }
    edge_count_ /= 2;
  }

  explicit StaticGraph(const std::vector<Edge>& edges) : StaticGraph(std::vector<NodeId>{}, edges) {}

  std::size_t node_count() const noexcept { return ids_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const std::vector<NodeId>& nodes() const noexcept { return ids_; }
  NodeId id_at(std::size_t index) const { return ids_[index]; }

  std::span<const std::size_t> neighbors(std::size_t index) const { return adj_[index]; }
  std::size_t degree(std::size_t index) const { return adj_[index].size(); }

  bool contains(NodeId id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

  // Dense index of `id`, or nothing when the node is absent.
  std::optional<std::size_t> index_of(NodeId id) const {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
  }

  std::size_t require_index(NodeId id) const {
    if (auto i = index_of(id)) return *i;
    throw InputError("node " + std::to_string(id) + " is not in the graph");
  }

  bool has_edge_index(std::size_t a, std::size_t b) const {
    const auto& list = adj_[a];
    return std::binary_search(list.begin(), list.end(), b);
  }

  bool has_edge(NodeId u, NodeId v) const {
    const auto a = index_of(u);
    const auto b = index_of(v);
    return a && b && has_edge_index(*a, *b);
  }

  // Edges as (smaller id, larger id), sorted.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count_);
    for (std::size_t a = 0; a < adj_.size(); ++a)
      for (auto b : adj_[a])
        if (a < b) out.push_back({ids_[a], ids_[b]});
    return out;
  }

 private:
  std::vector<NodeId> ids_;
  std::vector<std::vector<std::size_t>> adj_;
  std::size_t edge_count_ = 0;
};

}  // namespace decaynet
