#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decaynet/error.hpp"

namespace decaynet {

using FeatureMatrix = std::vector<std::vector<double>>;

/// Flat binary regression tree. A node with feature < 0 is a leaf.
struct RegressionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const std::vector<double>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
  std::size_t split_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature >= 0; }));
  }
};

struct GbrConfig {
  std::size_t n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  std::size_t min_samples_leaf = 1;
  double subsample = 1.0;  // fraction of rows per tree; 1 disables sampling
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw UsageError("learning rate must lie in (0, 1]");
    if (max_depth < 1) throw UsageError("max depth must be at least 1");
    if (min_samples_leaf < 1) throw UsageError("min samples per leaf must be at least 1");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw UsageError("subsample must lie in (0, 1]");
  }
};

struct GbrModel {
  double initial = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<std::string> feature_names;
  std::vector<double> split_gain;   // summed squared-error reduction per feature
  std::vector<double> train_loss;   // mean squared error after each tree

  double predict(const std::vector<double>& x) const {
    if (x.size() != feature_names.size())
      throw InputError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                       std::to_string(feature_names.size()));
    double f = 0.0;
    for (const auto& t : trees) f += t.predict(x);
    return initial + learning_rate * f;
  }
  std::vector<double> predict(const FeatureMatrix& X) const {
    std::vector<double> out;
    out.reserve(X.size());
    for (const auto& x : X) out.push_back(predict(x));
    return out;
  }
};

namespace detail {

class TreeBuilder {
 public:
  // `sorted` holds every row index ordered by each feature; rows outside the
  // current sample are skipped through the node marks.
  TreeBuilder(const FeatureMatrix& X, const std::vector<double>& r, const std::vector<std::vector<std::size_t>>& sorted,
              const GbrConfig& cfg, std::vector<double>& gain)
      : X_(X), r_(r), cfg_(cfg), gain_(gain), in_node_(X.size(), -1), sorted_(sorted) {}

  static std::vector<std::vector<std::size_t>> presort(const FeatureMatrix& X) {
    const std::size_t m = X.empty() ? 0 : X.front().size();
    std::vector<std::vector<std::size_t>> sorted(m, std::vector<std::size_t>(X.size()));
    for (std::size_t f = 0; f < m; ++f) {
      std::iota(sorted[f].begin(), sorted[f].end(), std::size_t{0});
      std::stable_sort(sorted[f].begin(), sorted[f].end(),
                       [&](std::size_t a, std::size_t b) { return X[a][f] < X[b][f]; });
    }
    return sorted;
  }

  RegressionTree build(const std::vector<std::size_t>& rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    for (auto i : rows) in_node_[i] = id;
    double sum = 0.0;
    for (auto i : rows) sum += r_[i];
    tree_.nodes[static_cast<std::size_t>(id)].value = sum / static_cast<double>(rows.size());
    if (depth >= cfg_.max_depth || rows.size() < 2 * cfg_.min_samples_leaf) return id;

    double raw_ss = 0.0;
    for (auto i : rows) raw_ss += r_[i] * r_[i];
    const Split s = best_split(id, rows.size(), sum, raw_ss);
    if (s.feature < 0) return id;
    gain_[static_cast<std::size_t>(s.feature)] += s.gain;

    std::vector<std::size_t> left, right;
    for (auto i : rows) (X_[i][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(i);
    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = rr;
    return id;
  }

  // Exhaustive scan over midpoints of distinct values. Strict improvement keeps
  // the lowest feature index and the smallest threshold on ties.
  Split best_split(int id, std::size_t n, double sum, double raw_ss) const {
    const double floor = 1e-12 * raw_ss;
    const double parent = sum * sum / static_cast<double>(n);
    Split best;
    std::vector<std::size_t> members;
    members.reserve(n);
    for (std::size_t f = 0; f < sorted_.size(); ++f) {
      members.clear();
      for (auto i : sorted_[f])
        if (in_node_[i] == id) members.push_back(i);
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < members.size(); ++k) {
        left_sum += r_[members[k]];
        const double a = X_[members[k]][f], b = X_[members[k + 1]][f];
        if (a == b) continue;
        const std::size_t nl = k + 1, nr = members.size() - nl;
        if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
        const double right_sum = sum - left_sum;
        const double g = left_sum * left_sum / static_cast<double>(nl) +
                         right_sum * right_sum / static_cast<double>(nr) - parent;
        if (g > floor && g > best.gain) {
          best.feature = static_cast<int>(f);
          best.threshold = a + (b - a) / 2.0;
          best.gain = g;
        }
      }
    }
    return best;
  }

  const FeatureMatrix& X_;
  const std::vector<double>& r_;
  const GbrConfig& cfg_;
  std::vector<double>& gain_;
  std::vector<int> in_node_;
  const std::vector<std::vector<std::size_t>>& sorted_;
  RegressionTree tree_;
};

inline void check_design(const FeatureMatrix& X, const std::vector<double>& y, std::size_t m) {
  if (X.empty()) throw InputError("training set is empty");
  if (X.size() != y.size()) throw InputError("feature rows and targets differ in count");
  for (const auto& row : X) {
    if (row.size() != m) throw InputError("feature rows differ in dimension");
    for (double v : row)
      if (!std::isfinite(v)) throw InputError("feature matrix contains a non-finite value");
  }
  for (double v : y)
    if (!std::isfinite(v)) throw InputError("targets contain a non-finite value");
}

}  // namespace detail

/// Least-squares gradient boosting: start from the target mean, then fit each
/// tree to the current residuals and add it scaled by the learning rate.
inline GbrModel fit_gbr(const FeatureMatrix& X, const std::vector<double>& y, const GbrConfig& cfg,
                        std::vector<std::string> feature_names = {}) {
  cfg.validate();
  const std::size_t m = X.empty() ? 0 : X.front().size();
  detail::check_design(X, y, m);
  if (feature_names.empty())
    for (std::size_t f = 0; f < m; ++f) feature_names.push_back("x" + std::to_string(f));
  if (feature_names.size() != m) throw InputError("feature name count does not match the feature dimension");

  const std::size_t n = X.size();
  GbrModel model;
  model.learning_rate = cfg.learning_rate;
  model.feature_names = std::move(feature_names);
  model.split_gain.assign(m, 0.0);
  model.initial = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> fitted(n, model.initial), resid(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  const auto sorted = detail::TreeBuilder::presort(X);
  const auto per_tree =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n))));

  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - fitted[i];
    std::vector<std::size_t> rows = all;
    if (per_tree < n) {
      for (std::size_t i = 0; i < per_tree; ++i) std::swap(rows[i], rows[i + rng() % (n - i)]);
      rows.resize(per_tree);
      std::sort(rows.begin(), rows.end());
    }
    detail::TreeBuilder builder(X, resid, sorted, cfg, model.split_gain);
    auto tree = builder.build(rows);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      fitted[i] += cfg.learning_rate * tree.predict(X[i]);
      loss += (y[i] - fitted[i]) * (y[i] - fitted[i]);
    }
    model.train_loss.push_back(loss / static_cast<double>(n));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline double mae(const std::vector<double>& predictions, const std::vector<double>& truths) {
  if (predictions.size() != truths.size()) throw InputError("MAE needs equally long vectors");
  if (predictions.empty()) throw InputError("MAE of an empty set");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - truths[i]);
  return s / static_cast<double>(predictions.size());
}

struct FeatureImportance {
  std::vector<std::string> names;
  std::vector<double> weights;  // sums to 1
  bool uniform_fallback = false;
};

/// Split gains normalized to sum 1. A model without splits gets uniform
/// weights and the fallback flag.
inline FeatureImportance feature_importance(const GbrModel& model) {
  FeatureImportance fi;
  fi.names = model.feature_names;
  const double total = std::accumulate(model.split_gain.begin(), model.split_gain.end(), 0.0);
  const std::size_t m = model.split_gain.size();
  if (m == 0) return fi;
  if (!(total > 0.0)) {
    fi.weights.assign(m, 1.0 / static_cast<double>(m));
    fi.uniform_fallback = true;
    return fi;
  }
  for (double g : model.split_gain) fi.weights.push_back(g / total);
  return fi;
}

// ---------------------------------------------------------------------------
// JSON: {initial, learning_rate, feature_names, trees: [{feature, threshold, left, right} | {leaf}]}

namespace detail {
inline nlohmann::ordered_json tree_to_json(const RegressionTree& t, int i) {
  const auto& n = t.nodes[static_cast<std::size_t>(i)];
  nlohmann::ordered_json j;
  if (n.feature < 0) {
    j["leaf"] = n.value;
    return j;
  }
  j["feature"] = n.feature;
  j["threshold"] = n.threshold;
  j["left"] = tree_to_json(t, n.left);
  j["right"] = tree_to_json(t, n.right);
  return j;
}

inline int tree_from_json(const nlohmann::json& j, RegressionTree& t) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (j.contains("leaf")) {
    t.nodes[static_cast<std::size_t>(id)].value = j.at("leaf").get<double>();
    return id;
  }
  const int feature = j.at("feature").get<int>();
  const double threshold = j.at("threshold").get<double>();
  const int l = tree_from_json(j.at("left"), t);
  const int r = tree_from_json(j.at("right"), t);
  auto& n = t.nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = l;
  n.right = r;
  return id;
}
}  // namespace detail

inline nlohmann::ordered_json model_to_json(const GbrModel& m) {
  nlohmann::ordered_json j;
  j["initial"] = m.initial;
  j["learning_rate"] = m.learning_rate;
  j["feature_names"] = m.feature_names;
  auto trees = nlohmann::ordered_json::array();
  for (const auto& t : m.trees) trees.push_back(detail::tree_to_json(t, 0));
  j["trees"] = std::move(trees);
  return j;
}

inline GbrModel model_from_json(const nlohmann::json& j) {
  try {
    GbrModel m;
    m.initial = j.at("initial").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& tj : j.at("trees")) {
      RegressionTree t;
      detail::tree_from_json(tj, t);
      for (const auto& n : t.nodes)
        if (n.feature >= static_cast<int>(m.feature_names.size())) throw InputError("split on unknown feature");
      m.trees.push_back(std::move(t));
    }
    m.split_gain.assign(m.feature_names.size(), 0.0);
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("malformed model JSON: ") + ex.what());
  }
}

}  // namespace decaynet
