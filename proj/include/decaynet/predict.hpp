#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "decaynet/cascade.hpp"
#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"
#include "decaynet/gbr.hpp"
#include "decaynet/measures.hpp"
#include "decaynet/metrics.hpp"
#include "decaynet/parallel.hpp"

namespace decaynet {

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{"degree",       "betweenness", "closeness",
                                              "coreness",     "eccentricity", "avg_min_cut",
                                              "eigenvector",  "incident_edge_betweenness", "avg_neighbor_degree"};
  return names;
}

inline std::vector<double> feature_vector(const NodeMeasures& m) {
  return {static_cast<double>(m.degree), m.betweenness, m.closeness,
          static_cast<double>(m.coreness), static_cast<double>(m.eccentricity), m.avg_min_cut,
          m.eigenvector, m.incident_edge_betweenness, m.avg_neighbor_degree};
}

enum class Target { Size, Virality };
enum class FeatureSource { Initiator, CascadeMean };

inline Target parse_target(const std::string& s) {
  if (s == "size") return Target::Size;
  if (s == "virality") return Target::Virality;
  throw UsageError("unknown target '" + s + "' (size, virality)");
}
inline const char* to_string(Target t) { return t == Target::Size ? "size" : "virality"; }

inline FeatureSource parse_feature_source(const std::string& s) {
  if (s == "initiator") return FeatureSource::Initiator;
  if (s == "mean") return FeatureSource::CascadeMean;
  throw UsageError("unknown feature source '" + s + "' (initiator, mean)");
}
inline const char* to_string(FeatureSource f) { return f == FeatureSource::Initiator ? "initiator" : "mean"; }

struct DatasetRow {
  std::vector<double> features;
  double target = 0.0;
  std::size_t cascade_id = 0;
  std::string site;
  bool imputed = false;  // some measure was missing or non-finite and set to 0
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<DatasetRow> rows;

  std::size_t size() const noexcept { return rows.size(); }
  FeatureMatrix X() const {
    FeatureMatrix out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.features);
    return out;
  }
  std::vector<double> y() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.target);
    return out;
  }
};

/// One row per cascade. Features come from G_0 node measures of the
/// initiator, or their mean over the cascade's nodes. Size targets are raw;
/// virality targets are normalized over this cascade set.
inline Dataset assemble_dataset(const std::vector<CascadeTree>& trees, const std::vector<NodeMeasures>& measures,
                                Target target, const std::string& site = {},
                                FeatureSource source = FeatureSource::Initiator,
                                ViralityNorm norm = ViralityNorm::Sigmoid) {
  if (trees.empty()) throw InputError("dataset needs at least one cascade" + (site.empty() ? "" : " in " + site));
  std::map<NodeId, const NodeMeasures*> by_node;
  for (const auto& m : measures) by_node.emplace(m.node, &m);
  const std::size_t dim = feature_names().size();

  auto lookup = [&](NodeId v, bool& imputed) {
    const auto it = by_node.find(v);
    if (it == by_node.end()) {
      imputed = true;
      return std::vector<double>(dim, 0.0);
    }
    auto x = feature_vector(*it->second);
    for (auto& value : x)
      if (!std::isfinite(value)) {
        value = 0.0;
        imputed = true;
      }
    return x;
  };

  Dataset d;
  d.feature_names = feature_names();
  std::vector<double> virality;
  for (const auto& t : trees) {
    DatasetRow row;
    row.cascade_id = t.id;
    row.site = site;
    if (source == FeatureSource::Initiator) {
      row.features = lookup(t.root, row.imputed);
    } else {
      row.features.assign(dim, 0.0);
      for (auto v : t.nodes) {
        const auto x = lookup(v, row.imputed);
        for (std::size_t f = 0; f < dim; ++f) row.features[f] += x[f];
      }
      for (auto& value : row.features) value /= static_cast<double>(t.nodes.size());
    }
    row.target = static_cast<double>(t.size());
    virality.push_back(cascade_virality(t));
    d.rows.push_back(std::move(row));
  }
  if (target == Target::Virality) {
    const auto normed = normalize_virality(virality, norm);
    for (std::size_t i = 0; i < d.rows.size(); ++i) d.rows[i].target = normed[i];
  }
  return d;
}

inline Dataset concat_datasets(const std::vector<Dataset>& parts) {
  Dataset out;
  for (const auto& p : parts) {
    if (out.feature_names.empty()) out.feature_names = p.feature_names;
    else if (p.feature_names != out.feature_names) throw InputError("datasets disagree on feature names");
    out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
  }
  return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform random partition; round(fraction * n) rows go to training, kept
/// within [1, n-1].
inline std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
  const std::size_t n = d.size();
  if (n < 2) throw InputError("splitting needs at least two rows");
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
  std::sort(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());

  std::pair<Dataset, Dataset> out;
  out.first.feature_names = out.second.feature_names = d.feature_names;
  for (std::size_t k = 0; k < n; ++k) (k < n_train ? out.first : out.second).rows.push_back(d.rows[perm[k]]);
  return out;
}

enum class BaselineRule { Mean, Median, Constant };

inline const char* to_string(BaselineRule b) {
  switch (b) {
    case BaselineRule::Mean: return "mean";
    case BaselineRule::Median: return "median";
    case BaselineRule::Constant: return "constant";
  }
  return "mean";
}

inline double baseline_predict(std::vector<double> targets, BaselineRule rule, double constant = 0.0) {
  if (rule == BaselineRule::Constant) return constant;
  if (targets.empty()) throw InputError("baseline needs training targets");
  if (rule == BaselineRule::Mean) {
    double s = 0.0;
    for (double t : targets) s += t;
    return s / static_cast<double>(targets.size());
  }
  std::sort(targets.begin(), targets.end());
  const std::size_t n = targets.size();
  return n % 2 ? targets[n / 2] : 0.5 * (targets[n / 2 - 1] + targets[n / 2]);
}

// Keeps the j highest-weight features; equal weights favour the lower index.
inline std::vector<std::size_t> top_feature_indices(const std::vector<double>& weights, std::size_t j) {
  if (j == 0 || j > weights.size())
    throw UsageError("feature count must lie in [1, " + std::to_string(weights.size()) + "]");
  std::vector<std::size_t> idx(weights.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  idx.resize(j);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Dataset select_features(const Dataset& d, const std::vector<std::size_t>& keep) {
  Dataset out;
  for (auto f : keep) out.feature_names.push_back(d.feature_names.at(f));
  for (const auto& r : d.rows) {
    DatasetRow row = r;
    row.features.clear();
    for (auto f : keep) row.features.push_back(r.features.at(f));
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline Dataset select_top_features(const Dataset& d, const std::vector<double>& weights, std::size_t j = 5) {
  if (weights.size() != d.feature_names.size()) throw InputError("weight count does not match the feature count");
  return select_features(d, top_feature_indices(weights, j));
}

// ---------------------------------------------------------------------------
// Repeated train/test experiments.

struct ExperimentConfig {
  std::size_t runs = 100;
  double train_fraction = 0.75;
  GbrConfig gbr;
  std::uint64_t seed = 1;
  double baseline_constant = 0.0;
  std::size_t top_features = 0;  // 0 keeps every feature
  unsigned threads = 0;
};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double mae_model = 0.0;
  double mae_baseline = 0.0;
  BaselineRule baseline = BaselineRule::Mean;
};

struct ExperimentReport {
  std::vector<RunResult> runs;
  double mean_mae_model = 0.0, std_mae_model = 0.0;
  double mean_mae_baseline = 0.0, std_mae_baseline = 0.0;
  double improvement = 0.0;  // (baseline - model) / baseline on the means
  FeatureImportance importance;  // from the full-feature fit of run 0
  std::vector<std::string> used_features;
  bool importance_warning = false;
};

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}
}  // namespace detail

/// Per run: fresh split, GBR fit on train, test MAE for the model and for
/// the best of the mean, median and constant baselines.
inline ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw UsageError("experiment needs at least one run");
  cfg.gbr.validate();
  std::vector<std::uint64_t> seeds(cfg.runs);
  for (std::size_t r = 0; r < cfg.runs; ++r) seeds[r] = splitmix64(cfg.seed ^ splitmix64(r));

  ExperimentReport rep;
  {
    const auto [train, test] = split(data, cfg.train_fraction, seeds[0]);
    GbrConfig g = cfg.gbr;
    g.seed = seeds[0];
    const auto model = fit_gbr(train.X(), train.y(), g, train.feature_names);
    rep.importance = feature_importance(model);
    rep.importance_warning = rep.importance.uniform_fallback;
  }
  Dataset used = data;
  if (cfg.top_features > 0 && cfg.top_features < data.feature_names.size())
    used = select_top_features(data, rep.importance.weights, cfg.top_features);
  rep.used_features = used.feature_names;

  rep.runs.resize(cfg.runs);
  parallel_for(cfg.runs, cfg.threads, [&](std::size_t r) {
    const auto [train, test] = split(used, cfg.train_fraction, seeds[r]);
    GbrConfig g = cfg.gbr;
    g.seed = seeds[r];
    const auto model = fit_gbr(train.X(), train.y(), g, train.feature_names);
    const auto truth = test.y();
    RunResult res;
    res.run = r;
    res.seed = seeds[r];
    res.n_train = train.size();
    res.n_test = test.size();
    res.mae_model = mae(model.predict(test.X()), truth);
    res.mae_baseline = std::numeric_limits<double>::infinity();
    for (auto rule : {BaselineRule::Mean, BaselineRule::Median, BaselineRule::Constant}) {
      const double c = baseline_predict(train.y(), rule, cfg.baseline_constant);
      const double e = mae(std::vector<double>(truth.size(), c), truth);
      if (e < res.mae_baseline) {
        res.mae_baseline = e;
        res.baseline = rule;
      }
    }
    rep.runs[r] = res;
  });

  std::vector<double> model_mae, base_mae;
  for (const auto& r : rep.runs) {
    model_mae.push_back(r.mae_model);
    base_mae.push_back(r.mae_baseline);
  }
  std::tie(rep.mean_mae_model, rep.std_mae_model) = detail::mean_std(model_mae);
  std::tie(rep.mean_mae_baseline, rep.std_mae_baseline) = detail::mean_std(base_mae);
  rep.improvement =
      rep.mean_mae_baseline > 0.0 ? (rep.mean_mae_baseline - rep.mean_mae_model) / rep.mean_mae_baseline : 0.0;
  return rep;
}

inline nlohmann::ordered_json report_to_json(const ExperimentReport& rep) {
  nlohmann::ordered_json j;
  j["runs"] = rep.runs.size();
  j["mean_mae_model"] = rep.mean_mae_model;
  j["std_mae_model"] = rep.std_mae_model;
  j["mean_mae_baseline"] = rep.mean_mae_baseline;
  j["std_mae_baseline"] = rep.std_mae_baseline;
  j["improvement"] = rep.improvement;
  std::map<std::string, std::size_t> wins;
  for (const auto& r : rep.runs) ++wins[to_string(r.baseline)];
  j["baseline_wins"] = wins;
  auto imp = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rep.importance.names.size(); ++i)
    imp.push_back({{"feature", rep.importance.names[i]}, {"weight", rep.importance.weights[i]}});
  j["importance"] = std::move(imp);
  j["importance_uniform_fallback"] = rep.importance_warning;
  j["used_features"] = rep.used_features;
  return j;
}

inline void write_runs_csv(std::ostream& os, const ExperimentReport& rep) {
  os << "run,seed,n_train,n_test,mae_model,mae_baseline,baseline\n";
  for (const auto& r : rep.runs)
    write_csv_row(os, {fmt_num(r.run), std::to_string(r.seed), fmt_num(r.n_train), fmt_num(r.n_test),
                       fmt_num(r.mae_model), fmt_num(r.mae_baseline), to_string(r.baseline)});
}

}  // namespace decaynet
