#pragma once

// On-disk pipeline: one directory per site plus shared reports, tracked by a
// manifest of stage keys and output hashes so unchanged stages are skipped.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "decaynet/cascade.hpp"
#include "decaynet/csv.hpp"
#include "decaynet/error.hpp"
#include "decaynet/ingest.hpp"
#include "decaynet/measures.hpp"
#include "decaynet/metrics.hpp"
#include "decaynet/predict.hpp"
#include "decaynet/snapshots.hpp"
#include "decaynet/stats.hpp"

#ifndef DECAYNET_VERSION
#define DECAYNET_VERSION "0.0.0"
#endif

namespace decaynet {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration.

struct RunConfig {
  std::optional<std::int64_t> window;  // seconds; unset = span / k
  int k = 12;
  std::string core_mode = "auto";      // auto, reputation, activity
  std::optional<std::int64_t> core_threshold;
  bool include_alive = false;
  std::string initiators = "earliest";  // earliest, all-neighbors-active
  std::string virality_norm = "sigmoid";
  std::string degree_base = "tree";
  std::size_t bins = kDefaultHistogramBins;
  std::size_t gbr_trees = 100;
  double gbr_rate = 0.1;
  int gbr_depth = 3;
  double gbr_subsample = 1.0;
  std::size_t runs = 100;
  double train_fraction = 0.75;
  std::size_t top_features = 0;
  std::string features = "initiator";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::size_t min_cut_sample = 0;  // 0 = exact averages

  InitiatorMode initiator_mode() const {
    if (initiators == "earliest") return InitiatorMode::EarliestLevel;
    if (initiators == "all-neighbors-active") return InitiatorMode::AllNeighborsActive;
    throw UsageError("unknown initiator mode '" + initiators + "' (earliest, all-neighbors-active)");
  }

  void validate() const {
    if (k < 2) throw UsageError("k must be at least 2");
    if (window && *window <= 0) throw UsageError("window must be positive");
    if (core_mode != "auto" && core_mode != "reputation" && core_mode != "activity")
      throw UsageError("unknown core filter '" + core_mode + "' (auto, reputation, activity)");
    if (core_threshold && *core_threshold <= 0) throw UsageError("core threshold must be positive");
    initiator_mode();
    parse_virality_norm(virality_norm);
    parse_degree_base(degree_base);
    parse_feature_source(features);
    if (bins < 2) throw UsageError("bins must be at least 2");
    gbr_config().validate();
    if (runs < 1) throw UsageError("runs must be at least 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
    if (top_features > feature_names().size())
      throw UsageError("top features must not exceed " + std::to_string(feature_names().size()));
  }

  ExtractOptions extract_options() const { return {include_alive, initiator_mode()}; }
  MetricsConfig metrics_config() const { return {parse_virality_norm(virality_norm), parse_degree_base(degree_base)}; }
  MeasureConfig measure_config() const {
    MeasureConfig m;
    m.threads = threads;
    if (min_cut_sample) m.min_cut.sample_cap = min_cut_sample;
    m.min_cut.seed = seed;
    return m;
  }
  GbrConfig gbr_config() const {
    GbrConfig g;
    g.n_trees = gbr_trees;
    g.learning_rate = gbr_rate;
    g.max_depth = gbr_depth;
    g.subsample = gbr_subsample;
    g.seed = seed;
    return g;
  }
  ExperimentConfig experiment_config() const {
    ExperimentConfig e;
    e.runs = runs;
    e.train_fraction = train_fraction;
    e.gbr = gbr_config();
    e.seed = seed;
    e.top_features = top_features;
    e.threads = threads;
    return e;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["window"] = window ? nlohmann::ordered_json(*window) : nlohmann::ordered_json(nullptr);
    j["k"] = k;
    j["core_mode"] = core_mode;
    j["core_threshold"] = core_threshold ? nlohmann::ordered_json(*core_threshold) : nlohmann::ordered_json(nullptr);
    j["include_alive"] = include_alive;
    j["initiators"] = initiators;
    j["virality_norm"] = virality_norm;
    j["degree_base"] = degree_base;
    j["bins"] = bins;
    j["gbr_trees"] = gbr_trees;
    j["gbr_rate"] = gbr_rate;
    j["gbr_depth"] = gbr_depth;
    j["gbr_subsample"] = gbr_subsample;
    j["runs"] = runs;
    j["train_fraction"] = train_fraction;
    j["top_features"] = top_features;
    j["features"] = features;
    j["seed"] = seed;
    j["threads"] = threads;
    j["min_cut_sample"] = min_cut_sample;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Hashing.

class Fnv1a {
 public:
  Fnv1a& add(std::string_view s) {
    for (unsigned char c : s) {
      h_ ^= c;
      h_ *= 1099511628211ULL;
    }
    h_ ^= 0xff;  // field separator
    h_ *= 1099511628211ULL;
    return *this;
  }
  Fnv1a& add_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return add(buf.str());
  }
  std::string hex() const {
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h_));
    return out;
  }

 private:
  std::uint64_t h_ = 14695981039346656037ULL;
};

inline std::string hash_file(const fs::path& p) { return Fnv1a{}.add_file(p).hex(); }

// ---------------------------------------------------------------------------
// Workspace.

inline void check_site_name(const std::string& site) {
  if (site.empty() || site == "reports" || site.front() == '.' ||
      !std::all_of(site.begin(), site.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
      }))
    throw UsageError("invalid site name '" + site + "' (letters, digits, '_', '-', '.'; not 'reports')");
}

class WorkspaceLock {
 public:
  explicit WorkspaceLock(const fs::path& root) : path_(root / ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      if (errno == EEXIST)
        throw InputError("workspace " + root.string() + " is in use (remove " + path_.string() + " if stale)");
      throw InputError("cannot lock workspace " + root.string());
    }
  }
  ~WorkspaceLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    lock_.emplace(root_);
    const auto mf = root_ / "manifest.json";
    if (fs::exists(mf)) {
      std::ifstream in(mf);
      try {
        in >> manifest_;
      } catch (const nlohmann::json::exception& ex) {
        throw InputError("corrupt manifest " + mf.string() + ": " + ex.what());
      }
    } else {
      manifest_ = {{"tool", "decaynet"}, {"version", DECAYNET_VERSION}, {"scopes", nlohmann::json::object()}};
    }
  }

  const fs::path& root() const noexcept { return root_; }
  fs::path dir(const std::string& scope) const { return root_ / scope; }

  const nlohmann::json* entry(const std::string& scope, const std::string& stage) const {
    const auto& scopes = manifest_.at("scopes");
    if (!scopes.contains(scope) || !scopes.at(scope).contains(stage)) return nullptr;
    return &scopes.at(scope).at(stage);
  }

  // A stage is fresh when its key matches and every recorded output is intact.
  bool fresh(const std::string& scope, const std::string& stage, const std::string& key) const {
    const auto* e = entry(scope, stage);
    if (!e || e->at("key") != key) return false;
    for (const auto& [rel, h] : e->at("outputs").items()) {
      const auto p = root_ / rel;
      if (!fs::exists(p) || hash_file(p) != h.get<std::string>()) return false;
    }
    return true;
  }

  void require(const std::string& scope, const std::string& stage, const std::string& command) const {
    if (!entry(scope, stage))
      throw MissingStageError("site '" + scope + "' has no " + stage + " output; run `decaynet " + command +
                              "` first");
  }

  // Combined hash of a stage's outputs, for keying downstream stages.
  std::string output_digest(const std::string& scope, const std::string& stage) const {
    const auto* e = entry(scope, stage);
    if (!e) return "missing";
    Fnv1a h;
    for (const auto& [rel, digest] : e->at("outputs").items()) h.add(rel).add(digest.get<std::string>());
    return h.hex();
  }

  void record(const std::string& scope, const std::string& stage, const std::string& key,
              const std::vector<fs::path>& outputs, const nlohmann::ordered_json& config = nullptr) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& p : outputs) out[fs::relative(p, root_).generic_string()] = hash_file(p);
    manifest_["scopes"][scope][stage] = {{"key", key}, {"outputs", out}, {"config", nlohmann::json(config)}};
    save();
  }

  void forget(const std::string& scope, const std::string& stage) {
    auto& scopes = manifest_["scopes"];
    if (scopes.contains(scope)) scopes[scope].erase(stage);
    save();
  }

  std::vector<std::string> sites() const {
    std::vector<std::string> out;
    for (const auto& [scope, stages] : manifest_.at("scopes").items())
      if (scope != "reports" && stages.contains("series")) out.push_back(scope);
    return out;
  }

 private:
  void save() const {
    const auto tmp = root_ / "manifest.json.tmp";
    {
      std::ofstream os(tmp);
      os << manifest_.dump(2) << '\n';
    }
    fs::rename(tmp, root_ / "manifest.json");
  }

  fs::path root_;
  std::optional<WorkspaceLock> lock_;
  nlohmann::json manifest_;
};

struct StageResult {
  bool up_to_date = false;
  std::vector<std::string> lines;     // stdout
  std::vector<std::string> warnings;  // stderr
};

namespace detail {

inline std::vector<fs::path> files_in(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string iso_date(std::int64_t ts) {
  using namespace std::chrono;
  const sys_seconds t{seconds{ts}};
  const auto days = floor<std::chrono::days>(t);
  const year_month_day ymd{days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

inline void write_json(const fs::path& p, const nlohmann::ordered_json& j) { std::ofstream(p) << j.dump(2) << '\n'; }

inline nlohmann::ordered_json site_row(const std::string& site, const SnapshotSeries& s) {
  const auto& last = s.snapshots.back();
  nlohmann::ordered_json row;
  row["site"] = site;
  row["period_start"] = iso_date(s.start);
  row["period_end"] = iso_date(s.start + s.window * s.k() - 1);
  row["k"] = s.k();
  row["window"] = s.window;
  row["nodes_g0"] = s.initial().node_count();
  row["edges_g0"] = s.initial().edge_count();
  row["nodes_last"] = last.node_count();
  row["edges_last"] = last.edge_count();
  return row;
}

inline std::string site_line(const nlohmann::ordered_json& r) {
  std::ostringstream os;
  os << r["site"].get<std::string>() << ": period " << r["period_start"].get<std::string>() << ".."
     << r["period_end"].get<std::string>() << ", k=" << r["k"] << ", |V_G0|=" << r["nodes_g0"]
     << ", |E_G0|=" << r["edges_g0"] << ", |V_Gk-1|=" << r["nodes_last"] << ", |E_Gk-1|=" << r["edges_last"];
  return os.str();
}

inline StageResult store_series(Workspace& ws, const std::string& site, const std::string& key,
                                const SnapshotSeries& s, nlohmann::ordered_json summary,
                                const std::vector<std::pair<std::string, nlohmann::ordered_json>>& extra = {}) {
  const auto dir = ws.dir(site);
  fs::remove_all(dir / "series");
  fs::create_directories(dir);
  save_series(s, dir / "series");
  auto row = site_row(site, s);
  summary["site_summary"] = row;
  write_json(dir / "series.json", summary);
  std::vector<fs::path> outputs = files_in(dir / "series");
  outputs.push_back(dir / "series.json");
  for (const auto& [name, j] : extra) {
    write_json(dir / name, j);
    outputs.push_back(dir / name);
  }
  ws.record(site, "series", key, outputs, summary["config"]);
  return {false, {site_line(row)}, {}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages.

struct IngestInput {
  std::optional<fs::path> edges;     // source,target,timestamp[,kind]
  std::optional<fs::path> dump_dir;  // Posts.xml, Comments.xml, Users.xml[, Votes.xml]
};

inline StageResult stage_ingest(const fs::path& root, const std::string& site, const IngestInput& input,
                                const RunConfig& cfg) {
  check_site_name(site);
  cfg.validate();
  if (input.edges.has_value() == input.dump_dir.has_value())
    throw UsageError("ingest needs exactly one of --edges or --dump");

  StageResult res;
  Fnv1a key;
  key.add("ingest").add(std::to_string(cfg.k)).add(cfg.window ? std::to_string(*cfg.window) : "auto");
  std::vector<InteractionEvent> events;
  std::optional<std::map<NodeId, std::int64_t>> reputation;
  nlohmann::ordered_json summary;
  summary["source"] = input.edges ? "edge-list" : "stackexchange-dump";

  if (input.edges) {
    if (!fs::exists(*input.edges)) throw InputError("edge list " + input.edges->string() + " does not exist");
    key.add("edges").add_file(*input.edges);
    auto parsed = parse_edge_list(*input.edges);
    for (const auto& e : parsed.errors)
      res.warnings.push_back(input.edges->string() + ":" + std::to_string(e.line) + ": " + e.message);
    for (const auto& w : parsed.warnings) res.warnings.push_back(w);
    summary["rejected_lines"] = parsed.errors.size();
    if (parsed.events.empty()) throw InputError("edge list " + input.edges->string() + " holds no valid events");
    events = std::move(parsed.events);
  } else {
    DumpFiles files{*input.dump_dir / "Posts.xml", *input.dump_dir / "Comments.xml", *input.dump_dir / "Users.xml",
                    std::nullopt};
    if (fs::exists(*input.dump_dir / "Votes.xml")) files.votes = *input.dump_dir / "Votes.xml";
    for (const auto& p : {files.posts, files.comments, files.users})
      if (!fs::exists(p)) throw InputError("dump file " + p.string() + " does not exist");
    key.add("dump").add_file(files.posts).add_file(files.comments).add_file(files.users);
    if (files.votes) key.add_file(*files.votes);
    auto dump = parse_stackexchange_dump(files);
    const auto& c = dump.counters;
    summary["counters"] = {{"posts", c.posts},
                           {"comments", c.comments},
                           {"votes", c.votes},
                           {"users", c.users},
                           {"missing_owner", c.missing_owner},
                           {"missing_parent", c.missing_parent},
                           {"unknown_post_type", c.unknown_post_type},
                           {"bad_date", c.bad_date},
                           {"self_interactions", c.self_interactions},
                           {"votes_without_voter", c.votes_without_voter}};
    if (c.unknown_post_type) res.warnings.push_back(std::to_string(c.unknown_post_type) + " posts of unknown type skipped");
    if (c.bad_date) res.warnings.push_back(std::to_string(c.bad_date) + " rows with unparseable dates skipped");
    if (dump.events.empty()) throw InputError("dump in " + input.dump_dir->string() + " yields no interactions");
    events = std::move(dump.events);
    reputation = std::move(dump.reputation);
  }

  CoreFilterSpec core;
  const bool use_reputation =
      cfg.core_mode == "reputation" || (cfg.core_mode == "auto" && reputation.has_value());
  core.mode = use_reputation ? CoreFilterMode::ReputationThreshold : CoreFilterMode::ActivityCountThreshold;
  core.threshold = cfg.core_threshold.value_or(use_reputation ? 500 : 1);
  key.add(use_reputation ? "reputation" : "activity").add(std::to_string(core.threshold));
  const auto core_nodes = select_core_nodes(events, reputation ? &*reputation : nullptr, core);
  auto built = build_snapshots(std::move(events), core_nodes, cfg.window, cfg.k);
  for (const auto& w : built.warnings) res.warnings.push_back(w);

  Workspace ws(root);
  if (ws.fresh(site, "series", key.hex())) return {true, {"ingest " + site + ": up-to-date"}, res.warnings};
  summary["core_filter"] = {{"mode", use_reputation ? "reputation" : "activity"}, {"threshold", core.threshold}};
  summary["core_candidates"] = core_nodes.size();
  summary["dropped_trailing"] = built.dropped_trailing;
  summary["dropped_emerging"] = built.dropped_emerging;
  summary["config"] = cfg.to_json();
  auto out = detail::store_series(ws, site, key.hex(), built.series, summary);
  out.warnings = res.warnings;
  return out;
}

struct SynthInput {
  std::size_t n = 100;
  double p_edge = 0.0;
  std::vector<PlantedSpec> planted;
};

// "root:children:depth" items separated by ',' or ';'.
inline std::vector<PlantedSpec> parse_planted(const std::string& text) {
  std::vector<PlantedSpec> out;
  std::string item;
  std::istringstream in(text);
  auto take = [&](const std::string& s) {
    if (s.empty()) return;
    PlantedSpec p;
    const auto a = s.find(':'), b = s.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos || !parse_number(std::string_view(s).substr(0, a), p.root) ||
        !parse_number(std::string_view(s).substr(a + 1, b - a - 1), p.children) ||
        !parse_number(std::string_view(s).substr(b + 1), p.depth))
      throw UsageError("planted tree '" + s + "' is not root:children:depth");
    out.push_back(p);
  };
  for (char c : text) {
    if (c == ',' || c == ';') {
      take(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  take(item);
  return out;
}

inline StageResult stage_synth(const fs::path& root, const std::string& site, const SynthInput& input,
                               const RunConfig& cfg) {
  check_site_name(site);
  cfg.validate();
  SynthSpec spec;
  spec.n = input.n;
  spec.p_edge = input.p_edge;
  spec.planted = input.planted;
  spec.k = cfg.k;
  spec.seed = cfg.seed;
  auto synth = generate_synthetic_decay(spec);

  Fnv1a key;
  key.add("synth").add(std::to_string(spec.n)).add(fmt_num(spec.p_edge)).add(std::to_string(spec.k));
  key.add(std::to_string(spec.seed));
  for (const auto& p : spec.planted)
    key.add(std::to_string(p.root) + ":" + std::to_string(p.children) + ":" + std::to_string(p.depth));

  Workspace ws(root);
  if (ws.fresh(site, "series", key.hex())) return {true, {"synth " + site + ": up-to-date"}, {}};
  nlohmann::ordered_json summary;
  summary["source"] = "synthetic";
  summary["n"] = spec.n;
  summary["p_edge"] = spec.p_edge;
  summary["config"] = cfg.to_json();
  nlohmann::ordered_json planted = nlohmann::ordered_json::array();
  for (const auto& t : synth.planted) {
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : t.edges) edges.push_back({e.u, e.v});
    planted.push_back({{"root", t.root}, {"nodes", t.nodes}, {"edges", edges}});
  }
  auto out = detail::store_series(ws, site, key.hex(), synth.series, summary,
                                  {{"planted.json", nlohmann::ordered_json{{"trees", planted}}}});
  out.lines.push_back(site + ": " + std::to_string(synth.planted.size()) + " planted trees");
  return out;
}

inline StageResult stage_cascades(const fs::path& root, const std::string& site, const RunConfig& cfg) {
  check_site_name(site);
  cfg.validate();
  Workspace ws(root);
  ws.require(site, "series", "ingest --site " + site);
  Fnv1a key;
  key.add("cascades").add(ws.output_digest(site, "series")).add(cfg.include_alive ? "alive" : "no-alive");
  key.add(cfg.initiators);
  if (ws.fresh(site, "cascades", key.hex())) return {true, {"cascades " + site + ": up-to-date"}, {}};

  const auto dir = ws.dir(site);
  const auto series = load_series(dir / "series");
  const auto trees = extract_cascades(series.initial(), series, cfg.extract_options());
  {
    std::ofstream os(dir / "cascades.jsonl");
    write_cascades_jsonl(os, trees);
  }
  {
    std::ofstream os(dir / "cascades.dot");
    write_cascades_dot(os, trees, series.k());
  }
  ws.record(site, "cascades", key.hex(), {dir / "cascades.jsonl", dir / "cascades.dot"}, cfg.to_json());
  return {false, {site + ": |I| = " + std::to_string(trees.size()) + " cascades"}, {}};
}

namespace detail {

inline std::vector<CascadeTree> load_cascades(const fs::path& dir) {
  std::ifstream in(dir / "cascades.jsonl");
  if (!in) throw MissingStageError("no cascades at " + dir.string());
  return read_cascades_jsonl(in);
}

inline std::vector<NodeMeasures> ensure_measures(Workspace& ws, const std::string& site, const SnapshotSeries& s,
                                                 const RunConfig& cfg) {
  Fnv1a key;
  key.add("measures").add(ws.output_digest(site, "series")).add(std::to_string(cfg.min_cut_sample));
  key.add(cfg.min_cut_sample ? std::to_string(cfg.seed) : "exact");
  const auto path = ws.dir(site) / "measures.csv";
  if (ws.fresh(site, "measures", key.hex())) {
    std::ifstream in(path);
    return read_measures_csv(in);
  }
  const auto m = node_measures(s.initial(), cfg.measure_config());
  {
    std::ofstream os(path);
    write_measures_csv(os, m);
  }
  ws.record(site, "measures", key.hex(), {path}, cfg.to_json());
  return m;
}

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"size",         "size_fraction", "duration",
                                             "virality_raw", "virality_norm", "max_degree_norm"};
  return cols;
}

inline std::vector<double> metric_values(const std::vector<CascadeMetrics>& rows, const std::string& metric) {
  std::vector<double> out;
  for (const auto& m : rows) {
    if (metric == "size") out.push_back(static_cast<double>(m.size));
    else if (metric == "size_fraction") out.push_back(m.size_fraction);
    else if (metric == "duration") out.push_back(m.duration);
    else if (metric == "virality_raw") out.push_back(m.virality_raw);
    else if (metric == "virality_norm") out.push_back(m.virality_norm);
    else if (metric == "max_degree_norm") out.push_back(m.max_degree_norm);
    else throw UsageError("unknown metric '" + metric + "'");
  }
  return out;
}

// Reads one column of a site's metrics.csv.
inline std::vector<double> read_metric_column(const fs::path& file, const std::string& metric) {
  std::ifstream in(file);
  if (!in) throw MissingStageError("no metric table at " + file.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(trim(line));
  const auto it = std::find(header.begin(), header.end(), metric);
  if (it == header.end() || metric == "cascade_id" || metric == "site")
    throw UsageError("unknown metric '" + metric + "'");
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(trim(line));
    double v = 0;
    if (f.size() != header.size() || !parse_number(f[col], v)) throw InputError("malformed row in " + file.string());
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline StageResult stage_metrics(const fs::path& root, const std::string& site, const RunConfig& cfg) {
  check_site_name(site);
  cfg.validate();
  Workspace ws(root);
  ws.require(site, "series", "ingest --site " + site);
  ws.require(site, "cascades", "cascades --site " + site);
  const auto dir = ws.dir(site);
  const auto series = load_series(dir / "series");
  const auto measures = detail::ensure_measures(ws, site, series, cfg);

  Fnv1a key;
  key.add("metrics").add(ws.output_digest(site, "cascades")).add(ws.output_digest(site, "measures"));
  key.add(cfg.virality_norm).add(cfg.degree_base);
  if (ws.fresh(site, "metrics", key.hex())) return {true, {"metrics " + site + ": up-to-date"}, {}};

  const auto trees = detail::load_cascades(dir);
  const auto& g0 = series.initial();
  const auto rows = compute_metrics(trees, g0, series.k(), cfg.metrics_config());
  std::vector<fs::path> outputs;
  auto out = [&](const std::string& name) {
    outputs.push_back(dir / name);
    return std::ofstream(dir / name);
  };
  {
    auto os = out("metrics.csv");
    write_metrics_csv(os, rows, site);
  }
  {
    auto os = out("similarity.csv");
    if (trees.empty()) os << "cascade_id\n";
    else write_similarity_csv(os, similarity_matrix(trees, cfg.threads));
  }

  // Coreness monotonicity along root-to-leaf paths.
  const auto core = coreness_map(g0);
  nlohmann::ordered_json mono;
  {
    auto os = out("paths.csv");
    os << "cascade_id,path,nodes,coreness,class\n";
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& t : trees) {
      const auto paths = cascade_paths(t, &core);
      for (std::size_t i = 0; i < paths.size(); ++i) {
        std::string nodes, cores;
        for (std::size_t j = 0; j < paths[i].nodes.size(); ++j) {
          nodes += (j ? " " : "") + std::to_string(paths[i].nodes[j]);
          cores += (j ? " " : "") + std::to_string(paths[i].coreness_seq[j]);
        }
        const auto cls = classify_monotonicity(paths[i]);
        ++counts[static_cast<int>(cls)];
        write_csv_row(os, {fmt_num(t.id), fmt_num(i), nodes, cores, to_string(cls)});
      }
    }
    const std::size_t total = counts[0] + counts[1] + counts[2];
    auto frac = [&](std::size_t c) {
      return total ? nlohmann::ordered_json(static_cast<double>(c) / static_cast<double>(total))
                   : nlohmann::ordered_json(nullptr);
    };
    mono["paths"] = total;
    mono["increasing"] = frac(counts[0]);
    mono["decreasing"] = frac(counts[1]);
    mono["nonmonotone"] = frac(counts[2]);
  }

  // Initiators against every node of G_0.
  const auto split = initiator_coreness_split(g0, trees);
  std::vector<double> all_core = split.initiators;
  all_core.insert(all_core.end(), split.others.begin(), split.others.end());
  if (!all_core.empty()) {
    auto os = out("coreness_all.csv");
    write_distribution_csv(os, EmpiricalSample(all_core, "all"));
  }
  if (!split.initiators.empty()) {
    auto os = out("coreness_initiators.csv");
    write_distribution_csv(os, EmpiricalSample(split.initiators, "initiators"));
  }

  std::vector<EmpiricalSample> boxes;
  if (!rows.empty()) {
    for (const auto& m : detail::metric_columns()) {
      EmpiricalSample s(detail::metric_values(rows, m), m);
      auto os = out("dist_" + m + ".csv");
      write_distribution_csv(os, s);
      boxes.push_back(std::move(s));
    }
  }
  {
    auto os = out("boxplot.csv");
    write_boxplot_csv(os, boxes);
  }

  nlohmann::ordered_json summary;
  summary["site"] = site;
  summary["cascades"] = trees.size();
  summary["monotonicity"] = mono;
  if (!split.initiators.empty() && !split.others.empty()) {
    const auto ks = ks_two_sample(EmpiricalSample(split.initiators), EmpiricalSample(split.others));
    summary["initiator_coreness_ks"] = {{"statistic", ks.statistic}, {"p_value", ks.p_value}};
  }
  summary["config"] = cfg.to_json();
  detail::write_json(dir / "metrics_summary.json", summary);
  outputs.push_back(dir / "metrics_summary.json");
  ws.record(site, "metrics", key.hex(), outputs, cfg.to_json());
  return {false, {site + ": metrics for " + std::to_string(rows.size()) + " cascades, " +
                  std::to_string(mono["paths"].get<std::size_t>()) + " paths"}, {}};
}

inline StageResult stage_compare(const fs::path& root, const std::vector<std::string>& sites,
                                 const std::string& metric, const std::vector<std::string>& decayed,
                                 const std::vector<std::string>& alive, const RunConfig& cfg) {
  cfg.validate();
  if (sites.size() < 2) throw UsageError("compare needs at least two sites");
  if (std::find(detail::metric_columns().begin(), detail::metric_columns().end(), metric) ==
      detail::metric_columns().end())
    throw UsageError("unknown metric '" + metric + "'");
  Workspace ws(root);
  std::map<std::string, SiteGroup> groups;
  for (const auto& s : decayed) groups[s] = SiteGroup::Decayed;
  for (const auto& s : alive) {
    if (groups.count(s)) throw UsageError("site '" + s + "' is listed as both decayed and alive");
    groups[s] = SiteGroup::Alive;
  }
  Fnv1a key;
  key.add("compare").add(metric).add(std::to_string(cfg.bins));
  for (const auto& s : sites) {
    check_site_name(s);
    ws.require(s, "metrics", "metrics --site " + s);
    key.add(s).add(ws.output_digest(s, "metrics"));
  }
  for (const auto& [s, g] : groups) key.add(s).add(g == SiteGroup::Decayed ? "decayed" : "alive");
  const std::string stage = "compare_" + metric;
  if (ws.fresh("reports", stage, key.hex())) return {true, {"compare " + metric + ": up-to-date"}, {}};

  std::map<std::string, std::vector<double>> samples;
  for (const auto& s : sites) {
    samples[s] = detail::read_metric_column(ws.dir(s) / "metrics.csv", metric);
    if (samples[s].empty()) throw InputError("site '" + s + "' has no cascades to compare");
  }
  const auto rep = pattern_distance_report(samples, metric, groups, cfg.bins);

  const auto dir = ws.dir("reports");
  fs::create_directories(dir);
  std::vector<fs::path> outputs;
  auto matrix = [&](const std::string& name, const std::vector<std::vector<double>>& m) {
    const auto p = dir / (stage + "_" + name + ".csv");
    std::ofstream os(p);
    write_matrix_csv(os, rep.sites, m);
    outputs.push_back(p);
  };
  matrix("ks_statistic", rep.ks_statistic);
  matrix("ks_p", rep.ks_p_value);
  matrix("js", rep.js);
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["sites"] = rep.sites;
  j["bins"] = rep.bins;
  j["ks_statistic"] = rep.ks_statistic;
  j["ks_p_value"] = rep.ks_p_value;
  j["js_divergence"] = rep.js;
  j["nearest_group"] = rep.nearest_group;
  j["config"] = cfg.to_json();
  detail::write_json(dir / (stage + ".json"), j);
  outputs.push_back(dir / (stage + ".json"));
  ws.record("reports", stage, key.hex(), outputs, cfg.to_json());

  StageResult res;
  for (const auto& [s, g] : rep.nearest_group) res.lines.push_back(s + ": nearest group " + g);
  return res;
}

inline StageResult stage_predict(const fs::path& root, const std::vector<std::string>& sites, const std::string& target,
                                 const RunConfig& cfg) {
  cfg.validate();
  const auto tgt = parse_target(target);
  if (sites.empty()) throw UsageError("predict needs at least one site");
  Workspace ws(root);
  Fnv1a key;
  key.add("predict").add(target).add(cfg.to_json().dump());
  for (const auto& s : sites) {
    check_site_name(s);
    ws.require(s, "cascades", "cascades --site " + s);
    ws.require(s, "measures", "metrics --site " + s);
    key.add(s).add(ws.output_digest(s, "cascades")).add(ws.output_digest(s, "measures"));
  }
  const std::string stage = "predict_" + target;
  if (ws.fresh("reports", stage, key.hex())) return {true, {"predict " + target + ": up-to-date"}, {}};

  std::vector<Dataset> parts;
  for (const auto& s : sites) {
    const auto trees = detail::load_cascades(ws.dir(s));
    std::ifstream in(ws.dir(s) / "measures.csv");
    const auto measures = read_measures_csv(in);
    if (trees.empty()) continue;
    parts.push_back(assemble_dataset(trees, measures, tgt, s, parse_feature_source(cfg.features),
                                     parse_virality_norm(cfg.virality_norm)));
  }
  const auto data = concat_datasets(parts);
  if (data.size() < 2) throw InputError("prediction needs at least two cascades across the given sites");
  const auto rep = run_experiment(data, cfg.experiment_config());

  // Final model on every row, restricted to the features the runs used.
  std::vector<std::size_t> keep;
  for (const auto& f : rep.used_features)
    keep.push_back(static_cast<std::size_t>(std::find(data.feature_names.begin(), data.feature_names.end(), f) -
                                            data.feature_names.begin()));
  const auto used = select_features(data, keep);
  const auto model = fit_gbr(used.X(), used.y(), cfg.gbr_config(), used.feature_names);

  const auto dir = ws.dir("reports");
  fs::create_directories(dir);
  std::vector<fs::path> outputs;
  {
    const auto p = dir / (stage + "_runs.csv");
    std::ofstream os(p);
    write_runs_csv(os, rep);
    outputs.push_back(p);
  }
  {
    const auto p = dir / (stage + "_dataset.csv");
    std::ofstream os(p);
    std::vector<std::string> header{"site", "cascade_id"};
    header.insert(header.end(), data.feature_names.begin(), data.feature_names.end());
    header.push_back("target");
    header.push_back("imputed");
    write_csv_row(os, header);
    for (const auto& r : data.rows) {
      std::vector<std::string> row{r.site, fmt_num(r.cascade_id)};
      for (double v : r.features) row.push_back(fmt_num(v));
      row.push_back(fmt_num(r.target));
      row.push_back(r.imputed ? "1" : "0");
      write_csv_row(os, row);
    }
    outputs.push_back(p);
  }
  {
    auto mj = model_to_json(model);
    mj["config"] = cfg.to_json();
    detail::write_json(dir / (stage + "_model.json"), mj);
    outputs.push_back(dir / (stage + "_model.json"));
  }
  std::size_t imputed = 0;
  for (const auto& r : data.rows) imputed += r.imputed;
  auto j = report_to_json(rep);
  j["target"] = target;
  j["sites"] = sites;
  j["rows"] = data.size();
  j["imputed_rows"] = imputed;
  j["config"] = cfg.to_json();
  detail::write_json(dir / (stage + ".json"), j);
  outputs.push_back(dir / (stage + ".json"));
  ws.record("reports", stage, key.hex(), outputs, cfg.to_json());

  StageResult res;
  std::ostringstream os;
  os << target << ": " << rep.runs.size() << " runs, mean MAE model " << fmt_num(rep.mean_mae_model)
     << ", baseline " << fmt_num(rep.mean_mae_baseline) << ", improvement " << fmt_num(rep.improvement * 100.0)
     << "%";
  res.lines.push_back(os.str());
  if (rep.importance_warning) res.warnings.push_back("model made no splits; feature importance is uniform");
  if (imputed) res.warnings.push_back(std::to_string(imputed) + " rows had missing measures imputed as 0");
  return res;
}

inline StageResult stage_report(const fs::path& root, std::vector<std::string> sites, const RunConfig& cfg) {
  cfg.validate();
  Workspace ws(root);
  if (sites.empty()) sites = ws.sites();
  if (sites.empty()) throw MissingStageError("workspace has no sites; run `decaynet ingest` or `decaynet synth` first");
  Fnv1a key;
  key.add("report");
  for (const auto& s : sites) {
    check_site_name(s);
    ws.require(s, "series", "ingest --site " + s);
    key.add(s).add(ws.output_digest(s, "series")).add(ws.output_digest(s, "cascades"));
  }
  if (ws.fresh("reports", "report", key.hex())) return {true, {"report: up-to-date"}, {}};

  const auto dir = ws.dir("reports");
  fs::create_directories(dir);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  {
    std::ofstream os(dir / "site_summary.csv");
    os << "site,period_start,period_end,k,window,nodes_g0,edges_g0,nodes_last,edges_last,cascades\n";
    for (const auto& s : sites) {
      auto row = detail::site_row(s, load_series(ws.dir(s) / "series"));
      row["cascades"] = ws.entry(s, "cascades") ? nlohmann::ordered_json(detail::load_cascades(ws.dir(s)).size())
                                                : nlohmann::ordered_json(nullptr);
      write_csv_row(os, {s, row["period_start"].get<std::string>(), row["period_end"].get<std::string>(),
                         row["k"].dump(), row["window"].dump(), row["nodes_g0"].dump(), row["edges_g0"].dump(),
                         row["nodes_last"].dump(), row["edges_last"].dump(),
                         row["cascades"].is_null() ? "" : row["cascades"].dump()});
      rows.push_back(std::move(row));
    }
  }
  detail::write_json(dir / "summary.json", nlohmann::ordered_json{{"sites", rows}, {"config", cfg.to_json()}});
  ws.record("reports", "report", key.hex(), {dir / "site_summary.csv", dir / "summary.json"}, cfg.to_json());
  StageResult res;
  for (const auto& r : rows) res.lines.push_back(detail::site_line(r));
  return res;
}

}  // namespace decaynet
