#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decaynet/workspace.hpp"

namespace {

void emit(const decaynet::StageResult& r) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& l : r.lines) std::cout << l << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  using namespace decaynet;
  CLI::App app{"Inactivity cascades in decaying interaction networks", "decaynet"};
  app.set_version_flag("--version", std::string(DECAYNET_VERSION));
  app.set_config("--config", "", "TOML/INI file of option = value pairs");
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string workspace = "workspace";
  std::int64_t window = 0, core_threshold = 0;
  if (const char* t = std::getenv("DECAYNET_THREADS")) {
    if (!parse_number(std::string_view(t), cfg.threads)) {
      std::cerr << "error: DECAYNET_THREADS must be a non-negative integer\n";
      return 1;
    }
  }

  app.add_option("-w,--workspace", workspace, "Workspace directory")->capture_default_str();
  app.add_option("--window", window, "Snapshot width in seconds (default: span / k)");
  app.add_option("-k,--snapshots", cfg.k, "Number of snapshots")->capture_default_str();
  app.add_option("--core-filter", cfg.core_mode, "auto, reputation or activity")->capture_default_str();
  app.add_option("--core-threshold", core_threshold, "Reputation or activity threshold (default 500 or 1)");
  app.add_flag("--include-alive", cfg.include_alive, "Let alive nodes join cascades");
  app.add_option("--initiators", cfg.initiators, "earliest or all-neighbors-active")->capture_default_str();
  app.add_option("--virality-norm", cfg.virality_norm, "sigmoid, tanh or minmax")->capture_default_str();
  app.add_option("--degree-base", cfg.degree_base, "tree or g0")->capture_default_str();
  app.add_option("--bins", cfg.bins, "Histogram bins for divergences")->capture_default_str();
  app.add_option("--trees", cfg.gbr_trees, "Boosting rounds")->capture_default_str();
  app.add_option("--learning-rate", cfg.gbr_rate, "Shrinkage")->capture_default_str();
  app.add_option("--max-depth", cfg.gbr_depth, "Tree depth")->capture_default_str();
  app.add_option("--subsample", cfg.gbr_subsample, "Row fraction per round")->capture_default_str();
  app.add_option("--runs", cfg.runs, "Random splits")->capture_default_str();
  app.add_option("--train-fraction", cfg.train_fraction, "Training share of each split")->capture_default_str();
  app.add_option("--top-features", cfg.top_features, "Keep the J most important features (0 = all)")
      ->capture_default_str();
  app.add_option("--features", cfg.features, "initiator or mean")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads (0 = hardware)");
  app.add_option("--min-cut-sample", cfg.min_cut_sample, "Sampled partners for min-cut averages (0 = exact)")
      ->capture_default_str();

  std::string site;
  std::vector<std::string> sites, decayed, alive;

  auto* ingest = app.add_subcommand("ingest", "Parse interactions and build the snapshot series");
  IngestInput in;
  std::string edges, dump;
  ingest->add_option("--site", site, "Site name")->required();
  auto* e_opt = ingest->add_option("--edges", edges, "Edge list: source,target,timestamp[,kind]");
  auto* d_opt = ingest->add_option("--dump", dump, "Directory with Posts.xml, Comments.xml, Users.xml");
  e_opt->excludes(d_opt);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic decaying series with planted cascades");
  SynthInput sy;
  std::string planted;
  synth->add_option("--site", site, "Site name")->required();
  synth->add_option("--nodes", sy.n, "Node count")->capture_default_str();
  synth->add_option("--p-edge", sy.p_edge, "Extra G_0 edge probability")->capture_default_str();
  synth->add_option("--planted", planted, "root:children:depth items separated by ';'");

  auto* cascades = app.add_subcommand("cascades", "Extract cascade trees");
  cascades->add_option("--site", site, "Site name")->required();

  auto* metrics = app.add_subcommand("metrics", "Node measures, cascade metrics and distributions");
  metrics->add_option("--site", site, "Site name")->required();

  auto* compare = app.add_subcommand("compare", "KS and JS comparison of one metric across sites");
  std::string metric;
  compare->add_option("--sites", sites, "Sites to compare")->required()->delimiter(',');
  compare->add_option("--metric", metric, "size, size_fraction, duration, virality_raw, virality_norm, max_degree_norm")
      ->required();
  compare->add_option("--decayed", decayed, "Sites known to have decayed")->delimiter(',');
  compare->add_option("--alive", alive, "Sites known to be alive")->delimiter(',');

  auto* predict = app.add_subcommand("predict", "Gradient boosted prediction of cascade size or virality");
  std::string target;
  predict->add_option("--sites", sites, "Sites to pool")->required()->delimiter(',');
  predict->add_option("--target", target, "size or virality")->required();

  auto* report = app.add_subcommand("report", "Per-site summary table");
  report->add_option("--sites", sites, "Sites (default: all)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.count("--window")) cfg.window = window;
    if (app.count("--core-threshold")) cfg.core_threshold = core_threshold;
    if (*ingest) {
      if (!edges.empty()) in.edges = edges;
      if (!dump.empty()) in.dump_dir = dump;
      emit(stage_ingest(workspace, site, in, cfg));
    } else if (*synth) {
      sy.planted = parse_planted(planted);
      emit(stage_synth(workspace, site, sy, cfg));
    } else if (*cascades) {
      emit(stage_cascades(workspace, site, cfg));
    } else if (*metrics) {
      emit(stage_metrics(workspace, site, cfg));
    } else if (*compare) {
      emit(stage_compare(workspace, sites, metric, decayed, alive, cfg));
    } else if (*predict) {
      emit(stage_predict(workspace, sites, target, cfg));
    } else if (*report) {
      emit(stage_report(workspace, sites, cfg));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
