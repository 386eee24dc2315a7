#include "cellomaps/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "cellomaps/cellomap.hpp"
#include "cellomaps/classifier.hpp"
#include "cellomaps/csv.hpp"
#include "cellomaps/dataset.hpp"
#include "cellomaps/error.hpp"
#include "cellomaps/eval.hpp"
#include "cellomaps/format.hpp"
#include "cellomaps/nuclei.hpp"
#include "cellomaps/parallel.hpp"
#include "cellomaps/png.hpp"
#include "cellomaps/prediction.hpp"
#include "cellomaps/projection.hpp"
#include "cellomaps/synth.hpp"
#include "cellomaps/tiler.hpp"
#include "cellomaps/tmb.hpp"

namespace cellomaps::cli {

namespace fs = std::filesystem;

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config file " + path);
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::MalformedInput, path + ":" + std::to_string(n) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

namespace {

// Options bound by every subcommand.
struct Common {
  std::string config;
  std::size_t workers = 1;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config, "key = value file; command-line flags take precedence");
  sub->add_option("--workers", common.workers, "worker threads for per-slide work")->check(CLI::PositiveNumber);
}

// Resolved options as key = value lines, defaults included.
std::string snapshot(const CLI::App* sub) {
  std::ostringstream out;
  out << "# cellomaps " << sub->get_name() << '\n';
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name.empty()) continue;
    std::string value;
    if (opt->count() > 0) {
      const auto results = opt->reduced_results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? " " : "") + results[i];
    } else {
      value = opt->get_default_str();
    }
    out << name << " = " << value << '\n';
  }
  return out.str();
}

// Config snapshot beside an output: <dir>/config.txt for directories,
// <file>.config.txt otherwise.
void write_snapshot(const std::string& text, const fs::path& output, bool is_dir) {
  const fs::path path = is_dir ? output / "config.txt" : fs::path(output.string() + ".config.txt");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::map<std::string, std::string> patient_by_slide(std::span<const ManifestEntry> manifest) {
  std::map<std::string, std::string> out;
  for (const auto& m : manifest) out.emplace(m.slide_id, m.patient_id);
  return out;
}

std::map<std::string, std::vector<PredictionRecord>> group_by_slide(std::vector<PredictionRecord> predictions) {
  std::map<std::string, std::vector<PredictionRecord>> out;
  for (auto& p : predictions) out[p.slide_id].push_back(std::move(p));
  return out;
}

std::vector<std::string> subset_ids(const SplitPlan& plan, const std::string& subset) {
  if (subset == "train") return plan.train;
  if (subset == "val") return plan.val;
  if (subset == "test") return plan.test;
  throw Error(ErrorCode::InvalidArgument, "unknown subset '" + subset + "'");
}

// Inserts config-file values as flags directly after the subcommand name so
// later command-line flags override them.
std::vector<std::string> inject_config(CLI::App& app, std::vector<std::string> args) {
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty() || args.empty()) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config_file(config)) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      std::cerr << "config: ignoring key '" << key << "' not used by " << args[0] << '\n';
      continue;
    }
    injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"cellomaps: nuclei centroid maps for growth pattern classification"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  Common common;

  // ---- synth
  SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a labelled synthetic corpus");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--tiles-per-class", synth_cfg.tiles_per_class)->check(CLI::Range(10, 100000));
  synth->add_option("--tile-size", synth_cfg.tile_size);
  synth->add_option("--patients", synth_cfg.patients);
  synth->add_option("--noise", synth_cfg.noise_fraction)->check(CLI::Range(0.0, 0.2));
  synth->add_option("--source-mpp", synth_cfg.source_mpp);
  synth->add_option("--target-mpp", synth_cfg.target_mpp);
  add_common(synth, common);

  // ---- build-maps
  std::vector<std::string> bm_inputs;
  std::string bm_out = "maps";
  double bm_mpp = 2.0;
  std::string bm_channels = ChannelSpec().to_string();
  bool bm_necrosis = false;
  std::vector<std::string> bm_remaps;
  auto* build_maps = app.add_subcommand("build-maps", "nuclei JSON -> CLOM maps plus maps.csv index");
  build_maps->add_option("inputs", bm_inputs, "nuclei JSON files")
      ->required()
      ->check(CLI::ExistingFile)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  build_maps->add_option("--out", bm_out, "output directory");
  build_maps->add_option("--target-mpp", bm_mpp);
  build_maps->add_option("--channels", bm_channels, "comma-separated cell classes, one channel each");
  build_maps->add_flag("--remap-necrosis", bm_necrosis, "count necrotic nuclei as neoplastic");
  build_maps->add_option("--remap", bm_remaps, "FROM:TO class remap, repeatable")->multi_option_policy(
      CLI::MultiOptionPolicy::TakeAll);
  add_common(build_maps, common);

  // ---- render
  std::string render_in, render_out;
  std::uint32_t render_radius = 1;
  auto* render = app.add_subcommand("render", "CLOM -> RGB PNG");
  render->add_option("map", render_in)->required()->check(CLI::ExistingFile);
  render->add_option("--out", render_out)->required();
  render->add_option("--dot-radius", render_radius);
  add_common(render, common);

  // ---- entropy
  std::string entropy_in, entropy_out;
  std::uint32_t entropy_tile = 448, entropy_stride = 0;
  auto* entropy = app.add_subcommand("entropy", "per-tile composite entropy CSV");
  entropy->add_option("map", entropy_in)->required()->check(CLI::ExistingFile);
  entropy->add_option("--tile", entropy_tile)->check(CLI::PositiveNumber);
  entropy->add_option("--stride", entropy_stride, "0 means the tile size");
  entropy->add_option("--out", entropy_out, "CSV path; standard output when omitted");
  add_common(entropy, common);

  // ---- tile
  std::string tile_maps, tile_ann, tile_out;
  std::uint32_t tile_size = 448, tile_stride = 0;
  double tile_overlap = kDefaultMinOverlap;
  long long tile_min_nuclei = -1;
  auto* tile = app.add_subcommand("tile", "tile maps and label them against annotations");
  tile->add_option("--maps", tile_maps, "directory with maps.csv")->required()->check(CLI::ExistingDirectory);
  tile->add_option("--annotations", tile_ann, "directory of <slide_id>.json")->required()->check(
      CLI::ExistingDirectory);
  tile->add_option("--tile-size", tile_size);
  tile->add_option("--stride", tile_stride, "0 means the tile size");
  tile->add_option("--min-overlap", tile_overlap);
  tile->add_option("--min-nuclei", tile_min_nuclei, "negative means the size-scaled default");
  tile->add_option("--out", tile_out, "manifest CSV")->required();
  add_common(tile, common);

  // ---- split
  std::string split_manifest, split_out, split_mode = "patient";
  SplitOptions split_opts;
  auto* split = app.add_subcommand("split", "patient- or tile-level split plan");
  split->add_option("--manifest", split_manifest)->required()->check(CLI::ExistingFile);
  split->add_option("--mode", split_mode)->check(CLI::IsMember({"patient", "tile"}));
  split->add_option("--test-patients", split_opts.test_patient_count);
  split->add_option("--val-fraction", split_opts.val_fraction);
  split->add_option("--seed", split_opts.seed);
  split->add_option("--max-attempts", split_opts.max_attempts);
  split->add_option("--out", split_out, "plan JSON")->required();
  add_common(split, common);

  // ---- train
  std::string train_manifest, train_maps, train_plan, train_out, train_log, train_loss = "focal";
  TrainConfig train_cfg;
  bool train_merge = false;
  std::vector<double> train_alpha;
  auto* train_cmd = app.add_subcommand("train", "train the tile classifier");
  train_cmd->add_option("--manifest", train_manifest)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--maps", train_maps)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--plan", train_plan)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "checkpoint JSON")->required();
  train_cmd->add_option("--log", train_log, "training curve CSV; defaults to <out>.log.csv");
  train_cmd->add_option("--epochs", train_cfg.epochs);
  train_cmd->add_option("--batch-size", train_cfg.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_cfg.learning_rate);
  train_cmd->add_option("--loss", train_loss)->check(
      CLI::IsMember({"focal", "fl", "cross_entropy", "ce", "weighted_cross_entropy", "wce"}));
  train_cmd->add_option("--gamma", train_cfg.focal.gamma);
  train_cmd->add_option("--alpha", train_alpha, "per-class focal alpha, six values")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  train_cmd->add_option("--seed", train_cfg.seed);
  train_cmd->add_option("--hflip", train_cfg.horizontal_flip);
  train_cmd->add_option("--vflip", train_cfg.vertical_flip);
  train_cmd->add_flag("--merge-channels", train_merge, "collapse all channels into one mask");
  add_common(train_cmd, common);

  // ---- predict
  std::string pred_model, pred_manifest, pred_maps, pred_plan, pred_subset = "test", pred_out;
  auto* predict = app.add_subcommand("predict", "per-tile class probabilities");
  predict->add_option("--model", pred_model)->required()->check(CLI::ExistingFile);
  predict->add_option("--manifest", pred_manifest)->required()->check(CLI::ExistingFile);
  predict->add_option("--maps", pred_maps)->required()->check(CLI::ExistingDirectory);
  predict->add_option("--plan", pred_plan, "restrict to a plan subset")->check(CLI::ExistingFile);
  predict->add_option("--subset", pred_subset)->check(CLI::IsMember({"train", "val", "test", "all"}));
  predict->add_option("--out", pred_out)->required();
  add_common(predict, common);

  // ---- eval
  std::string eval_pred, eval_manifest, eval_out;
  auto* eval = app.add_subcommand("eval", "metrics of predictions against manifest labels");
  eval->add_option("--predictions", eval_pred)->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", eval_manifest)->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "metrics JSON")->required();
  add_common(eval, common);

  // ---- project
  std::string proj_pred, proj_maps, proj_out;
  std::uint32_t proj_tile = 448, proj_block = 8;
  auto* project = app.add_subcommand("project", "pattern overlay PNG per slide");
  project->add_option("--predictions", proj_pred)->required()->check(CLI::ExistingFile);
  project->add_option("--maps", proj_maps)->required()->check(CLI::ExistingDirectory);
  project->add_option("--tile-size", proj_tile)->check(CLI::PositiveNumber);
  project->add_option("--block", proj_block)->check(CLI::PositiveNumber);
  project->add_option("--out", proj_out, "output directory")->required();
  add_common(project, common);

  // ---- features
  std::string feat_pred, feat_manifest, feat_out;
  auto* features = app.add_subcommand("features", "slide-level pattern fraction vectors");
  features->add_option("--predictions", feat_pred)->required()->check(CLI::ExistingFile);
  features->add_option("--manifest", feat_manifest, "supplies patient ids")->required()->check(CLI::ExistingFile);
  features->add_option("--out", feat_out)->required();
  add_common(features, common);

  // ---- graph
  std::string graph_pred, graph_out;
  std::uint32_t graph_tile = 448;
  auto* graph = app.add_subcommand("graph", "tile adjacency graph per slide");
  graph->add_option("--predictions", graph_pred)->required()->check(CLI::ExistingFile);
  graph->add_option("--tile-size", graph_tile)->check(CLI::PositiveNumber);
  graph->add_option("--out", graph_out, "output directory")->required();
  add_common(graph, common);

  // ---- tmb-train
  std::string tmb_features, tmb_labels, tmb_out, tmb_model = "mlp", tmb_graphs;
  MlpConfig tmb_cfg;
  auto* tmb = app.add_subcommand("tmb-train", "train the TMB-high classifier on slide features");
  tmb->add_option("--features", tmb_features)->required()->check(CLI::ExistingFile);
  tmb->add_option("--labels", tmb_labels, "CSV: patient_id plus mut_per_mb or label")->required()->check(
      CLI::ExistingFile);
  tmb->add_option("--model", tmb_model)->check(CLI::IsMember({"mlp", "gnn"}));
  tmb->add_option("--graphs", tmb_graphs, "graph directory for --model gnn")->check(CLI::ExistingDirectory);
  tmb->add_option("--hidden", tmb_cfg.hidden)->check(CLI::PositiveNumber);
  tmb->add_option("--lr", tmb_cfg.learning_rate);
  tmb->add_option("--epochs", tmb_cfg.epochs);
  tmb->add_option("--seed", tmb_cfg.seed);
  tmb->add_option("--out", tmb_out, "model JSON")->required();
  add_common(tmb, common);

  try {
    args = inject_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return kExitInputError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string snap = snapshot(sub);
  std::cerr << snap;
  const std::size_t workers = common.workers;

  try {
    if (sub == synth) {
      const auto corpus = generate_corpus(synth_cfg);
      write_corpus(corpus, synth_out);
      write_snapshot(snap, synth_out, true);
      std::cerr << "wrote " << corpus.slides.size() << " slides, " << corpus.truth.size() << " tiles\n";
    } else if (sub == build_maps) {
      const ChannelSpec channels = ChannelSpec::parse(bm_channels);
      std::vector<RemapRule> rules;
      if (bm_necrosis) rules.push_back(kNecrosisAsNeoplastic);
      for (const auto& r : bm_remaps) {
        const auto colon = r.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "remap must be FROM:TO, got " + r);
        rules.push_back({cell_class_from_string(r.substr(0, colon)), cell_class_from_string(r.substr(colon + 1))});
      }
      fs::create_directories(bm_out);
      std::vector<MapIndexEntry> index(bm_inputs.size());
      parallel_for(bm_inputs.size(), workers, [&](std::size_t i, std::size_t) {
        const auto set = parse_nuclei_file(bm_inputs[i]);
        const auto map = build_cellomap(scale_coordinates(apply_remap(set, rules), bm_mpp), channels);
        index[i] = {set.slide_id, set.patient_id, set.slide_id + ".clom"};
        write_clom(map, fs::path(bm_out) / index[i].file);
      });
      std::sort(index.begin(), index.end(), [](const auto& a, const auto& b) { return a.slide_id < b.slide_id; });
      for (std::size_t i = 1; i < index.size(); ++i)
        if (index[i].slide_id == index[i - 1].slide_id) {
          throw Error(ErrorCode::MalformedInput, "duplicate slide id " + index[i].slide_id);
        }
      write_map_index(bm_out, index);
      write_snapshot(snap, bm_out, true);
    } else if (sub == render) {
      const auto png = render_png(read_clom(render_in), render_radius);
      ensure_parent(render_out);
      write_file(render_out, png);
      write_snapshot(snap, render_out, false);
    } else if (sub == entropy) {
      const auto map = read_clom(entropy_in);
      const std::uint32_t stride = entropy_stride ? entropy_stride : entropy_tile;
      const auto tiles = tile_map(map, entropy_tile, stride);
      const auto alphabet = static_cast<std::uint32_t>(1u << map.planes.size());
      csv::Table table;
      table.header = {"x", "y", "bits_per_pixel"};
      double sum = 0.0;
      for (const auto& t : tiles) {
        const auto symbols = composite_symbols(t.planes);
        const double bits = shannon_entropy(symbols, alphabet).bits_per_pixel;
        sum += bits;
        table.rows.push_back({std::to_string(t.x), std::to_string(t.y), format_double(bits)});
      }
      if (entropy_out.empty()) {
        std::cout << csv::to_string(table);
      } else {
        ensure_parent(entropy_out);
        csv::write(entropy_out, table);
        write_snapshot(snap, entropy_out, false);
      }
      if (!tiles.empty()) std::cerr << "mean bits/pixel " << format_double(sum / tiles.size()) << '\n';
    } else if (sub == tile) {
      if (std::find(kSupportedTileSizes.begin(), kSupportedTileSizes.end(), tile_size) == kSupportedTileSizes.end()) {
        throw Error(ErrorCode::InvalidArgument, "tile size must be one of 224, 256, 448, 1024");
      }
      const std::uint32_t stride = tile_stride ? tile_stride : tile_size;
      const std::size_t min_nuclei =
          tile_min_nuclei < 0 ? default_min_nuclei(tile_size) : static_cast<std::size_t>(tile_min_nuclei);
      const auto index = read_map_index(tile_maps);
      std::vector<std::vector<ManifestEntry>> per_slide(index.size());
      parallel_for(index.size(), workers, [&](std::size_t i, std::size_t) {
        const fs::path ann_path = fs::path(tile_ann) / (index[i].slide_id + ".json");
        if (!fs::exists(ann_path)) return;
        const auto map = load_indexed_map(tile_maps, index[i]);
        const auto ann = read_annotations(ann_path);
        for (const auto& region : ann.regions) validate(region, map.width, map.height);
        for (const auto& t : tile_and_label(map, ann.regions, tile_size, stride, tile_overlap, min_nuclei)) {
          per_slide[i].push_back(manifest_entry(t));
        }
      });
      std::vector<ManifestEntry> manifest;
      for (std::size_t i = 0; i < index.size(); ++i) {
        if (!fs::exists(fs::path(tile_ann) / (index[i].slide_id + ".json"))) {
          std::cerr << "no annotations for " << index[i].slide_id << ", skipped\n";
        }
        manifest.insert(manifest.end(), per_slide[i].begin(), per_slide[i].end());
      }
      ensure_parent(tile_out);
      write_manifest(tile_out, manifest);
      write_snapshot(snap, tile_out, false);
      std::cerr << "kept " << manifest.size() << " labelled tiles\n";
    } else if (sub == split) {
      split_opts.mode = split_mode_from_string(split_mode);
      const auto manifest = read_manifest(split_manifest);
      const auto plan = make_split(manifest, split_opts);
      ensure_parent(split_out);
      write_split_plan(split_out, plan);
      write_snapshot(snap, split_out, false);
      std::cerr << "train " << plan.train.size() << ", val " << plan.val.size() << ", test " << plan.test.size()
                << '\n';
    } else if (sub == train_cmd) {
      train_cfg.loss = loss_kind_from_string(train_loss);
      train_cfg.focal.alpha = train_alpha;
      train_cfg.focal.validate(kPatternCount);
      train_cfg.workers = workers;
      const auto manifest = read_manifest(train_manifest);
      if (manifest.empty()) throw Error(ErrorCode::EmptyDataset, "manifest has no tiles");
      const auto plan = read_split_plan(train_plan);
      const auto train_tiles = load_manifest_tiles(train_maps, select_tiles(manifest, plan.train));
      const auto val_tiles = load_manifest_tiles(train_maps, select_tiles(manifest, plan.val));
      if (train_tiles.empty()) throw Error(ErrorCode::EmptyDataset, "plan selects no training tiles");
      ClassifierConfig model_cfg;
      model_cfg.tile_size = train_tiles.front().size;
      model_cfg.map_channels = train_tiles.front().planes.size();
      model_cfg.merge_channels = train_merge;
      const auto initial = ClassifierModel::create(model_cfg, train_cfg.seed);
      const auto result = train(initial, train_tiles, val_tiles, train_cfg);
      ensure_parent(train_out);
      result.model.save(train_out);
      write_training_log(train_log.empty() ? train_out + ".log.csv" : train_log, result.curve);
      write_snapshot(snap, train_out, false);
      std::cerr << "best epoch " << result.best_epoch << '\n';
    } else if (sub == predict) {
      const auto model = ClassifierModel::load(pred_model);
      auto manifest = read_manifest(pred_manifest);
      if (!pred_plan.empty() && pred_subset != "all") {
        const auto ids = subset_ids(read_split_plan(pred_plan), pred_subset);
        manifest = select_tiles(manifest, ids);
      }
      const auto tiles = load_manifest_tiles(pred_maps, manifest);
      const auto predictions = predict_all(model, tiles, workers);
      ensure_parent(pred_out);
      write_predictions(pred_out, predictions);
      write_snapshot(snap, pred_out, false);
    } else if (sub == eval) {
      const auto predictions = read_predictions(eval_pred);
      std::map<std::string, PatternClass> truth_by_id;
      for (const auto& m : read_manifest(eval_manifest)) truth_by_id.emplace(m.tile_id(), m.label);
      std::vector<PatternClass> truths;
      for (const auto& p : predictions) {
        const std::string id = p.slide_id + ":" + std::to_string(p.x) + ":" + std::to_string(p.y);
        const auto it = truth_by_id.find(id);
        if (it == truth_by_id.end()) throw Error(ErrorCode::MalformedInput, "no manifest label for tile " + id);
        truths.push_back(it->second);
      }
      const auto report = compute_metrics(predictions, truths);
      ensure_parent(eval_out);
      std::ofstream(eval_out) << metrics_json(report).dump(2) << '\n';
      write_snapshot(snap, eval_out, false);
      std::cout << metrics_table(report);
    } else if (sub == project) {
      std::map<std::string, MapIndexEntry> index;
      for (auto& e : read_map_index(proj_maps)) index.emplace(e.slide_id, e);
      fs::create_directories(proj_out);
      for (const auto& [slide, preds] : group_by_slide(read_predictions(proj_pred))) {
        const auto it = index.find(slide);
        if (it == index.end()) throw Error(ErrorCode::MalformedInput, "slide " + slide + " is not in the map index");
        const auto map = load_indexed_map(proj_maps, it->second);
        const auto overlay = build_overlay(preds, map.width, map.height, proj_tile);
        write_file(fs::path(proj_out) / (slide + ".png"), render_overlay_png(overlay, proj_block));
      }
      std::ofstream(fs::path(proj_out) / "legend.json") << legend_json(default_palette(), proj_block).dump(2)
                                                           << '\n';
      write_snapshot(snap, proj_out, true);
    } else if (sub == features) {
      const auto patients = patient_by_slide(read_manifest(feat_manifest));
      std::vector<SlideFeatureVector> vectors;
      for (auto& [slide, preds] : group_by_slide(read_predictions(feat_pred))) {
        const auto it = patients.find(slide);
        for (auto& p : preds) p.patient_id = it == patients.end() ? std::string{} : it->second;
        vectors.push_back(feature_vector(preds));
      }
      ensure_parent(feat_out);
      write_feature_vectors(feat_out, vectors);
      write_snapshot(snap, feat_out, false);
    } else if (sub == graph) {
      fs::create_directories(graph_out);
      for (const auto& [slide, preds] : group_by_slide(read_predictions(graph_pred))) {
        const auto g = tile_graph_from_predictions(preds, graph_tile);
        std::ofstream(fs::path(graph_out) / (slide + ".graph.json")) << graph_json(g).dump() << '\n';
      }
      write_snapshot(snap, graph_out, true);
    } else if (sub == tmb) {
      std::map<std::string, TMBLabel> label_of;
      for (const auto& r : read_tmb_labels(tmb_labels)) label_of.emplace(r.patient_id, r.label);
      std::vector<PatternFeatures> xs;
      std::vector<TMBLabel> ys;
      std::vector<TileGraph> graphs;
      for (const auto& f : read_feature_vectors(tmb_features)) {
        const auto it = label_of.find(f.patient_id);
        if (it == label_of.end()) continue;
        xs.push_back(f.fractions);
        ys.push_back(it->second);
        if (tmb_model == "gnn") {
          if (tmb_graphs.empty()) throw Error(ErrorCode::InvalidArgument, "--model gnn needs --graphs");
          std::ifstream in(fs::path(tmb_graphs) / (f.slide_id + ".graph.json"));
          if (!in) throw Error(ErrorCode::Io, "missing graph for slide " + f.slide_id);
          graphs.push_back(graph_from_json(nlohmann::json::parse(in)));
        }
      }
      if (xs.empty()) throw Error(ErrorCode::EmptyDataset, "no slide has a TMB label");
      ensure_parent(tmb_out);
      double accuracy = 0.0;
      if (tmb_model == "mlp") {
        const auto result = train_mlp(xs, ys, tmb_cfg);
        std::ofstream(tmb_out) << result.model.to_json().dump() << '\n';
        accuracy = result.train_accuracy;
      } else {
        const auto result = train_gnn(graphs, ys, tmb_cfg);
        std::ofstream(tmb_out) << result.model.to_json().dump() << '\n';
        accuracy = result.train_accuracy;
      }
      write_snapshot(snap, tmb_out, false);
      std::cout << "train_accuracy " << format_double(accuracy) << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::Internal ? kExitInternalError : kExitInputError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [MalformedInput]: " << e.what() << '\n';
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [Io]: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternalError;
  }
  return kExitOk;
}

}  // namespace cellomaps::cli
