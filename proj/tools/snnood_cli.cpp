#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snnood/artifact_store.hpp"
#include "snnood/attribution.hpp"
#include "snnood/experiment.hpp"
#include "snnood/synthetic.hpp"

namespace fs = std::filesystem;
using namespace snnood;

namespace {

int code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr ||
      dynamic_cast<const ArgumentError*>(&e) != nullptr)
    return static_cast<int>(Stage::Config);
  if (dynamic_cast<const IoError*>(&e) != nullptr ||
      dynamic_cast<const FormatError*>(&e) != nullptr ||
      dynamic_cast<const CorruptionError*>(&e) != nullptr ||
      dynamic_cast<const ConsistencyError*>(&e) != nullptr)
    return static_cast<int>(Stage::Data);
  if (dynamic_cast<const TrainingError*>(&e) != nullptr)
    return static_cast<int>(Stage::Train);
  if (dynamic_cast<const FitError*>(&e) != nullptr)
    return static_cast<int>(Stage::Detector);
  return static_cast<int>(Stage::Scoring);
}

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string output_dir;
  int jobs = 0;
};

ExperimentConfig load_config(const CommonOpts& o) {
  ExperimentConfig cfg = ExperimentConfig::from_json_file(o.config_path);
  if (o.seed_set) cfg.seed = o.seed;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "experiment JSON config")
      ->required();
  cmd->add_option("--seed", o.seed, "override the config seed")
      ->each([&](const std::string&) { o.seed_set = true; });
  cmd->add_option("--output-dir", o.output_dir, "override the output root");
  cmd->add_option("--jobs", o.jobs, "worker threads for scoring");
}

std::pair<NetworkModel<float>, ScpDetector> load_artifact(
    const ExperimentConfig& cfg, const std::string& file) {
  const std::string path = cfg.out_root() + "/" + file;
  if (!fs::exists(path))
    throw IoError("missing artifact " + path + " (run the earlier stages)");
  return restore({path});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking-network OoD detection toolkit"};
  app.require_subcommand(1);

  CommonOpts run_o, train_o, fit_o, eval_o, attr_o, enc_o;

  auto* run_cmd = app.add_subcommand("run", "full pipeline from a config");
  add_common(run_cmd, run_o);

  auto* train_cmd = app.add_subcommand("train", "train the classifier");
  add_common(train_cmd, train_o);

  auto* fit_cmd = app.add_subcommand("fit-detector", "fit the SCP detector");
  add_common(fit_cmd, fit_o);
  int fit_per_class = 0, fit_max_clusters = 0;
  double fit_tpr = 0.0;
  fit_cmd->add_option("--per-class", fit_per_class, "P samples per class");
  fit_cmd->add_option("--target-tpr", fit_tpr, "calibration target TPR");
  fit_cmd->add_option("--max-clusters", fit_max_clusters,
                      "maximum clusters per class");

  auto* eval_cmd =
      app.add_subcommand("evaluate", "score ID/OoD pairs and write metrics");
  add_common(eval_cmd, eval_o);

  auto* attr_cmd = app.add_subcommand("attribute", "render relevance heatmaps");
  add_common(attr_cmd, attr_o);
  int attr_index = -1;
  std::string attr_source = "ood";
  attr_cmd->add_option("--index", attr_index, "single sample index");
  attr_cmd->add_option("--source", attr_source, "'ood' (first pair) or 'test'");

  auto* cmp_cmd =
      app.add_subcommand("compare", "rank detectors across metric tables");
  std::vector<std::string> cmp_tables;
  std::string cmp_out = "compare";
  std::uint64_t cmp_seed = 1;
  cmp_cmd->add_option("tables", cmp_tables, "metrics.csv files")->required();
  cmp_cmd->add_option("--out", cmp_out, "output directory");
  cmp_cmd->add_option("--seed", cmp_seed, "sign-test Monte Carlo seed");

  auto* enc_cmd =
      app.add_subcommand("encode-preview", "emit one spike raster as CSV");
  add_common(enc_cmd, enc_o);
  int enc_index = 0;
  std::string enc_out;
  enc_cmd->add_option("--index", enc_index, "test-set sample index");
  enc_cmd->add_option("--out", enc_out, "output CSV (default stdout)");

  auto* synth_cmd =
      app.add_subcommand("synth-data", "write a synthetic glyph IDX pair");
  std::string synth_kind = "digits", synth_images, synth_labels;
  int synth_count = 1000;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("--kind", synth_kind, "digits|letters|shapes");
  synth_cmd->add_option("--count", synth_count, "sample count");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--images", synth_images, "output images path")
      ->required();
  synth_cmd->add_option("--labels", synth_labels, "output labels path")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return run_experiment(load_config(run_o));
    }
    if (train_cmd->parsed()) {
      const auto cfg = load_config(train_o);
      const auto train = load_source(cfg.train_data, nullptr, cfg.seed);
      stage_train(cfg, train);
      std::printf("model written to %s/model.bin\n", cfg.out_root().c_str());
      return 0;
    }
    if (fit_cmd->parsed()) {
      auto cfg = load_config(fit_o);
      if (fit_per_class > 0) cfg.detector.per_class = fit_per_class;
      if (fit_tpr > 0.0) cfg.detector.target_tpr = fit_tpr;
      if (fit_max_clusters > 0) cfg.detector.max_clusters = fit_max_clusters;
      auto [model, ignored] = load_artifact(cfg, "model.bin");
      const auto train = load_source(cfg.train_data, nullptr, cfg.seed);
      stage_fit_detector(cfg, model, train);
      std::printf("detector written to %s/detector.bin\n",
                  cfg.out_root().c_str());
      return 0;
    }
    if (eval_cmd->parsed()) {
      const auto cfg = load_config(eval_o);
      auto [model, det] = load_artifact(cfg, "detector.bin");
      const auto test = load_source(cfg.test_data, nullptr, cfg.seed);
      stage_scores_and_metrics(cfg, model, det, test);
      std::printf("metrics written to %s/metrics.csv\n",
                  cfg.out_root().c_str());
      return 0;
    }
    if (attr_cmd->parsed()) {
      const auto cfg = load_config(attr_o);
      auto [model, det] = load_artifact(cfg, "detector.bin");
      if (det.empty()) throw IoError("detector.bin holds no fitted detector");
      const auto train = load_source(cfg.train_data, nullptr, cfg.seed);
      const auto test = load_source(cfg.test_data, nullptr, cfg.seed);
      if (attr_index < 0) {
        stage_attribute(cfg, model, det, train, test);
        std::printf("heatmaps written to %s/heatmaps\n",
                    cfg.out_root().c_str());
        return 0;
      }
      ImageDataset query;
      if (attr_source == "test") {
        query = test;
      } else {
        if (cfg.ood.empty()) throw ConfigError("config lists no OoD source");
        query = load_source(cfg.ood.front(), &test, cfg.seed);
      }
      if (attr_index >= query.count())
        throw ArgumentError("index out of range");
      const auto pred =
          predict(model, VecF(query.images.col(attr_index)),
                  std::uint64_t(attr_index));
      RelevanceMap map = relevance(det, model, pred.trace, pred.label);
      to_heatmap(map, model, cfg.depth_agg);
      const VizRange range = heatmap_range(det, model, train, 100,
                                           hash2(cfg.seed, 0xA77),
                                           cfg.depth_agg);
      fs::create_directories(cfg.out_root() + "/heatmaps");
      const std::string stem = cfg.out_root() + "/heatmaps/" + query.name +
                               "_" + std::to_string(attr_index);
      write_pgm(stem + ".pgm", map.rendered, range);
      write_matrix_csv(stem + ".csv", map.rendered);
      std::printf("%s.pgm predicted=%d score_margin=%.6f\n", stem.c_str(),
                  map.predicted_label, map.score_margin);
      return 0;
    }
    if (cmp_cmd->parsed()) {
      stage_compare(cmp_tables, cmp_out, cmp_seed);
      std::printf("comparison written to %s\n", cmp_out.c_str());
      return 0;
    }
    if (enc_cmd->parsed()) {
      const auto cfg = load_config(enc_o);
      const auto test = load_source(cfg.test_data, nullptr, cfg.seed);
      if (enc_index < 0 || enc_index >= test.count())
        throw ArgumentError("index out of range");
      const auto raster = poisson_encode<float>(
          VecF(test.images.col(enc_index)), cfg.encoder,
          std::uint64_t(enc_index));
      std::ostream* out = &std::cout;
      std::ofstream file;
      if (!enc_out.empty()) {
        file.open(enc_out);
        if (!file) throw IoError("cannot open " + enc_out);
        out = &file;
      }
      for (Eigen::Index t = 0; t < raster.rows(); ++t) {
        for (Eigen::Index d = 0; d < raster.cols(); ++d)
          (*out) << int(raster(t, d)) << (d + 1 < raster.cols() ? "," : "");
        (*out) << "\n";
      }
      return 0;
    }
    if (synth_cmd->parsed()) {
      if (synth_kind != "digits" && synth_kind != "letters" &&
          synth_kind != "shapes")
        throw ArgumentError("--kind must be digits, letters or shapes");
      const GlyphSet set = synth_kind == "digits"    ? GlyphSet::Digits
                           : synth_kind == "letters" ? GlyphSet::Letters
                                                     : GlyphSet::Shapes;
      const auto ds = make_glyph_dataset(set, synth_count, synth_seed,
                                         synth_kind);
      write_idx(ds, synth_images, synth_labels);
      std::printf("wrote %d %s glyphs to %s / %s\n", synth_count,
                  synth_kind.c_str(), synth_images.c_str(),
                  synth_labels.c_str());
      return 0;
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.stage);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
