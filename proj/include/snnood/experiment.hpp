#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snnood/attribution.hpp"
#include "snnood/dataset.hpp"
#include "snnood/network.hpp"
#include "snnood/scp_detector.hpp"
#include "snnood/training.hpp"
#include "snnood/types.hpp"

namespace snnood {

/// Stage-tagged process exit codes.
enum class Stage : int {
  Ok = 0,
  Config = 2,
  Data = 3,
  Train = 4,
  Detector = 5,
  Scoring = 6,
  Attribution = 7,
  Compare = 8,
};

struct StageError : Error {
  Stage stage;
  StageError(Stage s, const std::string& what) : Error(what), stage(s) {}
};

/// Source of one dataset: an IDX pair on disk or a synthetic glyph set.
struct DataSource {
  std::string name;
  std::string images_path, labels_path;  // IDX pair, or
  std::string synthetic;                 // "digits" / "letters"
  int count = 0;                         // synthetic size
  bool square_from_test = false;         // square-stamped copy of the test set
  int subset = 0;                        // optional stratified subsample
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int class_count = 10;

  std::vector<LayerDesc> architecture;
  EncoderConfig encoder;
  LifParams<float> neuron;

  DataSource train_data;
  DataSource test_data;
  std::vector<DataSource> ood;

  TrainConfig train;
  ScpConfig detector;
  std::vector<std::string> detectors = {"scp", "msp", "odin", "energy"};

  int attribution_count = 8;
  DepthAgg depth_agg = DepthAgg::Mean;
  int jobs = 1;

  std::string out_root() const { return output_dir + "/" + name; }

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
  void validate() const;
};

/// Loads (or synthesizes) a data source, applying the optional subsample.
ImageDataset load_source(const DataSource& src, const ImageDataset* test,
                         std::uint64_t seed);

/// Pipeline stages. Each writes its artifacts under cfg.out_root().
NetworkModel<float> stage_train(const ExperimentConfig& cfg,
                                const ImageDataset& train);
ScpDetector stage_fit_detector(const ExperimentConfig& cfg,
                               const NetworkModel<float>& model,
                               const ImageDataset& train);
void stage_scores_and_metrics(const ExperimentConfig& cfg,
                              const NetworkModel<float>& model,
                              const ScpDetector& det,
                              const ImageDataset& test);
void stage_attribute(const ExperimentConfig& cfg,
                     const NetworkModel<float>& model, const ScpDetector& det,
                     const ImageDataset& train, const ImageDataset& test);
void stage_compare(const std::vector<std::string>& metric_csvs,
                   const std::string& out_dir, std::uint64_t seed);

/// Runs the full pipeline: train, fit detector, score, evaluate, attribute,
/// compare. Returns the stage exit code; a partially written output tree is
/// flagged with an `.incomplete` marker file.
int run_experiment(const ExperimentConfig& cfg);

/// Batched scoring of a dataset: logits, predicted labels and (optionally)
/// SCP scores for every sample, sample-parallel across `jobs` workers.
struct ScoreRows {
  VecI predicted;
  MatD logits;     // class_count x N
  VecD scp_score;  // empty if no detector given
};
ScoreRows score_dataset(const NetworkModel<float>& model,
                        const ScpDetector* det, const ImageDataset& ds,
                        int jobs);

}  // namespace snnood
