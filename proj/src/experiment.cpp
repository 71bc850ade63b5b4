#include "snnood/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "snnood/artifact_store.hpp"
#include "snnood/baselines.hpp"
#include "snnood/metrics.hpp"
#include "snnood/stats.hpp"
#include "snnood/synthetic.hpp"

namespace snnood {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

LayerDesc parse_layer(const json& jl) {
  const std::string kind = jl.at("kind").get<std::string>();
  LayerDesc d;
  if (kind == "fc") {
    d.kind = LayerKind::FullyConnected;
    d.units = jl.at("width").get<int>();
    d.v_th = jl.value("v_th", 0.25);
  } else if (kind == "conv") {
    d.kind = LayerKind::Conv2d;
    d.units = jl.at("filters").get<int>();
    d.v_th = jl.value("v_th", 0.2);
  } else if (kind == "avgpool") {
    d.kind = LayerKind::AvgPool;
  } else if (kind == "flatten") {
    d.kind = LayerKind::Flatten;
  } else if (kind == "readout") {
    d.kind = LayerKind::Readout;
    d.units = jl.value("width", 0);
  } else {
    throw ConfigError("unknown layer kind: " + kind);
  }
  return d;
}

DataSource parse_source(const json& js, const std::string& default_name) {
  DataSource s;
  s.name = js.value("name", default_name);
  s.images_path = js.value("images", "");
  s.labels_path = js.value("labels", "");
  s.synthetic = js.value("synthetic", "");
  s.count = js.value("count", 0);
  s.square_from_test = js.value("square_from_test", false);
  s.subset = js.value("subset", 0);
  return s;
}

void check_source(const DataSource& s, bool allow_square) {
  int modes = 0;
  if (!s.images_path.empty()) ++modes;
  if (!s.synthetic.empty()) ++modes;
  if (s.square_from_test) ++modes;
  if (modes != 1)
    throw ConfigError("data source '" + s.name +
                      "' must give exactly one of images/synthetic/"
                      "square_from_test");
  if (s.square_from_test && !allow_square)
    throw ConfigError("square_from_test is only valid for OoD sources");
  if (!s.images_path.empty()) {
    if (s.labels_path.empty())
      throw ConfigError("source '" + s.name + "' is missing labels");
    if (!fs::exists(s.images_path))
      throw ConfigError("missing file: " + s.images_path);
    if (!fs::exists(s.labels_path))
      throw ConfigError("missing file: " + s.labels_path);
  }
  if (!s.synthetic.empty()) {
    if (s.synthetic != "digits" && s.synthetic != "letters" &&
        s.synthetic != "shapes")
      throw ConfigError(
          "synthetic source must be 'digits', 'letters' or 'shapes'");
    if (s.count < 1)
      throw ConfigError("synthetic source '" + s.name + "' needs a count");
  }
}

std::string fpr_label(double target_tpr) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "fpr%d",
                static_cast<int>(std::lround(target_tpr * 100.0)));
  return buf;
}

void write_line(std::ofstream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i)
    out << fields[i] << (i + 1 < fields.size() ? "," : "");
  out << "\n";
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.name = j.value("name", "experiment");
  if (!j.contains("seed"))
    throw ConfigError("config must state an explicit seed");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("SNNOOD_SEED"))
    cfg.seed = std::strtoull(env, nullptr, 10);
  cfg.output_dir = j.value("output_dir", "out");
  cfg.class_count = j.value("class_count", 10);

  for (const auto& jl : j.at("architecture"))
    cfg.architecture.push_back(parse_layer(jl));

  if (j.contains("encoder")) {
    const auto& je = j.at("encoder");
    cfg.encoder.r_max = je.value("r_max", cfg.encoder.r_max);
    cfg.encoder.delta_t = je.value("delta_t", cfg.encoder.delta_t);
    cfg.encoder.sim_time = je.value("sim_time", cfg.encoder.sim_time);
  }
  cfg.encoder.seed = hash2(cfg.seed, 0xE11C);

  if (j.contains("neuron")) {
    const auto& jn = j.at("neuron");
    cfg.neuron.tau_mem = jn.value("tau_mem", 0.005f);
    cfg.neuron.tau_syn = jn.value("tau_syn", 0.01f);
    cfg.neuron.v_leak = jn.value("v_leak", 0.0f);
    cfg.neuron.v_reset = jn.value("v_reset", 0.0f);
  }

  cfg.train_data = parse_source(j.at("data").at("train"), "train");
  cfg.test_data = parse_source(j.at("data").at("test"), "test");
  if (j.contains("ood"))
    for (const auto& jo : j.at("ood"))
      cfg.ood.push_back(parse_source(jo, "ood"));

  if (j.contains("train")) {
    const auto& jt = j.at("train");
    cfg.train.epochs = jt.value("epochs", cfg.train.epochs);
    cfg.train.learning_rate = jt.value("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = jt.value("batch_size", cfg.train.batch_size);
    cfg.train.surrogate_beta =
        jt.value("surrogate_beta", cfg.train.surrogate_beta);
    cfg.train.adam_beta1 = jt.value("adam_beta1", cfg.train.adam_beta1);
    cfg.train.adam_beta2 = jt.value("adam_beta2", cfg.train.adam_beta2);
    cfg.train.adam_eps = jt.value("adam_eps", cfg.train.adam_eps);
  }
  cfg.train.seed = hash2(cfg.seed, 0x7124);

  if (j.contains("detector")) {
    const auto& jd = j.at("detector");
    cfg.detector.per_class = jd.value("per_class", cfg.detector.per_class);
    cfg.detector.target_tpr = jd.value("target_tpr", cfg.detector.target_tpr);
    cfg.detector.max_clusters =
        jd.value("max_clusters", cfg.detector.max_clusters);
  }
  cfg.detector.seed = hash2(cfg.seed, 0xDE7);

  if (j.contains("detectors"))
    cfg.detectors = j.at("detectors").get<std::vector<std::string>>();
  if (j.contains("attribution")) {
    cfg.attribution_count = j.at("attribution").value("count", 8);
    const std::string agg = j.at("attribution").value("depth_agg", "mean");
    if (agg == "mean")
      cfg.depth_agg = DepthAgg::Mean;
    else if (agg == "sum")
      cfg.depth_agg = DepthAgg::Sum;
    else
      throw ConfigError("depth_agg must be 'mean' or 'sum'");
  }
  cfg.jobs = j.value("jobs", 1);
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (architecture.empty()) throw ConfigError("architecture is empty");
  if (architecture.back().kind != LayerKind::Readout)
    throw ConfigError("last architecture layer must be the readout");
  if (architecture.back().units != 0 &&
      architecture.back().units != class_count)
    throw ConfigError("readout width " +
                      std::to_string(architecture.back().units) +
                      " does not match class count " +
                      std::to_string(class_count));
  encoder.validate();
  train.validate();
  detector.validate();
  check_source(train_data, false);
  check_source(test_data, false);
  for (const auto& o : ood) check_source(o, true);
  for (const auto& d : detectors)
    if (d != "scp" && d != "msp" && d != "odin" && d != "energy")
      throw ConfigError("unknown detector: " + d);
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

ImageDataset load_source(const DataSource& src, const ImageDataset* test,
                         std::uint64_t seed) {
  ImageDataset ds;
  if (src.square_from_test) {
    if (test == nullptr)
      throw ConfigError("square_from_test needs the test set");
    ds = make_mnist_square(*test, hash2(seed, 0x59));
    ds.name = src.name;
  } else if (!src.synthetic.empty()) {
    const GlyphSet set = src.synthetic == "digits"    ? GlyphSet::Digits
                         : src.synthetic == "letters" ? GlyphSet::Letters
                                                      : GlyphSet::Shapes;
    ds = make_glyph_dataset(
        set, src.count,
        hash3(seed, 0x917, std::uint64_t(static_cast<int>(set))), src.name);
  } else {
    ds = load_idx(src.images_path, src.labels_path, src.name);
  }
  if (src.subset > 0 && src.subset < ds.count())
    ds = stratified_sample(ds, src.subset, hash3(seed, 0x5B, ds.count()));
  return ds;
}

ScoreRows score_dataset(const NetworkModel<float>& model,
                        const ScpDetector* det, const ImageDataset& ds,
                        int jobs) {
  const int n = ds.count();
  ScoreRows rows;
  rows.predicted.resize(n);
  rows.logits.resize(model.class_count, n);
  if (det != nullptr) rows.scp_score.resize(n);

  // Fixed-size blocks keep the batched arithmetic identical for every value
  // of `jobs`, so the scores do not depend on the worker count.
  constexpr int kChunk = 128;
  const int n_blocks = (n + kChunk - 1) / kChunk;

  auto worker = [&](int block_begin, int block_end) {
    MatF batch;
    std::vector<std::uint64_t> keys;
    for (int blk = block_begin; blk < block_end; ++blk) {
      const int start = blk * kChunk;
      const int bsz = std::min(kChunk, n - start);
      batch.resize(ds.dim(), bsz);
      keys.resize(std::size_t(bsz));
      for (int j = 0; j < bsz; ++j) {
        batch.col(j) = ds.images.col(start + j);
        keys[std::size_t(j)] = std::uint64_t(start + j);
      }
      const auto out = forward_batch(model, batch, keys.data(), det != nullptr);
      for (int j = 0; j < bsz; ++j) {
        rows.predicted[start + j] = out.labels[j];
        rows.logits.col(start + j) = out.logits.col(j).cast<double>();
        if (det != nullptr)
          rows.scp_score[start + j] =
              ood_score(*det, VecD(out.counts.col(j)), out.labels[j]);
      }
    }
  };

  if (jobs <= 1 || n_blocks < 2) {
    worker(0, n_blocks);
  } else {
    std::vector<std::thread> pool;
    const int workers = std::min(jobs, n_blocks);
    const int per = (n_blocks + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * per;
      const int end = std::min(n_blocks, begin + per);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  return rows;
}

NetworkModel<float> stage_train(const ExperimentConfig& cfg,
                                const ImageDataset& train) {
  auto model = build_network<float>(train.height, train.width,
                                    cfg.architecture, cfg.class_count,
                                    cfg.encoder, cfg.neuron);
  init_weights(model, hash2(cfg.seed, 0x11A7));
  const auto stats = fit_classifier(model, train, cfg.train);

  fs::create_directories(cfg.out_root());
  std::ofstream log(cfg.out_root() + "/train_log.csv");
  log << "epoch,loss,accuracy\n";
  for (std::size_t e = 0; e < stats.size(); ++e)
    log << e << "," << fmt(stats[e].mean_loss) << ","
        << fmt(stats[e].accuracy) << "\n";

  persist({cfg.out_root() + "/model.bin"}, model, ScpDetector{});
  return model;
}

ScpDetector stage_fit_detector(const ExperimentConfig& cfg,
                               const NetworkModel<float>& model,
                               const ImageDataset& train) {
  const ScpDetector det = fit_scp(model, train, cfg.detector);
  fs::create_directories(cfg.out_root());
  persist({cfg.out_root() + "/detector.bin"}, model, det);
  return det;
}

namespace {

struct PairMetrics {
  std::map<std::string, double> auroc_by_det, aupr_by_det, fpr_by_det;
};

PairMetrics evaluate_pair(const ExperimentConfig& cfg, const ScoreRows& id_rows,
                          const ScoreRows& ood_rows, const std::string& csv) {
  const int n_id = static_cast<int>(id_rows.predicted.size());
  const int n_ood = static_cast<int>(ood_rows.predicted.size());
  const int n = n_id + n_ood;

  std::ofstream out(csv);
  if (!out) throw IoError("cannot open " + csv + " for writing");
  out << "sample_id,detector,score,is_id\n";

  PairMetrics pm;
  ScoredSet set;
  set.scores.resize(n);
  set.is_id.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) set.is_id[std::size_t(i)] = i < n_id;

  auto emit = [&](const std::string& det, const VecD& scores) {
    for (int i = 0; i < n; ++i)
      write_line(out, {std::to_string(i < n_id ? i : i - n_id), det,
                       fmt(scores[i]), i < n_id ? "1" : "0"});
    set.scores = scores;
    pm.auroc_by_det[det] = auroc(set);
    pm.aupr_by_det[det] = aupr(set);
    pm.fpr_by_det[det] = fpr_at_tpr(set, cfg.detector.target_tpr);
  };

  for (const std::string& name : cfg.detectors) {
    VecD scores(n);
    if (name == "scp") {
      scores << id_rows.scp_score, ood_rows.scp_score;
    } else if (name == "msp") {
      for (int i = 0; i < n; ++i) {
        const auto& rows = i < n_id ? id_rows : ood_rows;
        const int j = i < n_id ? i : i - n_id;
        scores[i] = msp_score(
            LogitRecord{rows.logits.col(j), rows.predicted[j]});
      }
    } else {  // odin / energy with the temperature swept per pairing
      double best_auroc = -1.0;
      VecD best_scores;
      for (double T : kTemperatureGrid) {
        VecD s(n);
        for (int i = 0; i < n; ++i) {
          const auto& rows = i < n_id ? id_rows : ood_rows;
          const int j = i < n_id ? i : i - n_id;
          const LogitRecord rec{rows.logits.col(j), rows.predicted[j]};
          s[i] = name == "odin" ? odin_score(rec, T) : energy_score(rec, T);
        }
        set.scores = s;
        const double a = auroc(set);
        if (a > best_auroc) {
          best_auroc = a;
          best_scores = s;
        }
      }
      scores = best_scores;
    }
    emit(name, scores);
  }
  return pm;
}

}  // namespace

void stage_scores_and_metrics(const ExperimentConfig& cfg,
                              const NetworkModel<float>& model,
                              const ScpDetector& det,
                              const ImageDataset& test) {
  fs::create_directories(cfg.out_root() + "/scores");
  const bool want_scp =
      std::find(cfg.detectors.begin(), cfg.detectors.end(), "scp") !=
      cfg.detectors.end();
  const ScoreRows id_rows =
      score_dataset(model, want_scp ? &det : nullptr, test, cfg.jobs);

  // Per-sample SCP decisions against the calibrated class thresholds.
  auto write_decisions = [&](const ScoreRows& rows, const std::string& name) {
    if (!want_scp) return;
    std::ofstream dec(cfg.out_root() + "/scores/decisions_" + name + ".csv");
    dec << "sample_id,predicted,score,lambda,decision\n";
    for (int i = 0; i < static_cast<int>(rows.predicted.size()); ++i) {
      const int p = rows.predicted[i];
      const double s = rows.scp_score[i];
      write_line(dec,
                 {std::to_string(i), std::to_string(p), fmt(s),
                  fmt(det.thresholds[p]),
                  decide(det, s, p) == Decision::OutOfDistribution ? "ood"
                                                                   : "id"});
    }
  };
  write_decisions(id_rows, test.name);

  std::ofstream metrics(cfg.out_root() + "/metrics.csv");
  metrics << "id_dataset,ood_dataset";
  const std::string fl = fpr_label(cfg.detector.target_tpr);
  for (const auto& d : cfg.detectors)
    metrics << "," << d << "_auroc," << d << "_aupr," << d << "_" << fl;
  metrics << "\n";

  for (const auto& src : cfg.ood) {
    const ImageDataset ood = load_source(src, &test, cfg.seed);
    if (ood.dim() != test.dim())
      throw ConsistencyError("OoD set '" + src.name +
                             "' image size differs from the test set");
    const ScoreRows ood_rows =
        score_dataset(model, want_scp ? &det : nullptr, ood, cfg.jobs);
    write_decisions(ood_rows, ood.name);
    const PairMetrics pm =
        evaluate_pair(cfg, id_rows, ood_rows,
                      cfg.out_root() + "/scores/" + src.name + ".csv");
    metrics << test.name << "," << src.name;
    for (const auto& d : cfg.detectors)
      metrics << "," << fmt(pm.auroc_by_det.at(d)) << ","
              << fmt(pm.aupr_by_det.at(d)) << "," << fmt(pm.fpr_by_det.at(d));
    metrics << "\n";
  }
}

void stage_attribute(const ExperimentConfig& cfg,
                     const NetworkModel<float>& model, const ScpDetector& det,
                     const ImageDataset& train, const ImageDataset& test) {
  if (cfg.attribution_count < 1 || cfg.ood.empty()) return;
  fs::create_directories(cfg.out_root() + "/heatmaps");

  const VizRange range = heatmap_range(det, model, train, 100,
                                       hash2(cfg.seed, 0xA77), cfg.depth_agg);
  std::ofstream info(cfg.out_root() + "/heatmaps/attributions.txt");
  info << "range lo=" << fmt(range.lo) << " hi=" << fmt(range.hi) << "\n";

  const ImageDataset ood = load_source(cfg.ood.front(), &test, cfg.seed);
  int made = 0;
  for (int i = 0; i < ood.count() && made < cfg.attribution_count; ++i) {
    const VecF x = ood.images.col(i);
    const auto pred = predict(model, x, std::uint64_t(i));
    RelevanceMap map = relevance(det, model, pred.trace, pred.label);
    to_heatmap(map, model, cfg.depth_agg);
    const std::string stem =
        cfg.out_root() + "/heatmaps/" + ood.name + "_" + std::to_string(i);
    write_pgm(stem + ".pgm", map.rendered, range);
    write_matrix_csv(stem + ".csv", map.rendered);
    info << stem << ".pgm predicted=" << map.predicted_label
         << " score_margin=" << fmt(map.score_margin) << "\n";
    ++made;
  }
}

void stage_compare(const std::vector<std::string>& metric_csvs,
                   const std::string& out_dir, std::uint64_t seed) {
  // Gather <detector>_auroc columns across all tables; rows must align on
  // (id_dataset, ood_dataset) keys being unique.
  std::vector<std::string> detectors;
  std::vector<std::pair<std::string, std::string>> rows;
  std::vector<std::vector<double>> cells;

  for (const auto& path : metric_csvs) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string header;
    if (!std::getline(in, header))
      throw FormatError("empty metrics file: " + path);
    std::vector<std::string> cols;
    {
      std::stringstream ss(header);
      std::string c;
      while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    std::vector<int> auroc_cols;
    std::vector<std::string> dets;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto pos = cols[i].rfind("_auroc");
      if (pos != std::string::npos && pos + 6 == cols[i].size()) {
        auroc_cols.push_back(static_cast<int>(i));
        dets.push_back(cols[i].substr(0, pos));
      }
    }
    if (detectors.empty())
      detectors = dets;
    else if (detectors != dets)
      throw ConsistencyError("metric tables disagree on detector columns");

    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) fields.push_back(f);
      if (fields.size() != cols.size())
        throw FormatError("ragged metrics row in " + path);
      rows.emplace_back(fields[0], fields[1]);
      std::vector<double> vals;
      for (int ci : auroc_cols) vals.push_back(std::stod(fields[std::size_t(ci)]));
      cells.push_back(vals);
    }
  }
  if (rows.empty()) throw ConsistencyError("no metric rows to compare");

  ComparisonTable table;
  table.rows = rows;
  table.detectors = detectors;
  table.auroc.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(detectors.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < detectors.size(); ++c)
      table.auroc(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          cells[r][c];

  fs::create_directories(out_dir);
  const NemenyiResult nem = nemenyi_cd(table, 0.05);
  {
    std::ofstream out(out_dir + "/ranks.csv");
    out << "detector,avg_rank\n";
    for (std::size_t c = 0; c < detectors.size(); ++c)
      out << detectors[c] << ","
          << fmt(nem.avg_ranks[static_cast<Eigen::Index>(c)]) << "\n";
  }
  {
    std::ofstream out(out_dir + "/critical_distance.csv");
    out << "alpha,k,n,critical_distance\n";
    out << "0.05," << detectors.size() << "," << rows.size() << ","
        << fmt(nem.critical_distance) << "\n";
  }
  {
    std::ofstream out(out_dir + "/sign_tests.csv");
    out << "detector_a,detector_b,p_left,p_rope,p_right\n";
    constexpr double kRope = 0.01;  // one AUROC point on the 0-1 scale
    for (std::size_t a = 0; a < detectors.size(); ++a)
      for (std::size_t b = a + 1; b < detectors.size(); ++b) {
        VecD diffs(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
          diffs[static_cast<Eigen::Index>(r)] =
              cells[r][a] - cells[r][b];
        const auto res = bayesian_sign_test(diffs, kRope, 100000,
                                             hash3(seed, a, b));
        write_line(out, {detectors[a], detectors[b], fmt(res.p_left),
                         fmt(res.p_rope), fmt(res.p_right)});
      }
  }
}

int run_experiment(const ExperimentConfig& cfg) {
  const std::string marker = cfg.out_root() + "/.incomplete";
  Stage stage = Stage::Config;
  try {
    cfg.validate();
    fs::create_directories(cfg.out_root());
    {
      std::ofstream m(marker);
      m << "run in progress\n";
    }

    stage = Stage::Data;
    const ImageDataset train =
        load_source(cfg.train_data, nullptr, cfg.seed);
    const ImageDataset test = load_source(cfg.test_data, nullptr, cfg.seed);
    if (train.class_count != cfg.class_count)
      throw ConsistencyError("training data has " +
                             std::to_string(train.class_count) +
                             " classes, config says " +
                             std::to_string(cfg.class_count));

    stage = Stage::Train;
    const NetworkModel<float> model = stage_train(cfg, train);

    stage = Stage::Detector;
    const ScpDetector det = stage_fit_detector(cfg, model, train);

    stage = Stage::Scoring;
    stage_scores_and_metrics(cfg, model, det, test);

    stage = Stage::Attribution;
    stage_attribute(cfg, model, det, train, test);

    stage = Stage::Compare;
    if (cfg.ood.size() >= 2 && cfg.detectors.size() >= 2)
      stage_compare({cfg.out_root() + "/metrics.csv"},
                    cfg.out_root() + "/compare", cfg.seed);

    fs::remove(marker);
    return static_cast<int>(Stage::Ok);
  } catch (const Error& e) {
    std::fprintf(stderr, "stage %d failed: %s\n", static_cast<int>(stage),
                 e.what());
    return static_cast<int>(stage);
  }
}

}  // namespace snnood
