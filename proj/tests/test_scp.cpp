#include <doctest.h>

#include <algorithm>
#include <limits>

#include "snnood/scp_detector.hpp"
#include "snnood/synthetic.hpp"
#include "snnood/training.hpp"

using namespace snnood;

namespace {

EncoderConfig small_encoder() {
  EncoderConfig cfg;
  cfg.sim_time = 0.02;
  cfg.seed = 31;
  return cfg;
}

/// Detector built by hand around explicit centroids for one class.
ScpDetector manual_detector(const MatD& centroids, double lambda) {
  ScpDetector det;
  det.count_dim = static_cast<int>(centroids.rows());
  det.layer_index = 0;
  det.target_tpr = 0.95;
  det.classes.resize(1);
  det.classes[0].centroids = centroids;
  det.classes[0].reconstructions = centroids;  // identity chain
  det.thresholds = VecD::Constant(1, lambda);
  return det;
}

}  // namespace

TEST_CASE("spike counts are the column sums of the raster") {
  // Three hand-built rasters: counts must match sums computed by eye.
  ForwardTrace<float> trace;
  MatF raster = MatF::Zero(5, 3);
  raster(0, 0) = 1;
  raster(2, 0) = 1;
  raster(4, 0) = 1;  // neuron 0 fires 3 times
  raster(1, 1) = 1;  // neuron 1 fires once
  // neuron 2 never fires
  trace.spikes_per_layer.push_back(raster);
  trace.readout_voltage = MatF::Zero(5, 2);
  const VecD q = trace_counts(trace);
  CHECK(q[0] == 3.0);
  CHECK(q[1] == 1.0);
  CHECK(q[2] == 0.0);
}

TEST_CASE("lower median keeps centroids integral and robust") {
  MatD members(2, 3);
  members.col(0) << 1, 2;
  members.col(1) << 3, 2;
  members.col(2) << 100, 2;
  const VecD med = lower_median(members);
  CHECK(med[0] == 3.0);  // outlier has no pull
  CHECK(med[1] == 2.0);

  MatD even(1, 4);
  even << 1, 2, 3, 4;
  CHECK(lower_median(even)[0] == 2.0);  // lower of the middle pair

  MatD pair(1, 2);
  pair << 5, 9;
  CHECK(lower_median(pair)[0] == 5.0);
}

TEST_CASE("median centroid shifts by exactly k under a constant shift") {
  MatD members(3, 5);
  SplitMix rng(4);
  for (int i = 0; i < members.size(); ++i)
    members.data()[i] = double(rng.below(50));
  const VecD base = lower_median(members);
  const VecD shifted = lower_median((members.array() + 17.0).matrix());
  CHECK((shifted - base).isConstant(17.0));
}

TEST_CASE("threshold calibration follows the percentile rule") {
  std::vector<double> scores;
  for (int i = 1; i <= 100; ++i) scores.push_back(double(i));
  CHECK(calibrate_threshold(scores, 0.95) == 95.0);
  CHECK(calibrate_threshold(scores, 0.80) == 80.0);
  CHECK(calibrate_threshold({0.0, 0.0, 0.0}, 0.95) == 0.0);
  CHECK(calibrate_threshold({7.0}, 0.5) == 7.0);
  CHECK_THROWS_AS(calibrate_threshold({}, 0.95), ArgumentError);
}

TEST_CASE("calibration accepts at least the target fraction, minimally") {
  SplitMix rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 20 + int(rng.below(180));
    std::vector<double> scores(static_cast<std::size_t>(n), 0.0);
    for (auto& s : scores) s = double(rng.below(40));  // heavy ties
    const double lambda = calibrate_threshold(scores, 0.95);
    int at_or_below = 0, strictly_below = 0;
    for (double s : scores) {
      if (s <= lambda) ++at_or_below;
      if (s < lambda) ++strictly_below;
    }
    CHECK(double(at_or_below) / n >= 0.95);
    // Any smaller observed score would miss the target.
    CHECK(double(strictly_below) / n < 0.95);
  }
}

TEST_CASE("ood score is the minimum L1 distance to the class archetypes") {
  MatD cents(2, 2);
  cents.col(0) << 0, 0;
  cents.col(1) << 4, 4;
  const auto det = manual_detector(cents, 1.0);
  VecD q(2);
  q << 1, 2;
  CHECK(ood_score(det, q, 0) == 3.0);

  MatD single(1, 1);
  single << 5;
  const auto det1 = manual_detector(single, 1.0);
  VecD q1(1);
  q1 << 2;
  CHECK(ood_score(det1, q1, 0) == 3.0);

  CHECK(ood_score(det, VecD(cents.col(1)), 0) == 0.0);
}

TEST_CASE("ood score matches a brute-force oracle on small instances") {
  SplitMix rng(12);
  for (int rep = 0; rep < 60; ++rep) {
    const int dim = 2 + int(rng.below(6));
    const int m = 1 + int(rng.below(50));
    MatD cents(dim, m);
    for (int i = 0; i < cents.size(); ++i)
      cents.data()[i] = double(rng.below(30));
    const auto det = manual_detector(cents, 0.0);
    VecD q(dim);
    for (int d = 0; d < dim; ++d) q[d] = double(rng.below(30));

    double oracle = std::numeric_limits<double>::infinity();
    for (int c = 0; c < m; ++c) {
      double dist = 0.0;
      for (int d = 0; d < dim; ++d) dist += std::abs(q[d] - cents(d, c));
      oracle = std::min(oracle, dist);
    }
    CHECK(ood_score(det, q, 0) == oracle);
    CHECK(ood_score(det, q, 0) >= 0.0);
  }
}

TEST_CASE("score is zero only at an archetype") {
  MatD cents(3, 2);
  cents.col(0) << 1, 2, 3;
  cents.col(1) << 4, 4, 4;
  const auto det = manual_detector(cents, 1.0);
  VecD q(3);
  q << 1, 2, 3;
  CHECK(ood_score(det, q, 0) == 0.0);
  q << 1, 2, 4;
  CHECK(ood_score(det, q, 0) > 0.0);
}

TEST_CASE("decision boundary is inclusive on the in-distribution side") {
  MatD cents(1, 1);
  cents << 0;
  auto det = manual_detector(cents, 5.0);
  CHECK(decide(det, 5.0, 0) == Decision::InDistribution);
  CHECK(decide(det, 0.0, 0) == Decision::InDistribution);
  CHECK(decide(det, 5.0000001, 0) == Decision::OutOfDistribution);

  det.thresholds[0] = 0.0;
  CHECK(decide(det, 0.1, 0) == Decision::OutOfDistribution);
}

TEST_CASE("queries against unfitted classes raise lookup errors") {
  MatD cents(2, 1);
  cents.col(0) << 1, 1;
  const auto det = manual_detector(cents, 1.0);
  VecD q(2);
  q << 0, 0;
  CHECK_THROWS_AS(ood_score(det, q, 3), LookupError);
  CHECK_THROWS_AS(decide(det, 0.0, -1), LookupError);
  VecD wrong(3);
  wrong << 0, 0, 0;
  CHECK_THROWS_AS(ood_score(det, wrong, 0), ShapeError);
}

TEST_CASE("a constant predictor fails detector fitting with the class named") {
  // Readout row 0 strongly positive, row 1 negative: always predicts 0.
  auto model = build_network<float>(2, 2,
      std::vector<LayerDesc>{{LayerKind::FullyConnected, 4, 0.05},
                             {LayerKind::Readout, 0, 0.0}},
      2, small_encoder());
  model.layers[0].weights.setConstant(0.5f);
  model.layers[1].weights.row(0).setConstant(1.0f);
  model.layers[1].weights.row(1).setConstant(-1.0f);

  ImageDataset ds;
  ds.height = 2;
  ds.width = 2;
  ds.class_count = 2;
  ds.images = MatF::Constant(4, 40, 0.9f);
  ds.labels.resize(40);
  for (int i = 0; i < 40; ++i) ds.labels[i] = i % 2;

  CHECK_THROWS_WITH_AS(collect_class_counts(model, ds, 5, 1),
                       doctest::Contains("class 1"), FitError);
  ScpConfig cfg;
  cfg.per_class = 5;
  cfg.seed = 1;
  CHECK_THROWS_AS(fit_scp(model, ds, cfg), FitError);
}

TEST_CASE("collect_class_counts returns per-class count matrices") {
  auto model = build_network<float>(2, 2,
      std::vector<LayerDesc>{{LayerKind::FullyConnected, 6, 0.1},
                             {LayerKind::Readout, 0, 0.0}},
      2, small_encoder());
  init_weights(model, 77);

  // Two visibly different intensity patterns so both classes get predicted.
  ImageDataset ds;
  ds.height = 2;
  ds.width = 2;
  ds.class_count = 2;
  const int n = 120;
  ds.images.resize(4, n);
  ds.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.labels[i] = i % 2;
    for (int d = 0; d < 4; ++d)
      ds.images(d, i) = (i % 2 == 0) == (d < 2) ? 0.9f : 0.05f;
  }

  const auto counts = collect_class_counts(model, ds, 10, 3);
  REQUIRE(counts.size() == 2);
  for (const auto& [cls, mat] : counts) {
    CHECK(mat.rows() == 6);
    CHECK(mat.cols() >= 1);
    CHECK(mat.cols() <= 10);
    CHECK((mat.array() >= 0.0).all());
    CHECK((mat.array() <= double(small_encoder().steps())).all());
  }
}

TEST_CASE("fitting on separable data calibrates per-class thresholds") {
  auto model = build_network<float>(2, 4,
      std::vector<LayerDesc>{{LayerKind::FullyConnected, 16, 0.25},
                             {LayerKind::Readout, 0, 0.0}},
      2, small_encoder());
  init_weights(model, 78);

  ImageDataset ds;
  ds.height = 2;
  ds.width = 4;
  ds.class_count = 2;
  const int n = 400;
  ds.images.resize(8, n);
  ds.labels.resize(n);
  SplitMix rng(6);
  for (int i = 0; i < n; ++i) {
    ds.labels[i] = i % 2;
    for (int d = 0; d < 8; ++d) {
      const bool hot = (i % 2 == 0) == (d < 4);
      ds.images(d, i) = float(rng.uniform(hot ? 0.7 : 0.0, hot ? 1.0 : 0.2));
    }
  }
  // Train briefly so predictions track the labels.
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 5;
  fit_classifier(model, ds, tc);

  ScpConfig cfg;
  cfg.per_class = 50;
  cfg.target_tpr = 0.9;
  cfg.seed = 8;
  const auto det = fit_scp(model, ds, cfg);
  CHECK(det.class_count() == 2);
  CHECK(det.count_dim == 16);
  for (int c = 0; c < 2; ++c) {
    CHECK(det.classes[std::size_t(c)].centroids.cols() >= 1);
    CHECK(det.thresholds[c] >= 0.0);
    // Median of integer counts stays integral.
    const MatD& cents = det.classes[std::size_t(c)].centroids;
    for (int i = 0; i < cents.size(); ++i)
      CHECK(cents.data()[i] == std::floor(cents.data()[i]));
  }
}

TEST_CASE("centroids are invariant to the order of the archetype split") {
  SplitMix rng(15);
  MatD pts(4, 30);
  for (int i = 0; i < pts.size(); ++i)
    pts.data()[i] = rng.uniform(0.0, 20.0);

  const auto res = agglomerative_cluster(pts, 5);
  std::vector<VecD> centroids_a;
  for (int k = 0; k < res.k; ++k) {
    std::vector<int> idx;
    for (int i = 0; i < 30; ++i)
      if (res.assignment[std::size_t(i)] == k) idx.push_back(i);
    MatD sub(4, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) sub.col(Eigen::Index(j)) = pts.col(idx[j]);
    centroids_a.push_back(lower_median(sub));
  }

  // Same points, shuffled column order.
  const auto perm = shuffled_indices(30, 99);
  MatD shuffled(4, 30);
  for (int i = 0; i < 30; ++i) shuffled.col(i) = pts.col(perm[std::size_t(i)]);
  const auto res2 = agglomerative_cluster(shuffled, 5);
  REQUIRE(res2.k == res.k);
  std::vector<VecD> centroids_b;
  for (int k = 0; k < res2.k; ++k) {
    std::vector<int> idx;
    for (int i = 0; i < 30; ++i)
      if (res2.assignment[std::size_t(i)] == k) idx.push_back(i);
    MatD sub(4, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      sub.col(Eigen::Index(j)) = shuffled.col(idx[j]);
    centroids_b.push_back(lower_median(sub));
  }

  // The centroid sets must match regardless of input order.
  for (const auto& ca : centroids_a) {
    bool found = false;
    for (const auto& cb : centroids_b) found = found || ca == cb;
    CHECK(found);
  }
}
