#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snnood/backproject.hpp"
#include "snnood/clustering.hpp"
#include "snnood/dataset.hpp"
#include "snnood/errors.hpp"
#include "snnood/network.hpp"
#include "snnood/rng.hpp"
#include "snnood/types.hpp"

namespace snnood {

struct ScpConfig {
  int per_class = 1000;     // P: samples per class for each split
  double target_tpr = 0.95;  // calibration acceptance target
  int max_clusters = 10;
  std::uint64_t seed = 7;

  void validate() const {
    if (per_class < 1) throw ArgumentError("per_class must be >= 1");
    if (!(target_tpr > 0.0 && target_tpr < 1.0))
      throw ArgumentError("target_tpr must lie in (0, 1)");
    if (max_clusters < 1) throw ArgumentError("max_clusters must be >= 1");
  }
};

/// Archetypes of one class: centroid spike-count vectors (element-wise
/// lower median of the cluster members), the member lists, and the cached
/// back-projection of each centroid to the input layer.
struct ClassArchetypes {
  MatD centroids;                         // N_L x M
  std::vector<std::vector<int>> members;  // member indices per cluster
  MatD reconstructions;                   // D_in x M (filled at fit time)
};

/// Fitted spike-count-pattern detector: per-class archetypes plus
/// TPR-calibrated per-class score thresholds.
struct ScpDetector {
  std::vector<ClassArchetypes> classes;
  VecD thresholds;  // lambda^c per class
  double target_tpr = 0.95;
  int layer_index = -1;  // index of the last spiking layer in the model
  int count_dim = 0;     // N_L

  bool empty() const { return classes.empty(); }
  int class_count() const { return static_cast<int>(classes.size()); }

  void check_class(int predicted) const {
    if (predicted < 0 || predicted >= class_count() ||
        classes[std::size_t(predicted)].centroids.cols() == 0)
      throw LookupError("no archetypes fitted for class " +
                        std::to_string(predicted));
  }
};

/// Element-wise lower median of the columns of `m` (the element at sorted
/// index ceil(n/2)-1), which keeps integer counts integral.
inline VecD lower_median(const MatD& m) {
  const Eigen::Index n = m.cols();
  if (n == 0) throw ArgumentError("median of an empty set");
  VecD out(m.rows());
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < n; ++c)
      buf[std::size_t(c)] = m(r, c);
    std::nth_element(buf.begin(), buf.begin() + (n - 1) / 2, buf.end());
    out[r] = buf[std::size_t((n - 1) / 2)];
  }
  return out;
}

/// Smallest observed score accepting at least `target_tpr` of the
/// calibration scores (95th-percentile convention).
inline double calibrate_threshold(std::vector<double> scores,
                                  double target_tpr) {
  if (scores.empty()) throw ArgumentError("no calibration scores");
  std::sort(scores.begin(), scores.end());
  const std::size_t n = scores.size();
  const std::size_t rank = static_cast<std::size_t>(
      std::max<long long>(1, static_cast<long long>(
                                 std::ceil(target_tpr * double(n)))));
  return scores[std::min(rank, n) - 1];
}

/// Minimum L1 distance from a query count vector to the archetypes of its
/// predicted class; higher means more out-of-distribution.
inline double ood_score(const ScpDetector& det, const VecD& counts,
                        int predicted) {
  det.check_class(predicted);
  if (counts.size() != det.count_dim)
    throw ShapeError("count vector width does not match the detector");
  const MatD& cents = det.classes[std::size_t(predicted)].centroids;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < cents.cols(); ++m)
    best = std::min(best, l1_distance(counts, cents.col(m)));
  return best;
}

/// Index of the closest archetype of the predicted class (latent space).
inline int closest_centroid(const ScpDetector& det, const VecD& counts,
                            int predicted) {
  det.check_class(predicted);
  const MatD& cents = det.classes[std::size_t(predicted)].centroids;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < cents.cols(); ++m) {
    const double d = l1_distance(counts, cents.col(m));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(m);
    }
  }
  return best;
}

template <typename Scalar>
double ood_score(const ScpDetector& det, const ForwardTrace<Scalar>& trace,
                 int predicted) {
  return ood_score(det, trace_counts(trace), predicted);
}

enum class Decision { InDistribution, OutOfDistribution };

/// A sample is out-of-distribution iff its score exceeds the class
/// threshold (the boundary itself counts as in-distribution).
inline Decision decide(const ScpDetector& det, double score, int predicted) {
  det.check_class(predicted);
  return score > det.thresholds[predicted] ? Decision::OutOfDistribution
                                           : Decision::InDistribution;
}

namespace detail {

/// Scans the dataset in a seeded random order, collecting up to `per_split`
/// spike-count vectors per predicted class into each of two disjoint splits.
template <typename Scalar>
void collect_splits(const NetworkModel<Scalar>& model, const ImageDataset& ds,
                    int per_split, std::uint64_t seed, int n_splits,
                    std::vector<std::vector<MatD>>& splits) {
  model.validate();
  if (model.last_spiking_index() < 0)
    throw ConfigError("SCP detector requires at least one spiking layer");
  const int c = model.class_count;
  const int width = model.last_spiking_width();
  const int n = ds.count();

  std::vector<std::vector<std::vector<VecD>>> collected{
      std::size_t(n_splits), std::vector<std::vector<VecD>>(std::size_t(c))};
  std::vector<long> missing(std::size_t(n_splits), long(c) * per_split);

  const auto order = shuffled_indices(std::size_t(n), hash2(seed, 0xC0));
  constexpr int kChunk = 256;
  Mat<Scalar> batch_x;
  std::vector<std::uint64_t> keys;
  long remaining = 0;
  for (const auto& m : missing) remaining += m;

  for (int start = 0; start < n && remaining > 0; start += kChunk) {
    const int bsz = std::min(kChunk, n - start);
    batch_x.resize(ds.dim(), bsz);
    keys.resize(std::size_t(bsz));
    for (int j = 0; j < bsz; ++j) {
      const int idx = static_cast<int>(order[std::size_t(start + j)]);
      batch_x.col(j) = ds.images.col(idx).cast<Scalar>();
      keys[std::size_t(j)] = std::uint64_t(idx);
    }
    const auto out = forward_batch(model, batch_x, keys.data(), true);
    for (int j = 0; j < bsz; ++j) {
      const int pred = out.labels[j];
      for (int s = 0; s < n_splits; ++s) {
        auto& bucket = collected[std::size_t(s)][std::size_t(pred)];
        if (static_cast<int>(bucket.size()) < per_split) {
          bucket.push_back(out.counts.col(j));
          --missing[std::size_t(s)];
          --remaining;
          break;
        }
      }
    }
  }

  splits.assign(std::size_t(n_splits), std::vector<MatD>(std::size_t(c)));
  for (int s = 0; s < n_splits; ++s)
    for (int k = 0; k < c; ++k) {
      const auto& bucket = collected[std::size_t(s)][std::size_t(k)];
      MatD m(width, static_cast<Eigen::Index>(bucket.size()));
      for (std::size_t j = 0; j < bucket.size(); ++j)
        m.col(static_cast<Eigen::Index>(j)) = bucket[j];
      splits[std::size_t(s)][std::size_t(k)] = std::move(m);
    }
}

}  // namespace detail

/// Collects up to P spike-count vectors per predicted class. Throws a
/// FitError naming the first class with no predicted members.
template <typename Scalar>
std::map<int, MatD> collect_class_counts(const NetworkModel<Scalar>& model,
                                         const ImageDataset& ds, int per_class,
                                         std::uint64_t seed) {
  if (per_class < 1) throw ArgumentError("per_class must be >= 1");
  std::vector<std::vector<MatD>> splits;
  detail::collect_splits(model, ds, per_class, seed, 1, splits);
  std::map<int, MatD> out;
  for (int k = 0; k < model.class_count; ++k) {
    if (splits[0][std::size_t(k)].cols() == 0)
      throw FitError("class " + std::to_string(k) +
                     " has no predicted members");
    out[k] = std::move(splits[0][std::size_t(k)]);
  }
  return out;
}

/// Fits the detector: per predicted class, cluster an archetype split of P
/// spike-count vectors (L1 agglomerative), take element-wise median
/// centroids, then calibrate the class threshold on a disjoint P-sized
/// calibration split so a target fraction scores at or below it.
template <typename Scalar>
ScpDetector fit_scp(const NetworkModel<Scalar>& model, const ImageDataset& ds,
                    const ScpConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<MatD>> splits;
  detail::collect_splits(model, ds, cfg.per_class, cfg.seed, 2, splits);
  const int c = model.class_count;

  ScpDetector det;
  det.target_tpr = cfg.target_tpr;
  det.layer_index = model.last_spiking_index();
  det.count_dim = model.last_spiking_width();
  det.classes.resize(std::size_t(c));
  det.thresholds = VecD::Zero(c);

  const auto bp_weights = attribution_weights(model);

  for (int k = 0; k < c; ++k) {
    const MatD& arch = splits[0][std::size_t(k)];
    const MatD& calib = splits[1][std::size_t(k)];
    if (arch.cols() == 0)
      throw FitError("class " + std::to_string(k) +
                     " has no predicted members");
    if (calib.cols() == 0)
      throw FitError("class " + std::to_string(k) +
                     " has no calibration members");

    const ClusterResult clusters =
        agglomerative_cluster(arch, cfg.max_clusters);
    ClassArchetypes& ca = det.classes[std::size_t(k)];
    ca.members.assign(std::size_t(clusters.k), {});
    for (int i = 0; i < static_cast<int>(arch.cols()); ++i)
      ca.members[std::size_t(clusters.assignment[std::size_t(i)])].push_back(i);
    ca.centroids.resize(det.count_dim, clusters.k);
    for (int m = 0; m < clusters.k; ++m) {
      const auto& idx = ca.members[std::size_t(m)];
      MatD sub(det.count_dim, static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j)
        sub.col(static_cast<Eigen::Index>(j)) = arch.col(idx[j]);
      ca.centroids.col(m) = lower_median(sub);
    }
    ca.reconstructions.resize(
        bp_weights.empty() ? det.count_dim : bp_weights.front().cols(),
        clusters.k);
    for (int m = 0; m < clusters.k; ++m) {
      // Rounded through float so the persisted 32-bit arrays restore the
      // detector bit-exactly.
      const VecD rec = backproject(bp_weights, VecD(ca.centroids.col(m)));
      const VecF rec32 = rec.cast<float>();
      ca.reconstructions.col(m) = rec32.cast<double>();
    }

    std::vector<double> scores(static_cast<std::size_t>(calib.cols()));
    for (Eigen::Index j = 0; j < calib.cols(); ++j)
      scores[std::size_t(j)] = ood_score(det, VecD(calib.col(j)), k);
    det.thresholds[k] = calibrate_threshold(std::move(scores), cfg.target_tpr);
  }
  return det;
}

}  // namespace snnood
