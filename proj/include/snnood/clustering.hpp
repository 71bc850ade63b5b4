#pragma once

#include <vector>

#include "snnood/types.hpp"

namespace snnood {

struct ClusterResult {
  std::vector<int> assignment;  // cluster id per point, 0..k-1
  int k = 0;
};

/// Manhattan distance between two columns.
double l1_distance(const Eigen::Ref<const VecD>& a,
                   const Eigen::Ref<const VecD>& b);

/// Bottom-up agglomerative clustering of the columns of `points` under the
/// L1 metric with average linkage. The cluster count is picked in
/// {1..max_clusters} by maximal L1 silhouette; if no split scores positive
/// (or there are at most two points) a single cluster is returned.
ClusterResult agglomerative_cluster(const MatD& points, int max_clusters);

/// Mean silhouette of an assignment given a precomputed distance matrix.
/// Singleton clusters contribute 0.
double silhouette_score(const MatD& dist, const std::vector<int>& assignment,
                        int k);

}  // namespace snnood
