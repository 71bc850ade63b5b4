#include "snnood/clustering.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "snnood/errors.hpp"

namespace snnood {

double l1_distance(const Eigen::Ref<const VecD>& a,
                   const Eigen::Ref<const VecD>& b) {
  return (a - b).cwiseAbs().sum();
}

namespace {

struct Merge {
  int a, b;  // cluster representatives joined at this step
};

/// Greedy average-linkage merges over a full distance matrix, recorded in
/// merge order. Lance-Williams update keeps the matrix consistent; a
/// nearest-neighbour cache keeps the typical cost quadratic.
std::vector<Merge> linkage(MatD& dist, std::vector<int>& sizes) {
  const int n = static_cast<int>(dist.rows());
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  std::vector<int> nn(static_cast<std::size_t>(n), -1);
  std::vector<double> nn_dist(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::infinity());

  auto refresh_nn = [&](int i) {
    nn[std::size_t(i)] = -1;
    nn_dist[std::size_t(i)] = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i || !alive[std::size_t(j)]) continue;
      if (dist(i, j) < nn_dist[std::size_t(i)]) {
        nn_dist[std::size_t(i)] = dist(i, j);
        nn[std::size_t(i)] = j;
      }
    }
  };
  for (int i = 0; i < n; ++i) refresh_nn(i);

  std::vector<Merge> merges;
  merges.reserve(static_cast<std::size_t>(n - 1));
  for (int step = 0; step < n - 1; ++step) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
      if (alive[std::size_t(i)] && nn[std::size_t(i)] >= 0 &&
          nn_dist[std::size_t(i)] < best_d) {
        best_d = nn_dist[std::size_t(i)];
        best = i;
      }
    int a = best, b = nn[std::size_t(best)];
    if (a > b) std::swap(a, b);
    merges.push_back({a, b});

    // Merge b into a with the average-linkage update.
    const double na = sizes[std::size_t(a)], nb = sizes[std::size_t(b)];
    for (int k = 0; k < n; ++k) {
      if (!alive[std::size_t(k)] || k == a || k == b) continue;
      const double d = (na * dist(a, k) + nb * dist(b, k)) / (na + nb);
      dist(a, k) = d;
      dist(k, a) = d;
    }
    sizes[std::size_t(a)] += sizes[std::size_t(b)];
    alive[std::size_t(b)] = false;
    refresh_nn(a);
    for (int i = 0; i < n; ++i) {
      if (!alive[std::size_t(i)] || i == a) continue;
      if (nn[std::size_t(i)] == a || nn[std::size_t(i)] == b) {
        refresh_nn(i);
      } else if (dist(i, a) < nn_dist[std::size_t(i)]) {
        nn_dist[std::size_t(i)] = dist(i, a);
        nn[std::size_t(i)] = a;
      }
    }
  }
  return merges;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[std::size_t(x)] != x) {
      parent[std::size_t(x)] = parent[std::size_t(parent[std::size_t(x)])];
      x = parent[std::size_t(x)];
    }
    return x;
  }
  void unite(int a, int b) { parent[std::size_t(find(b))] = find(a); }
};

std::vector<int> cut(const std::vector<Merge>& merges, int n, int k) {
  UnionFind uf(n);
  for (int m = 0; m < n - k; ++m)
    uf.unite(merges[std::size_t(m)].a, merges[std::size_t(m)].b);
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<int> assignment(static_cast<std::size_t>(n));
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    if (label[std::size_t(r)] < 0) label[std::size_t(r)] = next++;
    assignment[std::size_t(i)] = label[std::size_t(r)];
  }
  return assignment;
}

}  // namespace

double silhouette_score(const MatD& dist, const std::vector<int>& assignment,
                        int k) {
  const int n = static_cast<int>(dist.rows());
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < n; ++i) ++sizes[std::size_t(assignment[std::size_t(i)])];

  double total = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (int j = 0; j < n; ++j)
      sums[std::size_t(assignment[std::size_t(j)])] += dist(i, j);
    const int own = assignment[std::size_t(i)];
    if (sizes[std::size_t(own)] <= 1) continue;  // singleton contributes 0
    const double a = sums[std::size_t(own)] / (sizes[std::size_t(own)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[std::size_t(c)] == 0) continue;
      b = std::min(b, sums[std::size_t(c)] / sizes[std::size_t(c)]);
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / n;
}

ClusterResult agglomerative_cluster(const MatD& points, int max_clusters) {
  const int n = static_cast<int>(points.cols());
  if (n < 1) throw ArgumentError("clustering requires at least one vector");
  if (max_clusters < 1) throw ArgumentError("max_clusters must be >= 1");
  if (n <= 2) return {std::vector<int>(static_cast<std::size_t>(n), 0), 1};

  MatD dist(n, n);
  dist.setZero();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = l1_distance(points.col(i), points.col(j));
      dist(i, j) = d;
      dist(j, i) = d;
    }
  const MatD original = dist;

  std::vector<int> sizes(static_cast<std::size_t>(n), 1);
  const auto merges = linkage(dist, sizes);

  int best_k = 1;
  double best_sil = 0.0;
  std::vector<int> best_assignment(static_cast<std::size_t>(n), 0);
  for (int k = 2; k <= std::min(max_clusters, n); ++k) {
    const auto assignment = cut(merges, n, k);
    const double sil = silhouette_score(original, assignment, k);
    if (sil > best_sil) {
      best_sil = sil;
      best_k = k;
      best_assignment = assignment;
    }
  }
  return {best_assignment, best_k};
}

}  // namespace snnood
