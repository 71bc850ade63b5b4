#include "snnood/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snnood/errors.hpp"
#include "snnood/rng.hpp"

namespace snnood {

SignTestResult bayesian_sign_test(const VecD& diffs, double rope,
                                  int mc_samples, std::uint64_t seed) {
  if (diffs.size() == 0) throw ArgumentError("empty difference vector");
  if (rope < 0.0) throw ArgumentError("rope must be >= 0");
  if (mc_samples < 1000) throw ArgumentError("mc_samples must be >= 1000");

  double alpha[3] = {0.0, 1.0, 0.0};  // prior pseudo-count on the rope bin
  for (Eigen::Index i = 0; i < diffs.size(); ++i) {
    if (diffs[i] < -rope)
      alpha[0] += 1.0;
    else if (diffs[i] > rope)
      alpha[2] += 1.0;
    else
      alpha[1] += 1.0;
  }

  SplitMix rng(hash2(seed, 0xB5));
  long votes[3] = {0, 0, 0};
  for (int s = 0; s < mc_samples; ++s) {
    double g[3];
    for (int r = 0; r < 3; ++r) g[r] = rng.gamma(alpha[r]);
    int best = 0;
    if (g[1] > g[best]) best = 1;
    if (g[2] > g[best]) best = 2;
    ++votes[best];
  }
  return {double(votes[0]) / mc_samples, double(votes[1]) / mc_samples,
          double(votes[2]) / mc_samples};
}

namespace {

// Critical values of the Nemenyi test (studentized range / sqrt(2)).
constexpr double kQ05[] = {0.0,   0.0,   1.960, 2.343, 2.569, 2.728,
                           2.850, 2.949, 3.031, 3.102, 3.164};
constexpr double kQ10[] = {0.0,   0.0,   1.645, 2.052, 2.291, 2.459,
                           2.589, 2.693, 2.780, 2.855, 2.920};

}  // namespace

NemenyiResult nemenyi_cd(const ComparisonTable& table, double alpha) {
  const int k = static_cast<int>(table.detectors.size());
  const int n = static_cast<int>(table.rows.size());
  if (k < 2) throw ArgumentError("need at least two detectors");
  if (n < 2) throw ArgumentError("need at least two rows");
  if (table.auroc.rows() != n || table.auroc.cols() != k)
    throw ArgumentError("ragged comparison table");

  const double* q_table = nullptr;
  if (std::abs(alpha - 0.05) < 1e-12)
    q_table = kQ05;
  else if (std::abs(alpha - 0.10) < 1e-12)
    q_table = kQ10;
  else
    throw ArgumentError("alpha must be 0.05 or 0.10");
  if (k > 10) throw ArgumentError("critical values tabulated up to k = 10");

  NemenyiResult res;
  res.avg_ranks = VecD::Zero(k);
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int r = 0; r < n; ++r) {
    std::iota(order.begin(), order.end(), 0);
    // Rank 1 = highest AUROC; ties get the average of their rank span.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return table.auroc(r, a) > table.auroc(r, b);
    });
    int i = 0;
    while (i < k) {
      int j = i;
      while (j < k && table.auroc(r, order[std::size_t(j)]) ==
                          table.auroc(r, order[std::size_t(i)]))
        ++j;
      const double midrank = 0.5 * double(i + 1 + j);
      for (int t = i; t < j; ++t)
        res.avg_ranks[order[std::size_t(t)]] += midrank;
      i = j;
    }
  }
  res.avg_ranks /= double(n);
  res.critical_distance =
      q_table[k] * std::sqrt(double(k) * (k + 1) / (6.0 * n));
  return res;
}

}  // namespace snnood
