#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnood/types.hpp"

namespace snnood {

struct SignTestResult {
  double p_left = 0.0;   // first method worse by more than the rope
  double p_rope = 0.0;   // practical equivalence
  double p_right = 0.0;  // first method better by more than the rope
};

/// Bayesian sign test over paired score differences. Differences are binned
/// into (< -rope, within +-rope, > rope); a symmetric Dirichlet prior of
/// weight 1 sits on the rope bin (a pseudo-observation at zero). Each of
/// `mc_samples` Dirichlet draws votes for its largest region; the returned
/// triple of vote fractions sums to one and is deterministic per seed.
SignTestResult bayesian_sign_test(const VecD& diffs, double rope,
                                  int mc_samples, std::uint64_t seed);

/// Paired AUROC results: one row per (ID, OoD) dataset pairing, one column
/// per detector.
struct ComparisonTable {
  std::vector<std::pair<std::string, std::string>> rows;
  std::vector<std::string> detectors;
  MatD auroc;  // rows x detectors
};

struct NemenyiResult {
  VecD avg_ranks;  // per detector, 1 = best
  double critical_distance = 0.0;
};

/// Average ranks (ties averaged) and the Nemenyi critical distance
/// q_alpha(k) * sqrt(k(k+1) / 6N) for alpha in {0.05, 0.10}, k <= 10.
NemenyiResult nemenyi_cd(const ComparisonTable& table, double alpha);

}  // namespace snnood
