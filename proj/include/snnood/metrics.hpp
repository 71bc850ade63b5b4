#pragma once

#include <cstdint>
#include <vector>

#include "snnood/types.hpp"

namespace snnood {

/// Scored detection outcomes. Scores are oriented higher-is-more-OoD;
/// in-distribution is the positive class everywhere.
struct ScoredSet {
  VecD scores;
  std::vector<bool> is_id;

  void validate() const;  // equal lengths, both classes present
};

/// Probability that a random ID sample scores lower than a random OoD
/// sample, ties counted one half (rank-sum formulation).
double auroc(const ScoredSet& s);

/// Area under precision-recall with ID as positive, step-wise interpolation
/// over the distinct score thresholds (ascending; positive means score <= t).
double aupr(const ScoredSet& s);

/// FPR at the smallest threshold whose TPR reaches `target_tpr`.
double fpr_at_tpr(const ScoredSet& s, double target_tpr);

}  // namespace snnood
