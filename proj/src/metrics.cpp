#include "snnood/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "snnood/errors.hpp"

namespace snnood {

void ScoredSet::validate() const {
  if (static_cast<std::size_t>(scores.size()) != is_id.size())
    throw ArgumentError("scores and labels differ in length");
  bool any_id = false, any_ood = false;
  for (bool b : is_id) (b ? any_id : any_ood) = true;
  if (!any_id || !any_ood)
    throw MetricError("both classes must be present");
}

double auroc(const ScoredSet& s) {
  s.validate();
  const Eigen::Index n = s.scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return s.scores[a] < s.scores[b];
  });

  // Midranks over tie groups; sum the OoD ranks.
  double ood_rank_sum = 0.0;
  long n_id = 0, n_ood = 0;
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j < n && s.scores[order[std::size_t(j)]] ==
                        s.scores[order[std::size_t(i)]])
      ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
    for (Eigen::Index k = i; k < j; ++k) {
      if (s.is_id[std::size_t(order[std::size_t(k)])]) {
        ++n_id;
      } else {
        ++n_ood;
        ood_rank_sum += midrank;
      }
    }
    i = j;
  }
  // P(id < ood) + 0.5 P(=): Mann-Whitney U of the OoD sample.
  const double u = ood_rank_sum - double(n_ood) * (double(n_ood) + 1.0) / 2.0;
  return u / (double(n_id) * double(n_ood));
}

namespace {

/// Distinct thresholds ascending with cumulative (TP, FP) when declaring
/// positive (= ID) every sample scoring <= threshold.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<long> tp, fp;
  long n_id = 0, n_ood = 0;
};

Sweep sweep_thresholds(const ScoredSet& s) {
  const Eigen::Index n = s.scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return s.scores[a] < s.scores[b];
  });
  Sweep sw;
  long tp = 0, fp = 0;
  Eigen::Index i = 0;
  while (i < n) {
    const double v = s.scores[order[std::size_t(i)]];
    Eigen::Index j = i;
    while (j < n && s.scores[order[std::size_t(j)]] == v) {
      if (s.is_id[std::size_t(order[std::size_t(j)])])
        ++tp;
      else
        ++fp;
      ++j;
    }
    sw.thresholds.push_back(v);
    sw.tp.push_back(tp);
    sw.fp.push_back(fp);
    i = j;
  }
  sw.n_id = tp;
  sw.n_ood = fp;
  return sw;
}

}  // namespace

double aupr(const ScoredSet& s) {
  s.validate();
  const Sweep sw = sweep_thresholds(s);
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < sw.thresholds.size(); ++k) {
    const double recall = double(sw.tp[k]) / double(sw.n_id);
    const double precision =
        double(sw.tp[k]) / double(sw.tp[k] + sw.fp[k]);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

double fpr_at_tpr(const ScoredSet& s, double target_tpr) {
  s.validate();
  if (!(target_tpr > 0.0 && target_tpr <= 1.0))
    throw ArgumentError("target_tpr must lie in (0, 1]");
  const Sweep sw = sweep_thresholds(s);
  for (std::size_t k = 0; k < sw.thresholds.size(); ++k) {
    const double tpr = double(sw.tp[k]) / double(sw.n_id);
    if (tpr >= target_tpr) return double(sw.fp[k]) / double(sw.n_ood);
  }
  return 1.0;  // unreachable: the last threshold accepts everything
}

}  // namespace snnood
