#pragma once

#include <array>
#include <cmath>

#include "snnood/errors.hpp"
#include "snnood/types.hpp"

namespace snnood {

/// One classified sample's logits. `predicted` is always the argmax
/// (lowest index on ties).
struct LogitRecord {
  VecD logits;
  int predicted = 0;

  static LogitRecord from_logits(VecD l) {
    LogitRecord r;
    int best = 0;
    for (Eigen::Index c = 1; c < l.size(); ++c)
      if (l[c] > l[best]) best = static_cast<int>(c);
    r.logits = std::move(l);
    r.predicted = best;
    return r;
  }
};

// All scores share one orientation: higher means more out-of-distribution.

/// Negated maximum softmax probability.
inline double msp_score(const LogitRecord& r) {
  if (!r.logits.allFinite()) throw ArgumentError("non-finite logits");
  const double mx = r.logits.maxCoeff();
  const double denom = (r.logits.array() - mx).exp().sum();
  return -1.0 / denom;  // max softmax entry is exp(0)/denom
}

/// Temperature-scaled negated max softmax; reduces to msp_score at T = 1.
inline double odin_score(const LogitRecord& r, double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be > 0");
  LogitRecord scaled;
  scaled.logits = r.logits / temperature;
  scaled.predicted = r.predicted;
  return msp_score(scaled);
}

/// Energy score -T log sum exp(logit / T), via max-subtracted logsumexp.
inline double energy_score(const LogitRecord& r, double temperature) {
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be > 0");
  if (!r.logits.allFinite()) throw ArgumentError("non-finite logits");
  const VecD scaled = r.logits / temperature;
  const double mx = scaled.maxCoeff();
  const double lse = mx + std::log((scaled.array() - mx).exp().sum());
  return -temperature * lse;
}

/// Temperatures swept for ODIN and the energy score; the best AUROC per
/// dataset pairing is reported.
inline constexpr std::array<double, 6> kTemperatureGrid = {1.0,   2.0,  5.0,
                                                           10.0, 100.0, 1000.0};

}  // namespace snnood
