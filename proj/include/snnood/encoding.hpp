#pragma once

#include <cmath>
#include <cstdint>

#include "snnood/errors.hpp"
#include "snnood/rng.hpp"
#include "snnood/types.hpp"

namespace snnood {

/// Poisson rate-coding configuration. A normalized feature x fires with
/// probability x * r_max * delta_t at every step of the simulation window.
struct EncoderConfig {
  double r_max = 1000.0;   // spikes per second
  double delta_t = 1e-3;   // seconds per step
  double sim_time = 0.05;  // seconds
  std::uint64_t seed = 0x5eedULL;

  int steps() const {
    return static_cast<int>(std::llround(sim_time / delta_t));
  }

  double spike_prob(double x) const { return x * r_max * delta_t; }

  void validate() const {
    if (!(delta_t > 0.0) || !(sim_time > 0.0) || !(r_max > 0.0))
      throw ConfigError("encoder times and rate must be positive");
    if (r_max * delta_t > 1.0 + 1e-12)
      throw ConfigError("r_max * delta_t exceeds 1: more than one spike per step");
    const double ratio = sim_time / delta_t;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 || steps() < 1)
      throw ConfigError("sim_time must be a positive integer multiple of delta_t");
  }
};

namespace detail {

/// Per-(sample, step) key; one extra mix per feature afterwards.
inline std::uint64_t step_key(std::uint64_t seed, std::uint64_t sample_key,
                              std::uint64_t t) {
  return mix64(hash2(seed, sample_key) ^ (t * 0x9e3779b97f4a7c15ULL));
}

inline bool spike_draw(std::uint64_t step_key, std::uint64_t feature,
                       double prob) {
  return to_unit(mix64(step_key ^ feature)) < prob;
}

}  // namespace detail

/// Encodes a normalized feature vector into a spike raster of shape
/// steps() x D. Each bit is an independent draw determined entirely by
/// (cfg.seed, sample_key, feature, step).
template <typename Scalar>
SpikeRaster<Scalar> poisson_encode(const Vec<Scalar>& x,
                                   const EncoderConfig& cfg,
                                   std::uint64_t sample_key = 0) {
  cfg.validate();
  const Eigen::Index d = x.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(x[i] >= Scalar(0) && x[i] <= Scalar(1)))
      throw ArgumentError("feature " + std::to_string(i) + " outside [0, 1]");
  }
  const int steps = cfg.steps();
  SpikeRaster<Scalar> raster(steps, d);
  for (int t = 0; t < steps; ++t) {
    const std::uint64_t kt =
        detail::step_key(cfg.seed, sample_key, std::uint64_t(t));
    for (Eigen::Index i = 0; i < d; ++i) {
      raster(t, i) = detail::spike_draw(kt, std::uint64_t(i),
                                        cfg.spike_prob(double(x[i])))
                         ? Scalar(1)
                         : Scalar(0);
    }
  }
  return raster;
}

/// Spikes of one simulation step for a whole batch (columns are samples).
/// `probs` holds the per-entry spike probabilities, i.e. X * r_max * delta_t.
template <typename Scalar>
void encode_step(const Mat<Scalar>& probs, const EncoderConfig& cfg,
                 const std::uint64_t* sample_keys, int t, Mat<Scalar>& out) {
  out.resize(probs.rows(), probs.cols());
  for (Eigen::Index b = 0; b < probs.cols(); ++b) {
    const std::uint64_t kt =
        detail::step_key(cfg.seed, sample_keys[b], std::uint64_t(t));
    const Scalar* p = probs.col(b).data();
    Scalar* o = out.col(b).data();
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
      o[i] = detail::spike_draw(kt, std::uint64_t(i), double(p[i]))
                 ? Scalar(1)
                 : Scalar(0);
  }
}

/// Per-feature spike totals of a raster (column sums).
template <typename Scalar>
VecD spike_counts(const SpikeRaster<Scalar>& raster) {
  return raster.template cast<double>().colwise().sum().transpose();
}

}  // namespace snnood
