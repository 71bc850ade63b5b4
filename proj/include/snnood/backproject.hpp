#pragma once

#include <vector>

#include "snnood/network.hpp"
#include "snnood/types.hpp"

namespace snnood {

/// Maps a spike-count vector from the last spiking layer back to the input
/// layer by repeated multiplication with the transposed weight matrices,
/// clamping negatives to zero at the end. `weights` is ordered input-first.
VecD backproject(const std::vector<MatD>& weights, const VecD& q);

/// The fully-connected weight chain used for back-projection: every FC
/// matrix from the input layer (the feature-extractor output for conv
/// models) up to and including the last spiking layer. Conv and readout
/// weights are not part of the chain.
template <typename Scalar>
std::vector<MatD> attribution_weights(const NetworkModel<Scalar>& model) {
  std::vector<MatD> chain;
  const int last = model.last_spiking_index();
  for (int i = 0; i <= last; ++i) {
    const auto& l = model.layers[std::size_t(i)];
    if (l.kind == LayerKind::FullyConnected)
      chain.push_back(l.weights.template cast<double>());
  }
  return chain;
}

/// Width of the attribution input layer: the flat image for FC models, the
/// flattened feature-extractor output for conv models.
template <typename Scalar>
int attribution_input_dim(const NetworkModel<Scalar>& model) {
  const auto chain = attribution_weights(model);
  if (!chain.empty()) return static_cast<int>(chain.front().cols());
  return model.last_spiking_width();
}

}  // namespace snnood
