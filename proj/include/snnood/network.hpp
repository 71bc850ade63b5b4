#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snnood/encoding.hpp"
#include "snnood/errors.hpp"
#include "snnood/lif.hpp"
#include "snnood/rng.hpp"
#include "snnood/types.hpp"

namespace snnood {

enum class LayerKind { FullyConnected, Conv2d, AvgPool, Flatten, Readout };

constexpr int kConvKernel = 3;  // 3x3, stride 1, valid padding
constexpr int kPoolSide = 2;    // 2x2, stride 2

/// One layer of the network. Spatial fields are only meaningful for
/// conv/pool layers; weights only for fc/conv/readout.
template <typename Scalar>
struct LayerSpec {
  LayerKind kind = LayerKind::FullyConnected;
  int in_dim = 0;
  int out_dim = 0;
  int in_ch = 0, in_h = 0, in_w = 0;
  int filters = 0, out_h = 0, out_w = 0;
  Mat<Scalar> weights;  // fc/readout: out x in; conv: filters x (in_ch*9)
  LifParams<Scalar> lif;

  bool spiking() const {
    return kind == LayerKind::FullyConnected || kind == LayerKind::Conv2d;
  }
  bool has_weights() const { return spiking() || kind == LayerKind::Readout; }

  int fan_in() const {
    return kind == LayerKind::Conv2d ? in_ch * kConvKernel * kConvKernel
                                     : in_dim;
  }
};

/// Compact layer description used when building a network from a config.
struct LayerDesc {
  LayerKind kind;
  int units = 0;  // fc width or conv filter count
  double v_th = 0.25;
};

template <typename Scalar>
struct NetworkModel {
  std::vector<LayerSpec<Scalar>> layers;
  EncoderConfig encoder;
  int class_count = 0;
  int input_dim = 0;
  int input_h = 0, input_w = 0;

  void validate() const;
  int last_spiking_index() const;
  int last_spiking_width() const;
};

/// Recorded activity of one simulated sample: the spike raster of every
/// spiking layer plus the readout voltage trajectory.
template <typename Scalar>
struct ForwardTrace {
  std::vector<SpikeRaster<Scalar>> spikes_per_layer;  // steps x width each
  Mat<Scalar> readout_voltage;                        // steps x class_count
};

template <typename Scalar>
struct PredictResult {
  VecD logits;
  int label = 0;
  ForwardTrace<Scalar> trace;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
void NetworkModel<Scalar>::validate() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  for (std::size_t i = 0; i + 1 < layers.size(); ++i)
    if (layers[i].kind == LayerKind::Readout)
      throw ConfigError("readout must be the last layer");
  const LayerSpec<Scalar>& last = layers.back();
  if (last.kind != LayerKind::Readout)
    throw ConfigError("last layer must be the readout");
  if (last.out_dim != class_count)
    throw ConfigError("readout width " + std::to_string(last.out_dim) +
                      " does not match class count " +
                      std::to_string(class_count));
  int dim = input_dim;
  for (const auto& l : layers) {
    if (l.in_dim != dim) throw ConfigError("layer input width mismatch");
    if (l.has_weights()) {
      const int rows = l.kind == LayerKind::Conv2d ? l.filters : l.out_dim;
      if (l.weights.rows() != rows || l.weights.cols() != l.fan_in())
        throw ConfigError("weight shape inconsistent with layer dims");
    }
    if (l.spiking()) l.lif.validate();
    dim = l.out_dim;
  }
  encoder.validate();
}

template <typename Scalar>
int NetworkModel<Scalar>::last_spiking_index() const {
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i)
    if (layers[static_cast<std::size_t>(i)].spiking()) return i;
  return -1;
}

template <typename Scalar>
int NetworkModel<Scalar>::last_spiking_width() const {
  const int i = last_spiking_index();
  return i < 0 ? 0 : layers[static_cast<std::size_t>(i)].out_dim;
}

/// Builds a network from layer descriptions, inferring all shapes from the
/// input geometry. Weights are allocated but left at zero; call init_weights.
template <typename Scalar>
NetworkModel<Scalar> build_network(
    int input_h, int input_w, const std::vector<LayerDesc>& descs,
    int class_count, const EncoderConfig& encoder,
    const LifParams<Scalar>& base = LifParams<Scalar>{}) {
  if (class_count < 1) throw ConfigError("class count must be positive");
  NetworkModel<Scalar> model;
  model.encoder = encoder;
  model.class_count = class_count;
  model.input_h = input_h;
  model.input_w = input_w;
  model.input_dim = input_h * input_w;

  int dim = model.input_dim;
  int ch = 1, h = input_h, w = input_w;
  bool spatial = true;
  for (const LayerDesc& d : descs) {
    LayerSpec<Scalar> l;
    l.kind = d.kind;
    l.in_dim = dim;
    l.lif = base;
    l.lif.v_th = Scalar(d.v_th);
    switch (d.kind) {
      case LayerKind::FullyConnected:
        if (d.units < 1) throw ConfigError("fc layer needs a positive width");
        l.out_dim = d.units;
        l.weights = Mat<Scalar>::Zero(l.out_dim, l.in_dim);
        spatial = false;
        break;
      case LayerKind::Conv2d:
        if (!spatial) throw ConfigError("conv layer after flatten/fc");
        if (d.units < 1) throw ConfigError("conv layer needs filters");
        l.in_ch = ch;
        l.in_h = h;
        l.in_w = w;
        l.filters = d.units;
        l.out_h = h - (kConvKernel - 1);
        l.out_w = w - (kConvKernel - 1);
        if (l.out_h < 1 || l.out_w < 1)
          throw ConfigError("conv input too small for 3x3 valid kernel");
        l.out_dim = l.filters * l.out_h * l.out_w;
        l.weights =
            Mat<Scalar>::Zero(l.filters, l.in_ch * kConvKernel * kConvKernel);
        ch = l.filters;
        h = l.out_h;
        w = l.out_w;
        break;
      case LayerKind::AvgPool:
        if (!spatial) throw ConfigError("pool layer after flatten/fc");
        if (h % kPoolSide != 0 || w % kPoolSide != 0)
          throw ConfigError("pool input dims must be even");
        l.in_ch = ch;
        l.in_h = h;
        l.in_w = w;
        l.out_h = h / kPoolSide;
        l.out_w = w / kPoolSide;
        l.out_dim = ch * l.out_h * l.out_w;
        h = l.out_h;
        w = l.out_w;
        break;
      case LayerKind::Flatten:
        l.out_dim = dim;
        spatial = false;
        break;
      case LayerKind::Readout:
        l.out_dim = class_count;
        l.weights = Mat<Scalar>::Zero(l.out_dim, l.in_dim);
        break;
    }
    dim = l.out_dim;
    model.layers.push_back(std::move(l));
  }
  model.validate();
  return model;
}

/// Uniform init in +-1/sqrt(fan_in), deterministic per seed.
template <typename Scalar>
void init_weights(NetworkModel<Scalar>& model, std::uint64_t seed) {
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    if (!l.has_weights()) continue;
    SplitMix rng(hash2(seed, std::uint64_t(i)));
    const double bound = 1.0 / std::sqrt(double(l.fan_in()));
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        l.weights(r, c) = Scalar(rng.uniform(-bound, bound));
  }
}

namespace detail {

/// Valid 3x3 cross-correlation over a batch of flattened (c,h,w) maps.
/// in: (in_ch*in_h*in_w) x B, out: (filters*out_h*out_w) x B.
template <typename Scalar>
void conv_forward(const LayerSpec<Scalar>& l, const Mat<Scalar>& in,
                  Mat<Scalar>& out) {
  const int ohw = l.out_h * l.out_w;
  const int patch = l.in_ch * kConvKernel * kConvKernel;
  out.resize(Eigen::Index(l.filters) * ohw, in.cols());
  Mat<Scalar> cols(patch, ohw);
  for (Eigen::Index b = 0; b < in.cols(); ++b) {
    const Scalar* src = in.col(b).data();
    for (int oy = 0; oy < l.out_h; ++oy)
      for (int ox = 0; ox < l.out_w; ++ox) {
        Scalar* dst = cols.col(Eigen::Index(oy) * l.out_w + ox).data();
        for (int c = 0; c < l.in_ch; ++c)
          for (int ky = 0; ky < kConvKernel; ++ky)
            for (int kx = 0; kx < kConvKernel; ++kx)
              dst[c * 9 + ky * 3 + kx] =
                  src[(c * l.in_h + oy + ky) * l.in_w + ox + kx];
      }
    Mat<Scalar> res = l.weights * cols;  // filters x ohw
    Eigen::Map<Mat<Scalar>>(out.col(b).data(), ohw, l.filters) =
        res.transpose();
  }
}

/// Transpose of conv_forward w.r.t. the input (used by BPTT).
template <typename Scalar>
void conv_backward_input(const LayerSpec<Scalar>& l, const Mat<Scalar>& gout,
                         Mat<Scalar>& gin) {
  const int ohw = l.out_h * l.out_w;
  gin = Mat<Scalar>::Zero(Eigen::Index(l.in_ch) * l.in_h * l.in_w, gout.cols());
  for (Eigen::Index b = 0; b < gout.cols(); ++b) {
    Eigen::Map<const Mat<Scalar>> gmap(gout.col(b).data(), ohw, l.filters);
    Mat<Scalar> gcols = l.weights.transpose() * gmap.transpose();  // patch x ohw
    Scalar* dst = gin.col(b).data();
    for (int oy = 0; oy < l.out_h; ++oy)
      for (int ox = 0; ox < l.out_w; ++ox) {
        const Scalar* src = gcols.col(Eigen::Index(oy) * l.out_w + ox).data();
        for (int c = 0; c < l.in_ch; ++c)
          for (int ky = 0; ky < kConvKernel; ++ky)
            for (int kx = 0; kx < kConvKernel; ++kx)
              dst[(c * l.in_h + oy + ky) * l.in_w + ox + kx] +=
                  src[c * 9 + ky * 3 + kx];
      }
  }
}

/// Kernel gradient: correlation of the stored inputs with output grads.
template <typename Scalar>
void conv_backward_weights(const LayerSpec<Scalar>& l, const Mat<Scalar>& in,
                           const Mat<Scalar>& gout, Mat<Scalar>& gw) {
  const int ohw = l.out_h * l.out_w;
  const int patch = l.in_ch * kConvKernel * kConvKernel;
  Mat<Scalar> cols(patch, ohw);
  for (Eigen::Index b = 0; b < in.cols(); ++b) {
    const Scalar* src = in.col(b).data();
    for (int oy = 0; oy < l.out_h; ++oy)
      for (int ox = 0; ox < l.out_w; ++ox) {
        Scalar* dst = cols.col(Eigen::Index(oy) * l.out_w + ox).data();
        for (int c = 0; c < l.in_ch; ++c)
          for (int ky = 0; ky < kConvKernel; ++ky)
            for (int kx = 0; kx < kConvKernel; ++kx)
              dst[c * 9 + ky * 3 + kx] =
                  src[(c * l.in_h + oy + ky) * l.in_w + ox + kx];
      }
    Eigen::Map<const Mat<Scalar>> gmap(gout.col(b).data(), ohw, l.filters);
    gw.noalias() += gmap.transpose() * cols.transpose();
  }
}

template <typename Scalar>
void pool_forward(const LayerSpec<Scalar>& l, const Mat<Scalar>& in,
                  Mat<Scalar>& out) {
  out.resize(Eigen::Index(l.in_ch) * l.out_h * l.out_w, in.cols());
  const Scalar quarter = Scalar(1) / Scalar(kPoolSide * kPoolSide);
  for (Eigen::Index b = 0; b < in.cols(); ++b) {
    const Scalar* src = in.col(b).data();
    Scalar* dst = out.col(b).data();
    for (int c = 0; c < l.in_ch; ++c)
      for (int oy = 0; oy < l.out_h; ++oy)
        for (int ox = 0; ox < l.out_w; ++ox) {
          const int iy = oy * kPoolSide, ix = ox * kPoolSide;
          Scalar s = Scalar(0);
          for (int py = 0; py < kPoolSide; ++py)
            for (int px = 0; px < kPoolSide; ++px)
              s += src[(c * l.in_h + iy + py) * l.in_w + ix + px];
          dst[(c * l.out_h + oy) * l.out_w + ox] = s * quarter;
        }
  }
}

template <typename Scalar>
void pool_backward(const LayerSpec<Scalar>& l, const Mat<Scalar>& gout,
                   Mat<Scalar>& gin) {
  gin.resize(Eigen::Index(l.in_ch) * l.in_h * l.in_w, gout.cols());
  const Scalar quarter = Scalar(1) / Scalar(kPoolSide * kPoolSide);
  for (Eigen::Index b = 0; b < gout.cols(); ++b) {
    const Scalar* src = gout.col(b).data();
    Scalar* dst = gin.col(b).data();
    for (int c = 0; c < l.in_ch; ++c)
      for (int oy = 0; oy < l.out_h; ++oy)
        for (int ox = 0; ox < l.out_w; ++ox) {
          const Scalar g = src[(c * l.out_h + oy) * l.out_w + ox] * quarter;
          const int iy = oy * kPoolSide, ix = ox * kPoolSide;
          for (int py = 0; py < kPoolSide; ++py)
            for (int px = 0; px < kPoolSide; ++px)
              dst[(c * l.in_h + iy + py) * l.in_w + ix + px] = g;
        }
  }
}

/// Batched layer state over the simulation (columns are samples).
template <typename Scalar>
struct BatchState {
  Mat<Scalar> v, zeta;
};

/// Advances all layers by one step. `layer_out[i]` receives layer i's output
/// for this step (spikes, pooled spikes, or the readout voltage).
template <typename Scalar>
void step_network(const NetworkModel<Scalar>& model,
                  std::vector<BatchState<Scalar>>& states,
                  const Mat<Scalar>& input_spikes,
                  std::vector<Mat<Scalar>>& layer_out) {
  const Scalar dt = Scalar(model.encoder.delta_t);
  Mat<Scalar> scratch;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const Mat<Scalar>& in = i == 0 ? input_spikes : layer_out[i - 1];
    auto& st = states[i];
    switch (l.kind) {
      case LayerKind::FullyConnected:
      case LayerKind::Conv2d: {
        const Scalar a = l.lif.alpha(dt);
        const Scalar b = l.lif.beta(dt);
        Mat<Scalar> vhat =
            st.v +
            a * ((Mat<Scalar>::Constant(st.v.rows(), st.v.cols(), l.lif.v_leak) -
                  st.v) +
                 st.zeta);
        layer_out[i] =
            (vhat.array() >= l.lif.v_th).template cast<Scalar>().matrix();
        st.v = (Scalar(1) - layer_out[i].array()).matrix().cwiseProduct(vhat) +
               layer_out[i] * l.lif.v_reset;
        if (l.kind == LayerKind::FullyConnected) {
          st.zeta = b * st.zeta;
          st.zeta.noalias() += l.weights * in;
        } else {
          conv_forward(l, in, scratch);
          st.zeta = b * st.zeta + scratch;
        }
        break;
      }
      case LayerKind::AvgPool:
        pool_forward(l, in, layer_out[i]);
        break;
      case LayerKind::Flatten:
        layer_out[i] = in;
        break;
      case LayerKind::Readout: {
        const Scalar a = l.lif.alpha(dt);
        const Scalar b = l.lif.beta(dt);
        st.v = st.v +
               a * ((Mat<Scalar>::Constant(st.v.rows(), st.v.cols(),
                                           l.lif.v_leak) -
                     st.v) +
                    st.zeta);
        st.zeta = b * st.zeta;
        st.zeta.noalias() += l.weights * in;
        layer_out[i] = st.v;
        break;
      }
    }
  }
}

template <typename Scalar>
std::vector<BatchState<Scalar>> zero_states(const NetworkModel<Scalar>& model,
                                            Eigen::Index batch) {
  std::vector<BatchState<Scalar>> states(model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    if (l.spiking() || l.kind == LayerKind::Readout) {
      states[i].v = Mat<Scalar>::Zero(l.out_dim, batch);
      states[i].zeta = Mat<Scalar>::Zero(l.out_dim, batch);
    }
  }
  return states;
}

}  // namespace detail

/// Output of a batched forward pass.
template <typename Scalar>
struct BatchOutput {
  Mat<Scalar> logits;  // class_count x B (max readout voltage over time)
  VecI labels;         // argmax per column, lowest index on ties
  MatD counts;         // last-spiking-layer spike totals, N_L x B
};

/// Forward-simulates a batch without recording traces; optionally
/// accumulates the spike counts of the last spiking layer.
template <typename Scalar>
BatchOutput<Scalar> forward_batch(const NetworkModel<Scalar>& model,
                                  const Mat<Scalar>& inputs,
                                  const std::uint64_t* sample_keys,
                                  bool want_counts = false) {
  model.validate();
  if (inputs.rows() != model.input_dim)
    throw ConfigError("input dimension does not match encoder width");
  const int steps = model.encoder.steps();
  const Eigen::Index batch = inputs.cols();

  const Mat<Scalar> probs =
      inputs * Scalar(model.encoder.r_max * model.encoder.delta_t);

  auto states = detail::zero_states(model, batch);
  std::vector<Mat<Scalar>> layer_out(model.layers.size());

  const int last_spiking = model.last_spiking_index();
  BatchOutput<Scalar> out;
  out.logits = Mat<Scalar>::Zero(model.class_count, batch);
  if (want_counts && last_spiking >= 0)
    out.counts = MatD::Zero(model.last_spiking_width(), batch);

  Mat<Scalar> spikes_in;
  for (int t = 0; t < steps; ++t) {
    encode_step(probs, model.encoder, sample_keys, t, spikes_in);
    detail::step_network(model, states, spikes_in, layer_out);
    if (t == 0)
      out.logits = layer_out.back();
    else
      out.logits = out.logits.cwiseMax(layer_out.back());
    if (want_counts && last_spiking >= 0)
      out.counts +=
          layer_out[std::size_t(last_spiking)].template cast<double>();
  }

  out.labels.resize(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    int best = 0;
    for (int c = 1; c < model.class_count; ++c)
      if (out.logits(c, b) > out.logits(best, b)) best = c;
    out.labels[b] = best;
  }
  return out;
}

/// Simulates one sample, recording every spiking layer's raster and the
/// readout voltage trajectory. Bit-identical for fixed (model, x, seed).
template <typename Scalar>
ForwardTrace<Scalar> simulate(const NetworkModel<Scalar>& model,
                              const Vec<Scalar>& x, std::uint64_t sample_seed) {
  model.validate();
  if (x.size() != model.input_dim)
    throw ConfigError("input dimension does not match encoder width");
  const int steps = model.encoder.steps();

  ForwardTrace<Scalar> trace;
  for (const auto& l : model.layers)
    if (l.spiking())
      trace.spikes_per_layer.push_back(Mat<Scalar>::Zero(steps, l.out_dim));
  trace.readout_voltage = Mat<Scalar>::Zero(steps, model.class_count);

  const SpikeRaster<Scalar> raster =
      poisson_encode<Scalar>(x, model.encoder, sample_seed);

  auto states = detail::zero_states(model, 1);
  std::vector<Mat<Scalar>> layer_out(model.layers.size());
  for (int t = 0; t < steps; ++t) {
    const Mat<Scalar> spikes_in = raster.row(t).transpose();
    detail::step_network(model, states, spikes_in, layer_out);
    std::size_t spiking_idx = 0;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      if (model.layers[i].spiking()) {
        trace.spikes_per_layer[spiking_idx].row(t) =
            layer_out[i].col(0).transpose();
        ++spiking_idx;
      }
    }
    trace.readout_voltage.row(t) = layer_out.back().col(0).transpose();
  }
  return trace;
}

/// Max readout voltage per class over the simulation window.
template <typename Scalar>
VecD logits_from_trace(const ForwardTrace<Scalar>& trace) {
  return trace.readout_voltage.template cast<double>()
      .colwise()
      .maxCoeff()
      .transpose();
}

/// Spike totals of the last spiking layer of a trace.
template <typename Scalar>
VecD trace_counts(const ForwardTrace<Scalar>& trace) {
  if (trace.spikes_per_layer.empty())
    throw ConfigError("model has no spiking layer");
  return spike_counts(trace.spikes_per_layer.back());
}

template <typename Scalar>
PredictResult<Scalar> predict(const NetworkModel<Scalar>& model,
                              const Vec<Scalar>& x, std::uint64_t sample_seed) {
  PredictResult<Scalar> res;
  res.trace = simulate(model, x, sample_seed);
  res.logits = logits_from_trace(res.trace);
  res.label = 0;
  for (int c = 1; c < model.class_count; ++c)
    if (res.logits[c] > res.logits[res.label]) res.label = c;
  return res;
}

}  // namespace snnood
