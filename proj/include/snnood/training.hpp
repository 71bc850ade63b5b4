#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "snnood/dataset.hpp"
#include "snnood/errors.hpp"
#include "snnood/network.hpp"
#include "snnood/rng.hpp"
#include "snnood/types.hpp"

namespace snnood {

struct SurrogateSpec {
  double beta = 100.0;
};

/// Smooth stand-in for the Heaviside derivative:
/// 1 / (1 + beta |v - v_th|)^2, maximal (1) at the threshold.
inline double surrogate_derivative(double v, double v_th,
                                   const SurrogateSpec& spec = {}) {
  const double d = 1.0 + spec.beta * std::abs(v - v_th);
  return 1.0 / (d * d);
}

struct TrainConfig {
  int epochs = 5;
  double learning_rate = 0.002;
  int batch_size = 64;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double surrogate_beta = 100.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(surrogate_beta > 0.0)) throw ConfigError("surrogate beta must be > 0");
  }
};

/// Spike nonlinearity used in the forward pass. Binary is the real model;
/// Smooth replaces the Heaviside with z = u / (1 + beta |u|) (whose exact
/// derivative is the surrogate) and disables the reset, making the whole
/// network differentiable so BPTT can be checked against finite differences.
enum class SpikeMode { Binary, Smooth };

/// Batch-summed gradients of the cross-entropy loss w.r.t. every weight
/// tensor, plus the loss value and the number of correct predictions.
template <typename Scalar>
struct Gradients {
  std::vector<Mat<Scalar>> by_layer;  // empty Mat for weightless layers
  double loss = 0.0;
  int correct = 0;
};

namespace detail {

template <typename Scalar>
Scalar smooth_spike(Scalar u, Scalar beta) {
  return u / (Scalar(1) + beta * std::abs(double(u)));
}

/// Index of the nearest spiking layer strictly below `i`, or -1 for the
/// encoder input.
template <typename Scalar>
int spiking_below(const NetworkModel<Scalar>& model, int i) {
  for (int j = i - 1; j >= 0; --j)
    if (model.layers[std::size_t(j)].spiking()) return j;
  return -1;
}

/// Applies the pool/flatten transforms between layer `from` (exclusive) and
/// layer `to` (exclusive) to a step activation.
template <typename Scalar>
Mat<Scalar> apply_transforms(const NetworkModel<Scalar>& model, int from,
                             int to, const Mat<Scalar>& x) {
  Mat<Scalar> cur = x;
  for (int j = from + 1; j < to; ++j) {
    const auto& l = model.layers[std::size_t(j)];
    if (l.kind == LayerKind::AvgPool) {
      Mat<Scalar> out;
      pool_forward(l, cur, out);
      cur = std::move(out);
    }
    // Flatten is the identity on the flat representation.
  }
  return cur;
}

/// Transposed counterpart of apply_transforms for gradient propagation.
template <typename Scalar>
Mat<Scalar> apply_transforms_backward(const NetworkModel<Scalar>& model,
                                      int from, int to, const Mat<Scalar>& g) {
  Mat<Scalar> cur = g;
  for (int j = to - 1; j > from; --j) {
    const auto& l = model.layers[std::size_t(j)];
    if (l.kind == LayerKind::AvgPool) {
      Mat<Scalar> out;
      pool_backward(l, cur, out);
      cur = std::move(out);
    }
  }
  return cur;
}

}  // namespace detail

/// Backpropagation through time over one batch (columns of `inputs`).
/// The loss is the sum over the batch of cross-entropy(softmax(max-over-time
/// readout voltage), label); the max is routed through its (first) argmax
/// time step, and the Heaviside derivative is replaced by the surrogate.
template <typename Scalar>
Gradients<Scalar> bptt_gradients(const NetworkModel<Scalar>& model,
                                 const Mat<Scalar>& inputs, const VecI& labels,
                                 const std::uint64_t* sample_keys,
                                 const TrainConfig& cfg,
                                 SpikeMode mode = SpikeMode::Binary) {
  model.validate();
  cfg.validate();
  if (inputs.cols() == 0) throw ArgumentError("empty batch");
  if (labels.size() != inputs.cols())
    throw ArgumentError("labels do not match batch size");
  const int steps = model.encoder.steps();
  const Eigen::Index batch = inputs.cols();
  const Scalar dt = Scalar(model.encoder.delta_t);
  const Scalar sbeta = Scalar(cfg.surrogate_beta);
  const int n_layers = static_cast<int>(model.layers.size());
  const int readout = n_layers - 1;

  // ---- forward, recording the tape ----
  const Mat<Scalar> probs =
      inputs * Scalar(model.encoder.r_max * model.encoder.delta_t);
  std::vector<Mat<Scalar>> enc;
  enc.resize(static_cast<std::size_t>(steps));
  std::vector<std::vector<Mat<Scalar>>> vhat, zout;
  vhat.resize(static_cast<std::size_t>(n_layers));
  zout.resize(static_cast<std::size_t>(n_layers));
  for (int i = 0; i < n_layers; ++i) {
    if (model.layers[std::size_t(i)].spiking()) {
      vhat[std::size_t(i)].resize(std::size_t(steps));
      zout[std::size_t(i)].resize(std::size_t(steps));
    }
  }

  auto states = detail::zero_states(model, batch);
  Mat<Scalar> logits(model.class_count, batch);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> t_star(model.class_count,
                                                            batch);
  t_star.setZero();

  Mat<Scalar> scratch;
  for (int t = 0; t < steps; ++t) {
    encode_step(probs, model.encoder, sample_keys, t, enc[std::size_t(t)]);
    const Mat<Scalar>* cur = &enc[std::size_t(t)];
    Mat<Scalar> transformed;
    for (int i = 0; i < n_layers; ++i) {
      const auto& l = model.layers[std::size_t(i)];
      auto& st = states[std::size_t(i)];
      if (l.spiking()) {
        const Scalar a = l.lif.alpha(dt);
        const Scalar b = l.lif.beta(dt);
        Mat<Scalar>& vh = vhat[std::size_t(i)][std::size_t(t)];
        Mat<Scalar>& z = zout[std::size_t(i)][std::size_t(t)];
        vh = st.v + a * ((Mat<Scalar>::Constant(st.v.rows(), st.v.cols(),
                                                l.lif.v_leak) -
                          st.v) +
                         st.zeta);
        if (mode == SpikeMode::Binary) {
          z = (vh.array() >= l.lif.v_th).template cast<Scalar>().matrix();
          st.v = (Scalar(1) - z.array()).matrix().cwiseProduct(vh) +
                 z * l.lif.v_reset;
        } else {
          z = vh.unaryExpr([&](Scalar u) {
            return detail::smooth_spike(u - l.lif.v_th, sbeta);
          });
          st.v = vh;
        }
        if (l.kind == LayerKind::FullyConnected) {
          st.zeta = b * st.zeta;
          st.zeta.noalias() += l.weights * (*cur);
        } else {
          detail::conv_forward(l, *cur, scratch);
          st.zeta = b * st.zeta + scratch;
        }
        cur = &z;
      } else if (l.kind == LayerKind::AvgPool) {
        detail::pool_forward(l, *cur, scratch);
        transformed = std::move(scratch);
        cur = &transformed;
      } else if (l.kind == LayerKind::Flatten) {
        // identity
      } else {  // Readout
        const Scalar a = l.lif.alpha(dt);
        const Scalar b = l.lif.beta(dt);
        st.v = st.v + a * ((Mat<Scalar>::Constant(st.v.rows(), st.v.cols(),
                                                  l.lif.v_leak) -
                            st.v) +
                           st.zeta);
        st.zeta = b * st.zeta;
        st.zeta.noalias() += l.weights * (*cur);
        if (t == 0) {
          logits = st.v;
        } else {
          for (Eigen::Index bcol = 0; bcol < batch; ++bcol)
            for (int c = 0; c < model.class_count; ++c)
              if (st.v(c, bcol) > logits(c, bcol)) {
                logits(c, bcol) = st.v(c, bcol);
                t_star(c, bcol) = t;
              }
        }
      }
    }
  }

  // ---- loss and logit gradient ----
  Gradients<Scalar> grads;
  grads.by_layer.resize(std::size_t(n_layers));
  for (int i = 0; i < n_layers; ++i) {
    const auto& l = model.layers[std::size_t(i)];
    if (l.has_weights())
      grads.by_layer[std::size_t(i)] =
          Mat<Scalar>::Zero(l.weights.rows(), l.weights.cols());
  }

  Mat<Scalar> g(model.class_count, batch);  // dL/dlogits
  for (Eigen::Index bcol = 0; bcol < batch; ++bcol) {
    const int y = labels[bcol];
    if (y < 0 || y >= model.class_count)
      throw ArgumentError("label outside class range");
    const Scalar mx = logits.col(bcol).maxCoeff();
    Vec<Scalar> e = (logits.col(bcol).array() - mx).exp().matrix();
    const Scalar denom = e.sum();
    g.col(bcol) = e / denom;
    grads.loss += -std::log(double(g(y, bcol)));
    g(y, bcol) -= Scalar(1);
    int best = 0;
    for (int c = 1; c < model.class_count; ++c)
      if (logits(c, bcol) > logits(best, bcol)) best = c;
    if (best == y) ++grads.correct;
  }
  if (!std::isfinite(grads.loss)) throw NumericError("non-finite loss");

  // ---- backward through time, layer by layer from the top ----
  // lambda_z[i][t]: dL/d(spike output of layer i at step t)
  std::vector<std::vector<Mat<Scalar>>> lambda_z;
  lambda_z.resize(static_cast<std::size_t>(n_layers));

  auto input_of = [&](int i, int t) -> Mat<Scalar> {
    const int below = detail::spiking_below(model, i);
    const Mat<Scalar>& src = below < 0 ? enc[std::size_t(t)]
                                       : zout[std::size_t(below)][std::size_t(t)];
    return detail::apply_transforms(model, below, i, src);
  };
  auto push_down = [&](int i, int t, const Mat<Scalar>& lam_in) {
    const int below = detail::spiking_below(model, i);
    if (below < 0) return;  // gradient w.r.t. the encoded input is unused
    auto& store = lambda_z[std::size_t(below)];
    if (store.empty()) store.resize(std::size_t(steps));
    Mat<Scalar> mapped =
        detail::apply_transforms_backward(model, below, i, lam_in);
    if (store[std::size_t(t)].size() == 0)
      store[std::size_t(t)] = std::move(mapped);
    else
      store[std::size_t(t)] += mapped;
  };

  // Readout: u_t = (1-a) u_{t-1} + a v_leak + a xi_{t-1}; xi_t = b xi_{t-1} + W in_t.
  {
    const auto& l = model.layers[std::size_t(readout)];
    const Scalar a = l.lif.alpha(dt);
    const Scalar b = l.lif.beta(dt);
    Mat<Scalar> Au = Mat<Scalar>::Zero(l.out_dim, batch);   // dL/du_t
    Mat<Scalar> Axi = Mat<Scalar>::Zero(l.out_dim, batch);  // dL/dxi_t
    for (int t = steps - 1; t >= 0; --t) {
      Mat<Scalar> direct = Mat<Scalar>::Zero(l.out_dim, batch);
      for (Eigen::Index bcol = 0; bcol < batch; ++bcol)
        for (int c = 0; c < model.class_count; ++c)
          if (t_star(c, bcol) == t) direct(c, bcol) = g(c, bcol);
      Mat<Scalar> Au_t = (Scalar(1) - a) * Au + direct;
      Mat<Scalar> Axi_t = a * Au + b * Axi;
      const Mat<Scalar> in_t = input_of(readout, t);
      grads.by_layer[std::size_t(readout)].noalias() +=
          Axi_t * in_t.transpose();
      push_down(readout, t, l.weights.transpose() * Axi_t);
      Au = std::move(Au_t);
      Axi = std::move(Axi_t);
    }
  }

  for (int i = n_layers - 2; i >= 0; --i) {
    const auto& l = model.layers[std::size_t(i)];
    if (!l.spiking()) continue;
    const Scalar a = l.lif.alpha(dt);
    const Scalar b = l.lif.beta(dt);
    auto& lam = lambda_z[std::size_t(i)];
    Mat<Scalar> Avbar = Mat<Scalar>::Zero(l.out_dim, batch);  // dL/d(post v)
    Mat<Scalar> Azeta = Mat<Scalar>::Zero(l.out_dim, batch);  // dL/dzeta_t
    for (int t = steps - 1; t >= 0; --t) {
      const Mat<Scalar>& vh = vhat[std::size_t(i)][std::size_t(t)];
      const Mat<Scalar>& z = zout[std::size_t(i)][std::size_t(t)];
      Mat<Scalar> surr = vh.unaryExpr([&](Scalar u) {
        const Scalar d = Scalar(1) + sbeta * Scalar(std::abs(double(u - l.lif.v_th)));
        return Scalar(1) / (d * d);
      });
      Mat<Scalar> Avhat;
      if (mode == SpikeMode::Binary) {
        // Reset path: dv~/dvhat = (1 - z) with the spike mask detached.
        Avhat = Avbar.cwiseProduct(
            (Scalar(1) - z.array()).matrix());
      } else {
        Avhat = Avbar;
      }
      if (!lam.empty() && lam[std::size_t(t)].size() != 0)
        Avhat += lam[std::size_t(t)].cwiseProduct(surr);

      // Weight gradient and downstream propagation via dL/dzeta_t.
      if (Azeta.any()) {
        const Mat<Scalar> in_t = input_of(i, t);
        if (l.kind == LayerKind::FullyConnected) {
          grads.by_layer[std::size_t(i)].noalias() += Azeta * in_t.transpose();
          push_down(i, t, l.weights.transpose() * Azeta);
        } else {
          detail::conv_backward_weights(l, in_t, Azeta,
                                        grads.by_layer[std::size_t(i)]);
          Mat<Scalar> gin;
          detail::conv_backward_input(l, Azeta, gin);
          push_down(i, t, gin);
        }
      }
      Mat<Scalar> Azeta_prev = a * Avhat + b * Azeta;
      Avbar = (Scalar(1) - a) * Avhat;
      Azeta = std::move(Azeta_prev);
    }
    lam.clear();
    lam.shrink_to_fit();
  }
  return grads;
}

/// Per-tensor Adam state.
template <typename Scalar>
struct AdamState {
  std::vector<Mat<Scalar>> m, v;
  long step = 0;

  static AdamState init(const NetworkModel<Scalar>& model) {
    AdamState s;
    s.m.resize(model.layers.size());
    s.v.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      const auto& l = model.layers[i];
      if (l.has_weights()) {
        s.m[i] = Mat<Scalar>::Zero(l.weights.rows(), l.weights.cols());
        s.v[i] = Mat<Scalar>::Zero(l.weights.rows(), l.weights.cols());
      }
    }
    return s;
  }

  void update(NetworkModel<Scalar>& model, const Gradients<Scalar>& g,
              const TrainConfig& cfg) {
    ++step;
    const Scalar b1 = Scalar(cfg.adam_beta1);
    const Scalar b2 = Scalar(cfg.adam_beta2);
    const Scalar corr1 = Scalar(1) - Scalar(std::pow(cfg.adam_beta1, step));
    const Scalar corr2 = Scalar(1) - Scalar(std::pow(cfg.adam_beta2, step));
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      auto& l = model.layers[i];
      if (!l.has_weights()) continue;
      const Mat<Scalar>& gi = g.by_layer[i];
      m[i] = b1 * m[i] + (Scalar(1) - b1) * gi;
      v[i] = b2 * v[i] + (Scalar(1) - b2) * gi.cwiseProduct(gi);
      l.weights.array() -=
          Scalar(cfg.learning_rate) * (m[i].array() / corr1) /
          ((v[i].array() / corr2).sqrt() + Scalar(cfg.adam_eps));
    }
  }
};

struct EpochStats {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

/// Trains the model in place with Adam; returns per-epoch mean loss and
/// (training) accuracy. The encoder draws fresh spikes every epoch.
template <typename Scalar>
std::vector<EpochStats> fit_classifier(NetworkModel<Scalar>& model,
                                       const ImageDataset& train,
                                       const TrainConfig& cfg) {
  model.validate();
  cfg.validate();
  if (train.class_count != model.class_count)
    throw ConfigError("dataset class count does not match the model");
  if (train.dim() != model.input_dim)
    throw ConfigError("dataset image size does not match the model");
  const int n = train.count();
  if (n == 0) throw ArgumentError("empty training set");

  auto adam = AdamState<Scalar>::init(model);
  std::vector<EpochStats> stats;
  Mat<Scalar> batch_x;
  VecI batch_y;
  std::vector<std::uint64_t> keys;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order =
        shuffled_indices(std::size_t(n), hash3(cfg.seed, 0xE0, epoch));
    double loss_sum = 0.0;
    long correct = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - start);
      batch_x.resize(train.dim(), bsz);
      batch_y.resize(bsz);
      keys.resize(std::size_t(bsz));
      for (int j = 0; j < bsz; ++j) {
        const int idx = static_cast<int>(order[std::size_t(start + j)]);
        batch_x.col(j) = train.images.col(idx).cast<Scalar>();
        batch_y[j] = train.labels[idx];
        keys[std::size_t(j)] = hash3(0xEC, std::uint64_t(epoch),
                                     std::uint64_t(idx));
      }
      Gradients<Scalar> grads;
      try {
        grads = bptt_gradients(model, batch_x, batch_y, keys.data(), cfg);
      } catch (const NumericError& e) {
        throw TrainingError("divergence at epoch " + std::to_string(epoch) +
                            ": " + e.what());
      }
      adam.update(model, grads, cfg);
      loss_sum += grads.loss;
      correct += grads.correct;
    }
    stats.push_back({loss_sum / n, double(correct) / n});
  }
  return stats;
}

}  // namespace snnood
