#pragma once

#include <string>
#include <utility>

#include "snnood/errors.hpp"
#include "snnood/types.hpp"

namespace snnood {

/// Second-order LIF cell parameters. Voltage relaxes toward v_leak + current
/// with time constant tau_mem; synaptic current decays with tau_syn.
template <typename Scalar>
struct LifParams {
  Scalar tau_mem = Scalar(5e-3);
  Scalar tau_syn = Scalar(10e-3);
  Scalar v_leak = Scalar(0);
  Scalar v_reset = Scalar(0);
  Scalar v_th = Scalar(0.25);

  void validate() const {
    if (!(tau_mem > Scalar(0)) || !(tau_syn > Scalar(0)))
      throw ConfigError("time constants must be positive");
    if (!(v_th > v_reset)) throw ConfigError("v_th must exceed v_reset");
  }

  /// Voltage relaxation step weight dt/tau_mem.
  Scalar alpha(Scalar dt) const { return dt / tau_mem; }
  /// Current retention factor 1 - dt/tau_syn.
  Scalar beta(Scalar dt) const { return Scalar(1) - dt / tau_syn; }
};

template <typename Scalar>
struct NeuronState {
  Vec<Scalar> v;     // membrane voltage
  Vec<Scalar> zeta;  // synaptic current

  static NeuronState zero(Eigen::Index n) {
    return {Vec<Scalar>::Zero(n), Vec<Scalar>::Zero(n)};
  }

  void check_finite() const {
    if (!v.allFinite() || !zeta.allFinite())
      throw NumericError("non-finite neuron state");
  }
};

/// One forward-Euler step of a LIF population:
///   v    <- v + (dt/tau_mem) (v_leak - v + zeta)
///   zeta <- zeta (1 - dt/tau_syn) + input
///   spike where v >= v_th, spiking neurons reset to v_reset.
template <typename Scalar>
std::pair<NeuronState<Scalar>, Vec<Scalar>> lif_step(
    const NeuronState<Scalar>& state, const Vec<Scalar>& input_current,
    const LifParams<Scalar>& p, Scalar dt) {
  if (!input_current.allFinite())
    throw NumericError("non-finite input current");
  if (input_current.size() != state.v.size() ||
      state.zeta.size() != state.v.size())
    throw ShapeError("state/input dimension mismatch");
  const Scalar a = p.alpha(dt);
  const Scalar b = p.beta(dt);
  NeuronState<Scalar> next;
  next.v = state.v + a * (Vec<Scalar>::Constant(state.v.size(), p.v_leak) -
                          state.v + state.zeta);
  next.zeta = b * state.zeta + input_current;
  Vec<Scalar> spikes =
      (next.v.array() >= p.v_th).template cast<Scalar>().matrix();
  next.v = (Scalar(1) - spikes.array()).matrix().cwiseProduct(next.v) +
           spikes * p.v_reset;
  return {std::move(next), std::move(spikes)};
}

/// Leaky-integrator step: identical dynamics without threshold or reset.
template <typename Scalar>
NeuronState<Scalar> li_step(const NeuronState<Scalar>& state,
                            const Vec<Scalar>& input_current,
                            const LifParams<Scalar>& p, Scalar dt) {
  if (!input_current.allFinite())
    throw NumericError("non-finite input current");
  if (input_current.size() != state.v.size() ||
      state.zeta.size() != state.v.size())
    throw ShapeError("state/input dimension mismatch");
  const Scalar a = p.alpha(dt);
  const Scalar b = p.beta(dt);
  NeuronState<Scalar> next;
  next.v = state.v + a * (Vec<Scalar>::Constant(state.v.size(), p.v_leak) -
                          state.v + state.zeta);
  next.zeta = b * state.zeta + input_current;
  return next;
}

}  // namespace snnood
