#include <doctest.h>

#include <cmath>
#include <limits>

#include "snnood/lif.hpp"
#include "snnood/rng.hpp"

using namespace snnood;

namespace {

LifParams<double> params(double v_th) {
  LifParams<double> p;
  p.tau_mem = 5e-3;
  p.tau_syn = 10e-3;
  p.v_leak = 0.0;
  p.v_reset = 0.0;
  p.v_th = v_th;
  return p;
}
constexpr double kDt = 1e-3;

}  // namespace

TEST_CASE("resting state stays at rest") {
  auto state = NeuronState<double>::zero(4);
  const auto [next, spikes] =
      lif_step<double>(state, VecD::Zero(4), params(0.25), kDt);
  CHECK(next.v.isZero());
  CHECK(next.zeta.isZero());
  CHECK(spikes.isZero());
}

TEST_CASE("one Euler step decays the voltage by dt/tau_mem") {
  auto state = NeuronState<double>::zero(1);
  state.v[0] = 1.0;
  const auto [next, spikes] = lif_step<double>(
      state, VecD::Zero(1), params(std::numeric_limits<double>::infinity()),
      kDt);
  CHECK(next.v[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(spikes[0] == 0.0);
}

TEST_CASE("crossing the threshold emits a spike and resets") {
  // Pick a threshold low enough that the decayed voltage stays above it.
  auto p = params(0.02);
  auto state = NeuronState<double>::zero(1);
  state.v[0] = p.v_th + 0.01;
  SUBCASE("zero input") {
    const auto [next, spikes] = lif_step<double>(state, VecD::Zero(1), p, kDt);
    CHECK(spikes[0] == 1.0);
    CHECK(next.v[0] == p.v_reset);
    CHECK(next.v[0] == 0.0);
  }
  SUBCASE("any input only enters the current") {
    VecD input(1);
    input << -3.7;
    const auto [next, spikes] = lif_step<double>(state, input, p, kDt);
    CHECK(spikes[0] == 1.0);
    CHECK(next.v[0] == 0.0);
    CHECK(next.zeta[0] == doctest::Approx(-3.7));
  }
}

TEST_CASE("spike condition is inclusive at the threshold") {
  auto p = params(0.25);
  p.tau_mem = 1e-3;  // alpha = 1: v jumps straight to zeta
  auto state = NeuronState<double>::zero(1);
  state.zeta[0] = 0.25;
  const auto [next, spikes] = lif_step<double>(state, VecD::Zero(1), p, kDt);
  CHECK(spikes[0] == 1.0);
}

TEST_CASE("li_step charges monotonically under constant input") {
  auto p = params(0.25);
  auto state = NeuronState<double>::zero(1);
  const VecD input = VecD::Constant(1, 0.05);
  const double zeta_max = 0.05 / (kDt / p.tau_syn);
  const double asymptote = p.v_leak + zeta_max;
  double prev = 0.0;
  for (int t = 0; t < 50; ++t) {
    state = li_step<double>(state, input, p, kDt);
    CHECK(state.v[0] >= prev);
    if (t >= 1) CHECK(state.v[0] > prev);  // strictly increasing once charged
    prev = state.v[0];
  }
  CHECK(prev < asymptote);
  CHECK(prev > 0.0);
}

TEST_CASE("li_step decays geometrically from a charged state") {
  auto p = params(0.25);
  auto state = NeuronState<double>::zero(1);
  state.v[0] = 1.0;
  const double factor = 1.0 - kDt / p.tau_mem;
  double expected = 1.0;
  for (int t = 0; t < 10; ++t) {
    state = li_step<double>(state, VecD::Zero(1), p, kDt);
    expected *= factor;
    CHECK(state.v[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("stronger spike trains drive higher peak voltage") {
  auto p = params(0.25);
  auto charged = NeuronState<double>::zero(1);
  auto silent = NeuronState<double>::zero(1);
  double max_charged = 0.0, max_silent = 0.0;
  for (int t = 0; t < 50; ++t) {
    charged = li_step<double>(charged, VecD::Constant(1, 1.0), p, kDt);
    silent = li_step<double>(silent, VecD::Zero(1), p, kDt);
    max_charged = std::max(max_charged, charged.v[0]);
    max_silent = std::max(max_silent, silent.v[0]);
  }
  CHECK(max_charged > max_silent);
}

TEST_CASE("bounded inputs keep the state bounded") {
  auto p = params(0.25);
  const double i_max = 0.3;
  const double zeta_max = i_max / (kDt / p.tau_syn);
  const double bound = std::max(p.v_th, p.v_leak + zeta_max) * (1.0 + 1e-6);
  SplitMix rng(21);
  auto state = NeuronState<double>::zero(8);
  VecD input(8);
  for (int t = 0; t < 500; ++t) {
    for (int i = 0; i < 8; ++i) input[i] = rng.uniform(0.0, i_max);
    auto [next, spikes] = lif_step<double>(state, input, p, kDt);
    state = std::move(next);
    CHECK(state.v.maxCoeff() <= bound);
    CHECK(state.zeta.maxCoeff() <= zeta_max * (1.0 + 1e-6));
  }
}

TEST_CASE("non-finite inputs are rejected") {
  auto state = NeuronState<double>::zero(2);
  VecD bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lif_step<double>(state, bad, params(0.25), kDt),
                  NumericError);
  CHECK_THROWS_AS(li_step<double>(state, bad, params(0.25), kDt),
                  NumericError);
}

TEST_CASE("parameter validation") {
  auto p = params(0.25);
  p.tau_mem = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = params(0.25);
  p.v_th = -1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
