#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "snnood/artifact_store.hpp"
#include "snnood/rng.hpp"

using namespace snnood;
namespace fs = std::filesystem;

namespace {

EncoderConfig small_encoder() {
  EncoderConfig cfg;
  cfg.sim_time = 0.02;
  cfg.seed = 91;
  return cfg;
}

NetworkModel<float> sample_model() {
  auto model = build_network<float>(4, 4,
      std::vector<LayerDesc>{{LayerKind::FullyConnected, 6, 0.2},
                             {LayerKind::Readout, 0, 0.0}},
      3, small_encoder());
  init_weights(model, 7);
  return model;
}

ScpDetector sample_detector(const NetworkModel<float>& model) {
  ScpDetector det;
  det.count_dim = 6;
  det.layer_index = 0;
  det.target_tpr = 0.9;
  det.classes.resize(3);
  det.thresholds = VecD::Zero(3);
  SplitMix rng(8);
  const auto chain = attribution_weights(model);
  for (int c = 0; c < 3; ++c) {
    auto& ca = det.classes[std::size_t(c)];
    const int m = 1 + c;
    ca.centroids.resize(6, m);
    for (int i = 0; i < ca.centroids.size(); ++i)
      ca.centroids.data()[i] = double(rng.below(20));
    ca.members.resize(std::size_t(m));
    for (int k = 0; k < m; ++k)
      ca.members[std::size_t(k)] = {k * 2, k * 2 + 1};
    ca.reconstructions.resize(16, m);
    for (int k = 0; k < m; ++k) {
      const VecD rec = backproject(chain, VecD(ca.centroids.col(k)));
      ca.reconstructions.col(k) = rec.cast<float>().cast<double>();
    }
    det.thresholds[c] = double(rng.below(100));
  }
  return det;
}

std::string tmp_file(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("persist and restore round-trip bit-exactly") {
  const auto model = sample_model();
  const auto det = sample_detector(model);
  const std::string path = tmp_file("snnood_store_rt.bin");
  persist({path}, model, det);
  const auto [model2, det2] = restore({path});

  REQUIRE(model2.layers.size() == model.layers.size());
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    CHECK(model2.layers[i].kind == model.layers[i].kind);
    if (model.layers[i].has_weights())
      CHECK(model2.layers[i].weights == model.layers[i].weights);
    CHECK(model2.layers[i].lif.v_th == model.layers[i].lif.v_th);
  }
  CHECK(model2.encoder.seed == model.encoder.seed);
  CHECK(model2.encoder.sim_time == model.encoder.sim_time);

  REQUIRE(det2.class_count() == det.class_count());
  CHECK(det2.thresholds == det.thresholds);
  CHECK(det2.target_tpr == det.target_tpr);
  CHECK(det2.layer_index == det.layer_index);
  for (int c = 0; c < det.class_count(); ++c) {
    CHECK(det2.classes[std::size_t(c)].centroids ==
          det.classes[std::size_t(c)].centroids);
    CHECK(det2.classes[std::size_t(c)].reconstructions ==
          det.classes[std::size_t(c)].reconstructions);
    CHECK(det2.classes[std::size_t(c)].members ==
          det.classes[std::size_t(c)].members);
  }

  // Identical bits must yield identical logits on probe inputs.
  SplitMix rng(123);
  for (int probe = 0; probe < 100; ++probe) {
    VecF x(16);
    for (int d = 0; d < 16; ++d) x[d] = float(rng.uniform());
    const auto a = predict(model, x, std::uint64_t(probe));
    const auto b = predict(model2, x, std::uint64_t(probe));
    CHECK(a.logits == b.logits);
    CHECK(a.label == b.label);
  }
}

TEST_CASE("an empty detector restores as empty") {
  const auto model = sample_model();
  const std::string path = tmp_file("snnood_store_empty.bin");
  persist({path}, model, ScpDetector{});
  const auto [model2, det2] = restore({path});
  CHECK(det2.empty());
  CHECK(det2.class_count() == 0);
  CHECK(model2.layers.size() == model.layers.size());
}

TEST_CASE("any flipped byte is a corruption error") {
  const auto model = sample_model();
  const auto det = sample_detector(model);
  const std::string path = tmp_file("snnood_store_flip.bin");
  persist({path}, model, det);

  std::vector<char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());
  }
  for (std::size_t pos : {std::size_t(0), std::size_t(9), bytes.size() / 2}) {
    auto copy = bytes;
    copy[pos] = static_cast<char>(copy[pos] ^ 0x40);
    const std::string bad = tmp_file("snnood_store_flip_bad.bin");
    std::ofstream out(bad, std::ios::binary);
    out.write(copy.data(), static_cast<std::streamsize>(copy.size()));
    out.close();
    CHECK_THROWS_AS(restore({bad}), CorruptionError);
  }
}

TEST_CASE("version mismatch is a format error") {
  const auto model = sample_model();
  const std::string path = tmp_file("snnood_store_ver.bin");
  persist({path, 2}, model, ScpDetector{});  // valid container, version 2
  CHECK_THROWS_AS(restore({path, 1}), FormatError);
  const auto [m, d] = restore({path, 2});
  CHECK(m.layers.size() == model.layers.size());
}

TEST_CASE("missing and truncated files") {
  CHECK_THROWS_AS(restore({tmp_file("snnood_store_missing.bin")}), IoError);
  const std::string path = tmp_file("snnood_store_short.bin");
  std::ofstream out(path, std::ios::binary);
  out << "SNNOOD01";
  out.close();
  CHECK_THROWS_AS(restore({path}), IoError);
}

TEST_CASE("crc32 reference values") {
  // Classic check value for "123456789".
  const unsigned char data[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
  CHECK(crc32(data, 9) == 0xCBF43926u);
  CHECK(crc32(data, 0) == 0x00000000u);
}
