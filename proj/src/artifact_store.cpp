#include "snnood/artifact_store.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

#include "snnood/errors.hpp"

namespace snnood {

static_assert(std::endian::native == std::endian::little,
              "store container assumes a little-endian host");

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i)
    crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {

using json = nlohmann::json;

void append_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void append_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

struct Writer {
  std::vector<unsigned char> body;
  std::uint32_t n_sections = 0;

  void add(const std::string& name, const void* data, std::size_t len) {
    append_u32(body, static_cast<std::uint32_t>(name.size()));
    body.insert(body.end(), name.begin(), name.end());
    append_u64(body, static_cast<std::uint64_t>(len));
    const auto* p = static_cast<const unsigned char*>(data);
    body.insert(body.end(), p, p + len);
    ++n_sections;
  }
  void add_text(const std::string& name, const std::string& text) {
    add(name, text.data(), text.size());
  }
  void add_floats(const std::string& name, const MatF& m) {
    add(name, m.data(), sizeof(float) * std::size_t(m.size()));
  }
};

struct Reader {
  std::map<std::string, std::pair<std::size_t, std::size_t>> sections;
  std::vector<unsigned char> bytes;

  const unsigned char* payload(const std::string& name,
                               std::size_t* len) const {
    auto it = sections.find(name);
    if (it == sections.end())
      throw FormatError("missing section: " + name);
    *len = it->second.second;
    return bytes.data() + it->second.first;
  }
  std::string text(const std::string& name) const {
    std::size_t len = 0;
    const unsigned char* p = payload(name, &len);
    return std::string(reinterpret_cast<const char*>(p), len);
  }
  MatF floats(const std::string& name, Eigen::Index rows,
              Eigen::Index cols) const {
    std::size_t len = 0;
    const unsigned char* p = payload(name, &len);
    if (len != sizeof(float) * std::size_t(rows) * std::size_t(cols))
      throw FormatError("section " + name + " has unexpected length");
    MatF m(rows, cols);
    std::memcpy(m.data(), p, len);
    return m;
  }
};

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::Conv2d: return "conv";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Readout: return "readout";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& s) {
  if (s == "fc") return LayerKind::FullyConnected;
  if (s == "conv") return LayerKind::Conv2d;
  if (s == "avgpool") return LayerKind::AvgPool;
  if (s == "flatten") return LayerKind::Flatten;
  if (s == "readout") return LayerKind::Readout;
  throw FormatError("unknown layer kind: " + s);
}

}  // namespace

void persist(const ArtifactStore& store, const NetworkModel<float>& model,
             const ScpDetector& detector) {
  model.validate();
  Writer w;

  json meta;
  meta["class_count"] = model.class_count;
  meta["input_h"] = model.input_h;
  meta["input_w"] = model.input_w;
  meta["encoder"] = {{"r_max", model.encoder.r_max},
                     {"delta_t", model.encoder.delta_t},
                     {"sim_time", model.encoder.sim_time},
                     {"seed", model.encoder.seed}};
  json jlayers = json::array();
  for (const auto& l : model.layers) {
    json jl;
    jl["kind"] = kind_name(l.kind);
    jl["in_dim"] = l.in_dim;
    jl["out_dim"] = l.out_dim;
    jl["in_ch"] = l.in_ch;
    jl["in_h"] = l.in_h;
    jl["in_w"] = l.in_w;
    jl["filters"] = l.filters;
    jl["out_h"] = l.out_h;
    jl["out_w"] = l.out_w;
    jl["tau_mem"] = l.lif.tau_mem;
    jl["tau_syn"] = l.lif.tau_syn;
    jl["v_leak"] = l.lif.v_leak;
    jl["v_reset"] = l.lif.v_reset;
    jl["v_th"] = l.lif.v_th;
    jlayers.push_back(jl);
  }
  meta["layers"] = jlayers;
  w.add_text("model/meta", meta.dump());
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    if (model.layers[i].has_weights())
      w.add_floats("model/weights/" + std::to_string(i),
                   model.layers[i].weights);

  json dmeta;
  dmeta["class_count"] = detector.class_count();
  dmeta["target_tpr"] = detector.target_tpr;
  dmeta["layer_index"] = detector.layer_index;
  dmeta["count_dim"] = detector.count_dim;
  json jclasses = json::array();
  for (const auto& ca : detector.classes) {
    json jc;
    jc["clusters"] = ca.centroids.cols();
    jc["recon_dim"] = ca.reconstructions.rows();
    jc["members"] = ca.members;
    jclasses.push_back(jc);
  }
  dmeta["classes"] = jclasses;
  w.add_text("detector/meta", dmeta.dump());
  if (!detector.empty()) {
    w.add_floats("detector/thresholds",
                 detector.thresholds.cast<float>());
    for (int c = 0; c < detector.class_count(); ++c) {
      const auto& ca = detector.classes[std::size_t(c)];
      w.add_floats("detector/centroids/" + std::to_string(c),
                   ca.centroids.cast<float>());
      w.add_floats("detector/recon/" + std::to_string(c),
                   ca.reconstructions.cast<float>());
    }
  }

  std::vector<unsigned char> file;
  file.insert(file.end(), kStoreMagic, kStoreMagic + 8);
  append_u32(file, store.format_version);
  append_u32(file, w.n_sections);
  file.insert(file.end(), w.body.begin(), w.body.end());
  append_u32(file, crc32(file.data(), file.size()));

  std::ofstream out(store.path, std::ios::binary);
  if (!out) throw IoError("cannot open " + store.path + " for writing");
  out.write(reinterpret_cast<const char*>(file.data()),
            static_cast<std::streamsize>(file.size()));
  if (!out) throw IoError("write failed: " + store.path);
}

std::pair<NetworkModel<float>, ScpDetector> restore(
    const ArtifactStore& store) {
  std::ifstream in(store.path, std::ios::binary);
  if (!in) throw IoError("cannot open " + store.path);
  Reader r;
  r.bytes.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());
  if (r.bytes.size() < 20) throw IoError("file too short: " + store.path);

  // Checksum first: any flipped byte anywhere is a corruption error.
  const std::size_t body_len = r.bytes.size() - 4;
  std::uint32_t stored = 0;
  std::memcpy(&stored, r.bytes.data() + body_len, 4);
  if (crc32(r.bytes.data(), body_len) != stored)
    throw CorruptionError("checksum mismatch: " + store.path);

  if (std::memcmp(r.bytes.data(), kStoreMagic, 8) != 0)
    throw FormatError("bad magic: " + store.path);
  std::uint32_t version = 0, n_sections = 0;
  std::memcpy(&version, r.bytes.data() + 8, 4);
  std::memcpy(&n_sections, r.bytes.data() + 12, 4);
  if (version != store.format_version)
    throw FormatError("format version " + std::to_string(version) +
                      ", expected " + std::to_string(store.format_version));

  std::size_t off = 16;
  for (std::uint32_t s = 0; s < n_sections; ++s) {
    if (off + 4 > body_len) throw FormatError("truncated section table");
    std::uint32_t name_len = 0;
    std::memcpy(&name_len, r.bytes.data() + off, 4);
    off += 4;
    if (off + name_len + 8 > body_len)
      throw FormatError("truncated section table");
    std::string name(reinterpret_cast<const char*>(r.bytes.data() + off),
                     name_len);
    off += name_len;
    std::uint64_t payload_len = 0;
    std::memcpy(&payload_len, r.bytes.data() + off, 8);
    off += 8;
    if (off + payload_len > body_len)
      throw FormatError("section " + name + " overruns the file");
    r.sections[name] = {off, static_cast<std::size_t>(payload_len)};
    off += payload_len;
  }

  using json = nlohmann::json;
  const json meta = json::parse(r.text("model/meta"));
  NetworkModel<float> model;
  model.class_count = meta.at("class_count").get<int>();
  model.input_h = meta.at("input_h").get<int>();
  model.input_w = meta.at("input_w").get<int>();
  model.input_dim = model.input_h * model.input_w;
  model.encoder.r_max = meta.at("encoder").at("r_max").get<double>();
  model.encoder.delta_t = meta.at("encoder").at("delta_t").get<double>();
  model.encoder.sim_time = meta.at("encoder").at("sim_time").get<double>();
  model.encoder.seed = meta.at("encoder").at("seed").get<std::uint64_t>();
  std::size_t i = 0;
  for (const auto& jl : meta.at("layers")) {
    LayerSpec<float> l;
    l.kind = kind_from_name(jl.at("kind").get<std::string>());
    l.in_dim = jl.at("in_dim").get<int>();
    l.out_dim = jl.at("out_dim").get<int>();
    l.in_ch = jl.at("in_ch").get<int>();
    l.in_h = jl.at("in_h").get<int>();
    l.in_w = jl.at("in_w").get<int>();
    l.filters = jl.at("filters").get<int>();
    l.out_h = jl.at("out_h").get<int>();
    l.out_w = jl.at("out_w").get<int>();
    l.lif.tau_mem = jl.at("tau_mem").get<float>();
    l.lif.tau_syn = jl.at("tau_syn").get<float>();
    l.lif.v_leak = jl.at("v_leak").get<float>();
    l.lif.v_reset = jl.at("v_reset").get<float>();
    l.lif.v_th = jl.at("v_th").get<float>();
    if (l.has_weights()) {
      const Eigen::Index rows =
          l.kind == LayerKind::Conv2d ? l.filters : l.out_dim;
      l.weights = r.floats("model/weights/" + std::to_string(i), rows,
                           l.fan_in());
    }
    model.layers.push_back(std::move(l));
    ++i;
  }
  model.validate();

  const json dmeta = json::parse(r.text("detector/meta"));
  ScpDetector det;
  const int dc = dmeta.at("class_count").get<int>();
  det.target_tpr = dmeta.at("target_tpr").get<double>();
  det.layer_index = dmeta.at("layer_index").get<int>();
  det.count_dim = dmeta.at("count_dim").get<int>();
  if (dc > 0) {
    det.classes.resize(std::size_t(dc));
    det.thresholds =
        r.floats("detector/thresholds", dc, 1).cast<double>();
    for (int c = 0; c < dc; ++c) {
      const json& jc = dmeta.at("classes").at(std::size_t(c));
      auto& ca = det.classes[std::size_t(c)];
      const Eigen::Index m = jc.at("clusters").get<Eigen::Index>();
      const Eigen::Index rd = jc.at("recon_dim").get<Eigen::Index>();
      ca.members = jc.at("members").get<std::vector<std::vector<int>>>();
      ca.centroids = r.floats("detector/centroids/" + std::to_string(c),
                              det.count_dim, m)
                         .cast<double>();
      ca.reconstructions =
          r.floats("detector/recon/" + std::to_string(c), rd, m)
              .cast<double>();
    }
  }
  return {std::move(model), std::move(det)};
}

}  // namespace snnood
