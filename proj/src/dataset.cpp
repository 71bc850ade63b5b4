#include "snnood/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

#include "snnood/errors.hpp"
#include "snnood/rng.hpp"

namespace snnood {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

void ImageDataset::validate() const {
  if (images.rows() != height * width)
    throw ConsistencyError("image rows do not match height*width");
  if (labels.size() != images.cols())
    throw ConsistencyError("label count does not match image count");
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count)
      throw ConsistencyError("label " + std::to_string(labels[i]) +
                             " outside [0, " + std::to_string(class_count) +
                             ")");
  }
  if ((images.array() < 0.0f).any() || (images.array() > 1.0f).any())
    throw ConsistencyError("pixel value outside [0, 1]");
}

ImageDataset load_idx(const std::string& images_path,
                      const std::string& labels_path,
                      const std::string& name) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path);

  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != kImageMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "bad image magic 0x%08x", img_magic);
    throw FormatError(std::string(buf) + " in " + images_path);
  }
  const std::uint32_t n_images = read_be32(img, images_path);
  const std::uint32_t h = read_be32(img, images_path);
  const std::uint32_t w = read_be32(img, images_path);

  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != kLabelMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "bad label magic 0x%08x", lab_magic);
    throw FormatError(std::string(buf) + " in " + labels_path);
  }
  const std::uint32_t n_labels = read_be32(lab, labels_path);
  if (n_images != n_labels)
    throw ConsistencyError("image count " + std::to_string(n_images) +
                           " != label count " + std::to_string(n_labels));

  ImageDataset ds;
  ds.height = static_cast<int>(h);
  ds.width = static_cast<int>(w);
  ds.name = name;
  const std::size_t dim = std::size_t(h) * w;
  ds.images.resize(static_cast<Eigen::Index>(dim), n_images);
  ds.labels.resize(n_images);

  std::vector<unsigned char> pixel_buf(dim);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    img.read(reinterpret_cast<char*>(pixel_buf.data()),
             static_cast<std::streamsize>(dim));
    if (!img) throw IoError("truncated IDX file: " + images_path);
    float* col = ds.images.col(i).data();
    for (std::size_t p = 0; p < dim; ++p)
      col[p] = static_cast<float>(pixel_buf[p]) / 255.0f;
  }
  std::vector<unsigned char> label_buf(n_labels);
  lab.read(reinterpret_cast<char*>(label_buf.data()), n_labels);
  if (!lab) throw IoError("truncated IDX file: " + labels_path);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    ds.labels[i] = label_buf[i];
    max_label = std::max(max_label, int(label_buf[i]));
  }
  ds.class_count = max_label + 1;
  ds.validate();
  return ds;
}

void write_idx(const ImageDataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path + " for writing");
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path + " for writing");

  const int n = ds.count();
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(n));
  write_be32(img, static_cast<std::uint32_t>(ds.height));
  write_be32(img, static_cast<std::uint32_t>(ds.width));
  std::vector<unsigned char> pixel_buf(static_cast<std::size_t>(ds.dim()));
  for (int i = 0; i < n; ++i) {
    const float* col = ds.images.col(i).data();
    for (int p = 0; p < ds.dim(); ++p)
      pixel_buf[static_cast<std::size_t>(p)] =
          static_cast<unsigned char>(std::lround(col[p] * 255.0f));
    img.write(reinterpret_cast<char*>(pixel_buf.data()), ds.dim());
  }

  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(n));
  for (int i = 0; i < n; ++i) {
    const unsigned char b = static_cast<unsigned char>(ds.labels[i]);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!img || !lab) throw IoError("IDX write failed");
}

ImageDataset stratified_sample(const ImageDataset& ds, int total,
                               std::uint64_t seed) {
  const int n = ds.count();
  const int c = ds.class_count;
  if (total > n)
    throw ArgumentError("requested " + std::to_string(total) + " of " +
                        std::to_string(n) + " samples");
  if (total < c) throw ArgumentError("total below class count");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(c));
  for (int i = 0; i < n; ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::vector<int> present;
  for (int k = 0; k < c; ++k)
    if (!by_class[static_cast<std::size_t>(k)].empty()) present.push_back(k);
  const int cp = static_cast<int>(present.size());

  // Even split over the classes present; the remainder goes to a seeded
  // random subset of them, one extra each.
  const int base = total / cp;
  const int extra = total % cp;
  std::vector<int> quota(static_cast<std::size_t>(cp), base);
  const auto extra_order =
      shuffled_indices(static_cast<std::size_t>(cp), hash2(seed, 0x51));
  for (int e = 0; e < extra; ++e) quota[extra_order[std::size_t(e)]] += 1;

  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(total));
  for (int k = 0; k < cp; ++k) {
    auto& pool = by_class[static_cast<std::size_t>(present[std::size_t(k)])];
    if (quota[std::size_t(k)] > static_cast<int>(pool.size()))
      throw ArgumentError("class " + std::to_string(present[std::size_t(k)]) +
                          " has only " + std::to_string(pool.size()) +
                          " samples, needs " +
                          std::to_string(quota[std::size_t(k)]));
    const auto order = shuffled_indices(
        pool.size(), hash3(seed, 0x52, std::uint64_t(present[std::size_t(k)])));
    for (int j = 0; j < quota[std::size_t(k)]; ++j)
      chosen.push_back(pool[order[std::size_t(j)]]);
  }

  ImageDataset out;
  out.height = ds.height;
  out.width = ds.width;
  out.class_count = ds.class_count;
  out.name = ds.name;
  out.images.resize(ds.images.rows(), total);
  out.labels.resize(total);
  for (int j = 0; j < total; ++j) {
    out.images.col(j) = ds.images.col(chosen[std::size_t(j)]);
    out.labels[j] = ds.labels[chosen[std::size_t(j)]];
  }
  return out;
}

ImageDataset make_mnist_square(const ImageDataset& ds, std::uint64_t seed) {
  if (ds.height != 28 || ds.width != 28)
    throw ArgumentError("square artifact requires 28x28 images");
  ImageDataset out = ds;
  out.name = ds.name.empty() ? "square" : ds.name + "-square";
  for (int i = 0; i < ds.count(); ++i) {
    const auto corner = kSquareCorners[hash3(seed, 0x5C, std::uint64_t(i)) & 3];
    float* col = out.images.col(i).data();
    for (int r = corner[0]; r < corner[0] + kSquareSide; ++r)
      for (int c = corner[1]; c < corner[1] + kSquareSide; ++c)
        col[r * 28 + c] = 1.0f;
  }
  return out;
}

}  // namespace snnood
