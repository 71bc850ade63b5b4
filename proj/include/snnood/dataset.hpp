#pragma once

#include <cstdint>
#include <string>

#include "snnood/types.hpp"

namespace snnood {

/// An in-memory grayscale image classification dataset. Images are stored
/// column-wise (one sample per column, row-major flattened pixels) with values
/// normalized to [0, 1].
struct ImageDataset {
  MatF images;  // (height*width) x N
  VecI labels;  // N
  int height = 0;
  int width = 0;
  int class_count = 0;
  std::string name;

  int count() const { return static_cast<int>(images.cols()); }
  int dim() const { return height * width; }

  /// Throws if any structural invariant is violated (pixel range, label
  /// range, shape agreement).
  void validate() const;
};

/// Reads an IDX image/label file pair (big-endian headers, magic 0x00000803
/// for images and 0x00000801 for labels). Pixels are scaled by 1/255.
ImageDataset load_idx(const std::string& images_path,
                      const std::string& labels_path,
                      const std::string& name = "");

/// Writes the dataset back out as an IDX pair (inverse of load_idx up to the
/// 1/255 quantization).
void write_idx(const ImageDataset& ds, const std::string& images_path,
               const std::string& labels_path);

/// Draws a stratified subsample of `total` items: per-class counts differ by
/// at most one (over the classes actually present), deterministic per seed.
ImageDataset stratified_sample(const ImageDataset& ds, int total,
                               std::uint64_t seed);

/// Stamps a white 5x5 square into one of the four image corners (2 px in
/// from the border), chosen uniformly per image. Requires 28x28 inputs.
ImageDataset make_mnist_square(const ImageDataset& ds, std::uint64_t seed);

/// Top-left corners eligible for the square artifact on a 28x28 canvas.
inline constexpr int kSquareCorners[4][2] = {{2, 2}, {2, 21}, {21, 2}, {21, 21}};
inline constexpr int kSquareSide = 5;

}  // namespace snnood
