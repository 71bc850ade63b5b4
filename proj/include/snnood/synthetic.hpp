#pragma once

#include <cstdint>
#include <string>

#include "snnood/dataset.hpp"

namespace snnood {

/// Which glyph family to render. Digits (0-9) serve as an in-distribution
/// stand-in; Letters (A-J) are stroke glyphs from a different alphabet;
/// Shapes are filled object silhouettes with fabric-like shading (an
/// analogue of clothing thumbnails).
enum class GlyphSet { Digits, Letters, Shapes };

/// Renders a balanced 28x28 grayscale dataset of stroke glyphs with random
/// affine jitter (rotation, scale, shear, translation) and stroke-width
/// variation. Fully deterministic per seed; labels are the glyph indices.
ImageDataset make_glyph_dataset(GlyphSet set, int count, std::uint64_t seed,
                                const std::string& name);

}  // namespace snnood
