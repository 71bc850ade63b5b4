#include "snnood/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "snnood/errors.hpp"
#include "snnood/rng.hpp"

namespace snnood {

namespace {

struct P {
  double x, y;
};
using Stroke = std::vector<P>;
using Glyph = std::vector<Stroke>;

Stroke ring(double cx, double cy, double rx, double ry, int n = 12) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    s.push_back({cx + rx * std::sin(a), cy - ry * std::cos(a)});
  }
  return s;
}

// Hand-laid stroke skeletons in a unit box (x right, y down).
std::vector<Glyph> digit_glyphs() {
  std::vector<Glyph> g(10);
  g[0] = {ring(0.5, 0.5, 0.30, 0.42)};
  g[1] = {{{0.32, 0.26}, {0.55, 0.08}, {0.55, 0.92}}};
  g[2] = {{{0.22, 0.28},
           {0.28, 0.13},
           {0.52, 0.08},
           {0.75, 0.15},
           {0.78, 0.32},
           {0.66, 0.52},
           {0.22, 0.92},
           {0.80, 0.92}}};
  g[3] = {{{0.25, 0.14},
           {0.58, 0.08},
           {0.76, 0.24},
           {0.58, 0.44},
           {0.44, 0.49},
           {0.60, 0.54},
           {0.79, 0.72},
           {0.58, 0.92},
           {0.25, 0.86}}};
  g[4] = {{{0.62, 0.08}, {0.16, 0.62}, {0.85, 0.62}},
          {{0.63, 0.32}, {0.63, 0.92}}};
  g[5] = {{{0.75, 0.08},
           {0.28, 0.08},
           {0.24, 0.44},
           {0.52, 0.40},
           {0.75, 0.55},
           {0.73, 0.78},
           {0.52, 0.92},
           {0.25, 0.84}}};
  g[6] = {{{0.66, 0.08},
           {0.38, 0.30},
           {0.26, 0.58},
           {0.30, 0.83},
           {0.54, 0.92},
           {0.74, 0.77},
           {0.70, 0.58},
           {0.46, 0.52},
           {0.28, 0.63}}};
  g[7] = {{{0.20, 0.10}, {0.80, 0.10}, {0.44, 0.92}}};
  g[8] = {ring(0.5, 0.29, 0.21, 0.21), ring(0.5, 0.68, 0.25, 0.24)};
  g[9] = {{{0.72, 0.45},
           {0.48, 0.52},
           {0.30, 0.42},
           {0.28, 0.22},
           {0.50, 0.08},
           {0.70, 0.16},
           {0.72, 0.40},
           {0.68, 0.70},
           {0.44, 0.92}}};
  return g;
}

std::vector<Glyph> letter_glyphs() {
  std::vector<Glyph> g(10);
  // A through J.
  g[0] = {{{0.15, 0.92}, {0.50, 0.08}, {0.85, 0.92}},
          {{0.30, 0.62}, {0.70, 0.62}}};
  g[1] = {{{0.25, 0.08}, {0.25, 0.92}},
          {{0.25, 0.08}, {0.62, 0.12}, {0.72, 0.30}, {0.58, 0.48}, {0.25, 0.50}},
          {{0.25, 0.50}, {0.68, 0.55}, {0.78, 0.72}, {0.62, 0.92}, {0.25, 0.92}}};
  g[2] = {{{0.76, 0.20},
           {0.56, 0.08},
           {0.30, 0.15},
           {0.20, 0.40},
           {0.20, 0.60},
           {0.30, 0.85},
           {0.56, 0.92},
           {0.76, 0.80}}};
  g[3] = {{{0.25, 0.08}, {0.25, 0.92}},
          {{0.25, 0.08}, {0.58, 0.12}, {0.80, 0.35}, {0.80, 0.65}, {0.58, 0.88},
           {0.25, 0.92}}};
  g[4] = {{{0.75, 0.08}, {0.25, 0.08}, {0.25, 0.92}, {0.75, 0.92}},
          {{0.25, 0.50}, {0.65, 0.50}}};
  g[5] = {{{0.75, 0.08}, {0.25, 0.08}, {0.25, 0.92}},
          {{0.25, 0.50}, {0.65, 0.50}}};
  g[6] = {{{0.76, 0.20},
           {0.56, 0.08},
           {0.30, 0.15},
           {0.20, 0.40},
           {0.20, 0.60},
           {0.30, 0.85},
           {0.56, 0.92},
           {0.76, 0.80},
           {0.78, 0.56},
           {0.52, 0.56}}};
  g[7] = {{{0.20, 0.08}, {0.20, 0.92}},
          {{0.80, 0.08}, {0.80, 0.92}},
          {{0.20, 0.50}, {0.80, 0.50}}};
  g[8] = {{{0.35, 0.08}, {0.65, 0.08}},
          {{0.50, 0.08}, {0.50, 0.92}},
          {{0.35, 0.92}, {0.65, 0.92}}};
  g[9] = {{{0.35, 0.08}, {0.78, 0.08}},
          {{0.60, 0.08}, {0.60, 0.74}, {0.46, 0.92}, {0.28, 0.80}}};
  return g;
}

double dist_to_segment(double px, double py, const P& a, const P& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

/// Filled-silhouette membership in unit coordinates, one shape per class.
bool shape_member(int label, double x, double y) {
  const double dx = std::abs(x - 0.5), dy = std::abs(y - 0.5);
  switch (label) {
    case 0:  // solid block
      return std::max(dx, dy) < 0.33;
    case 1:  // tall rectangle
      return dx < 0.16 && dy < 0.42;
    case 2:  // tee
      return (dx < 0.42 && std::abs(y - 0.22) < 0.12) ||
             (dx < 0.15 && y > 0.10 && y < 0.92);
    case 3:  // triangle, narrow top
      return y > 0.10 && y < 0.90 && dx < 0.05 + 0.45 * (y - 0.10) / 0.80;
    case 4:  // hourglass
      return dy < 0.42 && dx < 0.04 + 0.41 * (dy / 0.42);
    case 5: {  // thick ring
      const double r = std::sqrt(dx * dx + dy * dy) / 0.42;
      return r > 0.45 && r < 1.0;
    }
    case 6:  // diamond
      return dx + dy < 0.40;
    case 7:  // U
      return std::max(dx / 0.35, dy / 0.42) < 1.0 &&
             !(dx < 0.18 && y < 0.62);
    case 8:  // plus
      return (dx < 0.14 && dy < 0.42) || (dy < 0.14 && dx < 0.42);
    default:  // three bars
      return dx < 0.40 && (std::abs(y - 0.22) < 0.09 ||
                           std::abs(y - 0.50) < 0.09 ||
                           std::abs(y - 0.78) < 0.09);
  }
}

}  // namespace

ImageDataset make_glyph_dataset(GlyphSet set, int count, std::uint64_t seed,
                                const std::string& name) {
  if (count < 1) throw ArgumentError("count must be >= 1");
  const auto glyphs = set == GlyphSet::Letters ? letter_glyphs() : digit_glyphs();
  const int classes = static_cast<int>(glyphs.size());
  constexpr int kSide = 28;

  ImageDataset ds;
  ds.height = kSide;
  ds.width = kSide;
  ds.class_count = classes;
  ds.name = name;
  ds.images = MatF::Zero(kSide * kSide, count);
  ds.labels.resize(count);

  std::vector<P> pts;
  for (int i = 0; i < count; ++i) {
    const int label = i % classes;
    ds.labels[i] = label;
    SplitMix rng(hash3(seed, set == GlyphSet::Digits ? 0xD1 : 0x1E,
                       std::uint64_t(i)));

    // Centered glyphs with style jitter (slant, size, stroke width); the
    // canvas position stays fixed like mass-centered scan data.
    const double theta = rng.uniform(-0.22, 0.22);
    const double sx = rng.uniform(0.85, 1.12);
    const double sy = rng.uniform(0.85, 1.12);
    const double shear = rng.uniform(-0.12, 0.12);
    const double tx = 13.5 + rng.uniform(-0.8, 0.8);
    const double ty = 13.5 + rng.uniform(-0.8, 0.8);
    const double half_width = rng.uniform(0.50, 0.95);
    const double contrast = rng.uniform(0.80, 1.0);
    const double ct = std::cos(theta), st = std::sin(theta);

    auto to_px = [&](const P& p) -> P {
      double x = (p.x - 0.5) * 20.0 * sx;
      double y = (p.y - 0.5) * 20.0 * sy;
      x += shear * y;
      return {tx + ct * x - st * y, ty + st * x + ct * y};
    };

    float* img = ds.images.col(i).data();

    if (set == GlyphSet::Shapes) {
      // Silhouettes fill most of the canvas (object thumbnails carry far
      // more pixel mass than handwriting strokes).
      const double a = 26.0 * sx, b = 26.0 * shear * sy, dd = 26.0 * sy;
      const double inv_det = 1.0 / (a * dd);
      const double i00 = (st * b + ct * dd) * inv_det;
      const double i01 = (st * dd - ct * b) * inv_det;
      const double i10 = -st * a * inv_det;
      const double i11 = ct * a * inv_det;
      const bool shade_horizontal = rng.uniform() < 0.5;
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          double coverage = 0.0;
          double gx = 0.5, gy = 0.5;
          for (double oy : {-0.25, 0.25})
            for (double ox : {-0.25, 0.25}) {
              const double ux = x + 0.5 + ox - tx;
              const double uy = y + 0.5 + oy - ty;
              const double px = i00 * ux + i01 * uy + 0.5;
              const double py = i10 * ux + i11 * uy + 0.5;
              if (shape_member(label, px, py)) {
                coverage += 0.25;
                gx = px;
                gy = py;
              }
            }
          if (coverage == 0.0) continue;
          const double shade =
              0.82 + 0.18 * std::clamp(shade_horizontal ? gx : gy, 0.0, 1.0);
          const double speckle =
              0.06 * (to_unit(hash3(seed ^ 0x5A, std::uint64_t(i),
                                    std::uint64_t(y * kSide + x))) -
                      0.5);
          img[y * kSide + x] = static_cast<float>(
              std::clamp(coverage * contrast * shade + speckle, 0.0, 1.0));
        }
      continue;
    }

    for (const Stroke& stroke : glyphs[std::size_t(label)]) {
      pts.clear();
      for (const P& p : stroke) pts.push_back(to_px(p));
      for (std::size_t sgm = 0; sgm + 1 < pts.size(); ++sgm) {
        const P& a = pts[sgm];
        const P& b = pts[sgm + 1];
        const double reach = half_width + 1.0;
        const int x0 = std::max(0, int(std::floor(std::min(a.x, b.x) - reach)));
        const int x1 =
            std::min(kSide - 1, int(std::ceil(std::max(a.x, b.x) + reach)));
        const int y0 = std::max(0, int(std::floor(std::min(a.y, b.y) - reach)));
        const int y1 =
            std::min(kSide - 1, int(std::ceil(std::max(a.y, b.y) + reach)));
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) {
            const double d = dist_to_segment(x + 0.5, y + 0.5, a, b);
            const double v =
                std::clamp((half_width + 0.6 - d) / 0.6, 0.0, 1.0) * contrast;
            float& px = img[y * kSide + x];
            px = std::max(px, static_cast<float>(v));
          }
      }
    }
  }
  ds.validate();
  return ds;
}

}  // namespace snnood
