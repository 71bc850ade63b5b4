#include "snnood/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "snnood/errors.hpp"

namespace snnood {

VecD backproject(const std::vector<MatD>& weights, const VecD& q) {
  VecD cur = q;
  for (auto it = weights.rbegin(); it != weights.rend(); ++it) {
    if (it->rows() != cur.size())
      throw ConfigError("back-projection chain dimension mismatch");
    cur = it->transpose() * cur;
  }
  return cur.cwiseMax(0.0);
}

MatD bilinear_resize(const MatD& in, int out_h, int out_w) {
  const int ih = static_cast<int>(in.rows());
  const int iw = static_cast<int>(in.cols());
  MatD out(out_h, out_w);
  // Corner-aligned sampling: the grid extremes map onto each other, which
  // keeps the response to a delta mass-preserving up to interpolation ripple.
  const double sy = out_h > 1 ? double(ih - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? double(iw - 1) / (out_w - 1) : 0.0;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = oy * sy;
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, ih - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = ox * sx;
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, iw - 1);
      const double wx = fx - x0;
      out(oy, ox) = (1.0 - wy) * ((1.0 - wx) * in(y0, x0) + wx * in(y0, x1)) +
                    wy * ((1.0 - wx) * in(y1, x0) + wx * in(y1, x1));
    }
  }
  return out;
}

namespace detail {

MatD render_heatmap(const VecD& values, int input_h, int input_w, int filters,
                    int map_h, int map_w, DepthAgg agg) {
  if (filters == 0) {
    // Fully-connected path: row-major unflatten to the image shape.
    if (values.size() != Eigen::Index(input_h) * input_w)
      throw ShapeError("relevance length " + std::to_string(values.size()) +
                       " does not match " + std::to_string(input_h) + "x" +
                       std::to_string(input_w));
    MatD out(input_h, input_w);
    for (int r = 0; r < input_h; ++r)
      for (int c = 0; c < input_w; ++c)
        out(r, c) = values[Eigen::Index(r) * input_w + c];
    return out;
  }
  // Conv path: (filters, h, w) tensor, depth-wise aggregation, upscale.
  if (values.size() != Eigen::Index(filters) * map_h * map_w)
    throw ShapeError("relevance length " + std::to_string(values.size()) +
                     " does not match " + std::to_string(filters) + "x" +
                     std::to_string(map_h) + "x" + std::to_string(map_w));
  MatD agg_map = MatD::Zero(map_h, map_w);
  for (int f = 0; f < filters; ++f)
    for (int r = 0; r < map_h; ++r)
      for (int c = 0; c < map_w; ++c)
        agg_map(r, c) +=
            values[(Eigen::Index(f) * map_h + r) * map_w + c];
  if (agg == DepthAgg::Mean) agg_map /= double(filters);
  return bilinear_resize(agg_map, input_h, input_w);
}

}  // namespace detail

void write_pgm(const std::string& path, const MatD& image, VizRange range) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  const double span = range.hi > range.lo ? range.hi - range.lo : 1.0;
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const double v = std::clamp((image(r, c) - range.lo) / span, 0.0, 1.0);
      const unsigned char byte =
          static_cast<unsigned char>(std::lround(v * 255.0));
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  if (!out) throw IoError("PGM write failed: " + path);
}

void write_matrix_csv(const std::string& path, const MatD& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      out << buf << (c + 1 < m.cols() ? "," : "");
    }
    out << "\n";
  }
  if (!out) throw IoError("CSV write failed: " + path);
}

}  // namespace snnood
