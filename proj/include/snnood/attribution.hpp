#pragma once

#include <string>
#include <vector>

#include "snnood/backproject.hpp"
#include "snnood/network.hpp"
#include "snnood/scp_detector.hpp"
#include "snnood/types.hpp"

namespace snnood {

/// Per-feature relevance of one query at the attribution input layer, plus
/// bookkeeping for rendering and reporting.
struct RelevanceMap {
  VecD values;           // length D_in, all >= 0
  MatD rendered;         // image-sized heatmap (filled by to_heatmap)
  int predicted_label = 0;
  double score_margin = 0.0;  // ood score - lambda^{predicted}
};

enum class DepthAgg { Mean, Sum };

/// Display range for heatmap export: [q-quantile, max] over a reference
/// sample of training heatmaps.
struct VizRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Relevance of a query trace: the absolute difference between the
/// back-projected query counts and the cached back-projection of the
/// closest archetype of the predicted class.
template <typename Scalar>
RelevanceMap relevance(const ScpDetector& det,
                       const NetworkModel<Scalar>& model,
                       const ForwardTrace<Scalar>& trace, int predicted) {
  det.check_class(predicted);
  const VecD counts = trace_counts(trace);
  const int m = closest_centroid(det, counts, predicted);
  const VecD rec_query = backproject(attribution_weights(model), counts);
  const MatD& recs = det.classes[std::size_t(predicted)].reconstructions;
  if (recs.rows() != rec_query.size())
    throw ShapeError("cached reconstructions do not match the model's "
                     "attribution input width");
  const VecD rec_centroid = recs.col(m);

  RelevanceMap map;
  map.values = (rec_query - rec_centroid).cwiseAbs();
  map.predicted_label = predicted;
  map.score_margin =
      ood_score(det, counts, predicted) - det.thresholds[predicted];
  return map;
}

/// Bilinear resize with half-pixel-centre sampling.
MatD bilinear_resize(const MatD& in, int out_h, int out_w);

namespace detail {

MatD render_heatmap(const VecD& values, int input_h, int input_w, int filters,
                    int map_h, int map_w, DepthAgg agg);

}  // namespace detail

/// Renders the relevance vector as an image-sized heatmap: FC models are
/// unflattened row-major; conv models are reshaped to filters x h x w,
/// aggregated depth-wise, and upscaled by bilinear interpolation. The
/// rendered matrix is stored on the map and returned; clipping to a display
/// range happens at export time.
template <typename Scalar>
const MatD& to_heatmap(RelevanceMap& map, const NetworkModel<Scalar>& model,
                       DepthAgg agg = DepthAgg::Mean) {
  int filters = 0, map_h = 0, map_w = 0;
  const int last = model.last_spiking_index();
  for (int i = 0; i <= last; ++i) {
    const auto& l = model.layers[std::size_t(i)];
    if (l.kind == LayerKind::Conv2d) {
      filters = l.filters;
      map_h = l.out_h;
      map_w = l.out_w;
    }
  }
  map.rendered = detail::render_heatmap(map.values, model.input_h,
                                        model.input_w, filters, map_h, map_w,
                                        agg);
  return map.rendered;
}

/// Writes an 8-bit binary PGM after clipping to the display range.
void write_pgm(const std::string& path, const MatD& image, VizRange range);

/// Writes the raw (un-clipped) matrix as CSV.
void write_matrix_csv(const std::string& path, const MatD& m);

/// Computes the display range from the heatmaps of `n` random training
/// samples: hi = max pixel value, lo = q-quantile, q = the detector's
/// target TPR.
template <typename Scalar>
VizRange heatmap_range(const ScpDetector& det,
                       const NetworkModel<Scalar>& model,
                       const ImageDataset& train, int n, std::uint64_t seed,
                       DepthAgg agg = DepthAgg::Mean) {
  const auto order =
      shuffled_indices(std::size_t(train.count()), hash2(seed, 0xA7));
  std::vector<double> pixels;
  const int take = std::min<int>(n, train.count());
  for (int j = 0; j < take; ++j) {
    const int idx = static_cast<int>(order[std::size_t(j)]);
    const Vec<Scalar> x = train.images.col(idx).cast<Scalar>();
    const auto pred = predict(model, x, std::uint64_t(idx));
    RelevanceMap map = relevance(det, model, pred.trace, pred.label);
    to_heatmap(map, model, agg);
    for (Eigen::Index i = 0; i < map.rendered.size(); ++i)
      pixels.push_back(map.rendered.data()[i]);
  }
  std::sort(pixels.begin(), pixels.end());
  VizRange r;
  r.hi = pixels.back();
  const std::size_t rank = static_cast<std::size_t>(
      std::max<long long>(1, static_cast<long long>(std::ceil(
                                 det.target_tpr * double(pixels.size())))));
  r.lo = pixels[std::min(rank, pixels.size()) - 1];
  if (r.hi <= r.lo) r.hi = r.lo + 1.0;
  return r;
}

}  // namespace snnood
