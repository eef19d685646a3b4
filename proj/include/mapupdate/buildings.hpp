#pragma once

// New-building candidates from per-pixel segmentation probabilities of the
// two epochs.

#include <vector>

#include "mapupdate/core.hpp"

namespace mapupdate {

// Single-channel probability raster, values in [0, 1].
class SegRaster {
 public:
  SegRaster() = default;
  explicit SegRaster(Tensor t, GeoTransform transform = {});
  SegRaster(std::uint32_t height, std::uint32_t width, float fill = 0.0f, GeoTransform transform = {});

  std::uint32_t height() const { return probs_.height(); }
  std::uint32_t width() const { return probs_.width(); }
  float at(std::uint32_t j, std::uint32_t i) const { return probs_.at(j, i, 0); }
  void set(std::uint32_t j, std::uint32_t i, float v);
  const Tensor& tensor() const { return probs_; }
  const GeoTransform& transform() const { return transform_; }

 private:
  Tensor probs_;
  GeoTransform transform_{};
};

// 1 where p_old < t_old and p_new > t_new, else 0.
RasterImage compare_segmentation(const SegRaster& p_old, const SegRaster& p_new, double t_old, double t_new);

// 4-connected components of 1-pixels, each traced to its outer boundary
// polygon (vertices on pixel corners). Components smaller than min_area_m2
// are dropped.
std::vector<Proposal> extract_polygons(const RasterImage& b, double min_area_m2, double meters_per_pixel);

// Even-odd point-in-polygon over all rings.
bool point_in_polygon(const std::vector<Ring>& rings, Vec2 p);
double ring_area(const Ring& ring);

// 1 where the pixel centre is inside the polygon or within buffer_m of its
// boundary. Throws std::invalid_argument for degenerate polygons.
RasterImage building_mask(const Proposal& prop, const PixelWindow& window, double buffer_m, double meters_per_pixel);

// Burns polygons into a {0,1} raster (pixel centres inside).
RasterImage rasterize_polygons(const std::vector<std::vector<Ring>>& polygons, std::uint32_t height,
                               std::uint32_t width);

}  // namespace mapupdate
