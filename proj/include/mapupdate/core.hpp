#pragma once

// Shared data model: georeferencing, road graphs, confidence tensors,
// rasters and proposals.
//
// Pixel convention: i is the column (x, rightward), j is the row (y,
// downward). Pixel (i, j) is the unit square centred on the point (i, j).
// Angles are measured from +x towards +y in image space, so a step of
// length d along angle a moves from (i, j) to (i + d cos a, j + d sin a).

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mapupdate {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr int kNumDirections = 64;
inline constexpr double kChannelWidth = kTwoPi / kNumDirections;
inline constexpr double kDefaultMetersPerPixel = 0.6;
inline constexpr int kDefaultScaleFactor = 4;

struct Vec2 {
  double i = 0.0;
  double j = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.i + b.i, a.j + b.j}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.i - b.i, a.j - b.j}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.i * s, a.j * s}; }
double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);
// Distance from p to the closed segment [a, b].
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

// Axis-aligned box in image pixels, closed on both ends.
struct BBox {
  double min_i = 0.0;
  double min_j = 0.0;
  double max_i = -1.0;
  double max_j = -1.0;

  bool empty() const { return max_i < min_i || max_j < min_j; }
  double width() const { return empty() ? 0.0 : max_i - min_i; }
  double height() const { return empty() ? 0.0 : max_j - min_j; }
  void expand(Vec2 p);
  void expand(const BBox& other);
  BBox padded(double pad) const;
  // Closed intersection test; boxes that only touch intersect.
  bool intersects(const BBox& other) const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct GeoTransform {
  double meters_per_pixel = kDefaultMetersPerPixel;
  double origin_x = 0.0;  // world x of pixel (0, 0)
  double origin_y = 0.0;  // world y of pixel (0, 0); y grows northward

  GeoTransform() = default;
  GeoTransform(double mpp, double x0, double y0);

  Vec2 pixel_to_world(Vec2 px) const;
  Vec2 world_to_pixel(Vec2 w) const;
};

double px_to_m(double pixels, double meters_per_pixel);
double m_to_px(double meters, double meters_per_pixel);

// Direction channels.
int channel_of_angle(double alpha);
double angle_center(int channel);
double normalize_angle(double alpha);
double angular_distance(double a, double b);

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  bool base = false;
};

// Planar undirected road graph with vertices in image pixels. Vertices and
// edges carry a `base` flag separating the existing map from traced
// additions.
class RoadGraph {
 public:
  std::size_t add_vertex(Vec2 p, bool base = false);
  // Throws std::invalid_argument on self-loops, duplicates, bad indices.
  std::size_t add_edge(std::size_t u, std::size_t v, bool base = false);
  bool try_add_edge(std::size_t u, std::size_t v, bool base = false);

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return vertices_.empty(); }

  Vec2 vertex(std::size_t v) const { return vertices_.at(v); }
  bool vertex_is_base(std::size_t v) const { return vertex_base_.at(v); }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Edge& edge(std::size_t e) const { return edges_.at(e); }
  const std::vector<Edge>& edges() const { return edges_; }
  // Incident edge ids of v.
  const std::vector<std::size_t>& incident(std::size_t v) const { return adjacency_.at(v); }
  std::size_t other_end(std::size_t e, std::size_t v) const;
  std::size_t degree(std::size_t v) const { return adjacency_.at(v).size(); }
  std::optional<std::size_t> find_edge(std::size_t u, std::size_t v) const;
  bool has_edge(std::size_t u, std::size_t v) const { return find_edge(u, v).has_value(); }

  double edge_length_px(std::size_t e) const;
  double total_length_px() const;
  BBox bbox() const;

  // Checks the structural invariants; throws std::invalid_argument.
  void validate() const;

 private:
  std::vector<Vec2> vertices_;
  std::vector<bool> vertex_base_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

// Dense float tensor in row-major (j, i, k) order. Used for confidence
// tensors, segmentation rasters and scorer requests/responses.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
         std::uint32_t scale_factor = 1, float fill = 0.0f);
  Tensor(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
         std::uint32_t scale_factor, std::vector<float> data);

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::uint32_t channels() const { return channels_; }
  std::uint32_t scale_factor() const { return scale_factor_; }

  std::size_t index(std::uint32_t j, std::uint32_t i, std::uint32_t k) const {
    return (static_cast<std::size_t>(j) * width_ + i) * channels_ + k;
  }
  float at(std::uint32_t j, std::uint32_t i, std::uint32_t k) const { return data_[index(j, i, k)]; }
  float& at(std::uint32_t j, std::uint32_t i, std::uint32_t k) { return data_[index(j, i, k)]; }
  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  bool values_in_unit_interval() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::uint32_t channels_ = 0;
  std::uint32_t scale_factor_ = 1;
  std::vector<float> data_;
};

// Per-pixel, per-direction road confidence: 64 channels, values in [0, 1],
// stored at 1/scale_factor of image resolution.
class ConfidenceTensor {
 public:
  ConfidenceTensor() = default;
  explicit ConfidenceTensor(Tensor t);
  ConfidenceTensor(std::uint32_t height, std::uint32_t width,
                   std::uint32_t scale_factor = kDefaultScaleFactor, float fill = 0.0f);

  const Tensor& tensor() const { return tensor_; }
  Tensor& mutable_tensor() { return tensor_; }
  std::uint32_t height() const { return tensor_.height(); }
  std::uint32_t width() const { return tensor_.width(); }
  std::uint32_t scale_factor() const { return tensor_.scale_factor(); }
  // Image-resolution extent.
  std::uint32_t image_width() const { return tensor_.width() * tensor_.scale_factor(); }
  std::uint32_t image_height() const { return tensor_.height() * tensor_.scale_factor(); }
  float at(std::uint32_t j, std::uint32_t i, int k) const {
    return tensor_.at(j, i, static_cast<std::uint32_t>(k));
  }

  friend bool operator==(const ConfidenceTensor&, const ConfidenceTensor&) = default;

 private:
  Tensor tensor_;
};

class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
              GeoTransform transform = {}, std::uint8_t fill = 0);
  RasterImage(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
              GeoTransform transform, std::vector<std::uint8_t> data);

  std::uint32_t height() const { return height_; }
  std::uint32_t width() const { return width_; }
  std::uint32_t channels() const { return channels_; }
  const GeoTransform& transform() const { return transform_; }
  void set_transform(const GeoTransform& t) { transform_ = t; }

  std::uint8_t at(std::uint32_t j, std::uint32_t i, std::uint32_t c = 0) const {
    return data_[(static_cast<std::size_t>(j) * width_ + i) * channels_ + c];
  }
  std::uint8_t& at(std::uint32_t j, std::uint32_t i, std::uint32_t c = 0) {
    return data_[(static_cast<std::size_t>(j) * width_ + i) * channels_ + c];
  }
  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  friend bool operator==(const RasterImage& a, const RasterImage& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.channels_ == b.channels_ &&
           a.data_ == b.data_;
  }

 private:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::uint32_t channels_ = 0;
  GeoTransform transform_{};
  std::vector<std::uint8_t> data_;
};

// Integer pixel window [x0, x0 + width) x [y0, y0 + height).
struct PixelWindow {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  bool empty() const { return width <= 0 || height <= 0; }
  bool contains(int x, int y) const {
    return x >= x0 && y >= y0 && x < x0 + width && y < y0 + height;
  }
  bool overlaps(const PixelWindow& o) const;
  Vec2 center() const;

  friend bool operator==(const PixelWindow&, const PixelWindow&) = default;
};

// Shifts a window inward so it lies inside a raster of the given size.
// Requires the window to fit.
PixelWindow clamp_shift(PixelWindow w, int raster_width, int raster_height);
// Intersects a window with the raster extent.
PixelWindow clamp_intersect(PixelWindow w, int raster_width, int raster_height);
// Pixels floor(min) through ceil(max) inclusive: a conservative cover.
PixelWindow window_covering(const BBox& box);

RasterImage crop(const RasterImage& img, const PixelWindow& w);

enum class ProposalKind { NewRoad, RemovedRoad, NewBuilding };

std::string_view to_string(ProposalKind kind);
ProposalKind proposal_kind_from_string(std::string_view s);

using Ring = std::vector<Vec2>;

// One connected component of candidate change.
struct Proposal {
  ProposalKind kind = ProposalKind::NewRoad;
  RoadGraph road;            // road kinds
  std::vector<Ring> rings;   // buildings: outer ring first
  BBox bbox;
  std::optional<double> score;

  bool is_road() const { return kind != ProposalKind::NewBuilding; }
  // Recomputes bbox from geometry.
  void update_bbox();
};

BBox geometry_bbox(const Proposal& p);

}  // namespace mapupdate
