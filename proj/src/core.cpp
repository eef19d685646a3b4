#include "mapupdate/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mapupdate {

double norm(Vec2 v) { return std::hypot(v.i, v.j); }

double distance(Vec2 a, Vec2 b) { return norm(a - b); }

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.i * ab.i + ab.j * ab.j;
  if (len2 == 0.0) return distance(p, a);
  const Vec2 ap = p - a;
  double t = (ap.i * ab.i + ap.j * ab.j) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + ab * t);
}

void BBox::expand(Vec2 p) {
  if (empty()) {
    min_i = max_i = p.i;
    min_j = max_j = p.j;
    return;
  }
  min_i = std::min(min_i, p.i);
  min_j = std::min(min_j, p.j);
  max_i = std::max(max_i, p.i);
  max_j = std::max(max_j, p.j);
}

void BBox::expand(const BBox& other) {
  if (other.empty()) return;
  expand(Vec2{other.min_i, other.min_j});
  expand(Vec2{other.max_i, other.max_j});
}

BBox BBox::padded(double pad) const {
  if (empty()) return *this;
  return {min_i - pad, min_j - pad, max_i + pad, max_j + pad};
}

bool BBox::intersects(const BBox& o) const {
  if (empty() || o.empty()) return false;
  return min_i <= o.max_i && o.min_i <= max_i && min_j <= o.max_j && o.min_j <= max_j;
}

GeoTransform::GeoTransform(double mpp, double x0, double y0)
    : meters_per_pixel(mpp), origin_x(x0), origin_y(y0) {
  if (!(mpp > 0.0) || !std::isfinite(mpp)) {
    throw std::invalid_argument("meters_per_pixel must be positive");
  }
}

Vec2 GeoTransform::pixel_to_world(Vec2 px) const {
  return {origin_x + px.i * meters_per_pixel, origin_y - px.j * meters_per_pixel};
}

Vec2 GeoTransform::world_to_pixel(Vec2 w) const {
  return {(w.i - origin_x) / meters_per_pixel, (origin_y - w.j) / meters_per_pixel};
}

double px_to_m(double pixels, double meters_per_pixel) {
  if (pixels < 0.0 || !std::isfinite(pixels)) throw std::invalid_argument("px_to_m: negative distance");
  if (!(meters_per_pixel > 0.0)) throw std::invalid_argument("px_to_m: meters_per_pixel must be positive");
  return pixels * meters_per_pixel;
}

double m_to_px(double meters, double meters_per_pixel) {
  if (meters < 0.0 || !std::isfinite(meters)) throw std::invalid_argument("m_to_px: negative distance");
  if (!(meters_per_pixel > 0.0)) throw std::invalid_argument("m_to_px: meters_per_pixel must be positive");
  return meters / meters_per_pixel;
}

double normalize_angle(double alpha) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("angle must be finite");
  double a = std::fmod(alpha, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  // fmod of a value just below a multiple of 2*pi can round up to 2*pi.
  if (a >= kTwoPi) a = 0.0;
  return a;
}

int channel_of_angle(double alpha) {
  const double a = normalize_angle(alpha);
  const int k = static_cast<int>(std::floor(a / kChannelWidth));
  return std::clamp(k, 0, kNumDirections - 1);
}

double angle_center(int channel) {
  if (channel < 0 || channel >= kNumDirections) throw std::invalid_argument("channel out of range");
  return (channel + 0.5) * kChannelWidth;
}

double angular_distance(double a, double b) {
  const double d = std::fabs(normalize_angle(a) - normalize_angle(b));
  return std::min(d, kTwoPi - d);
}

// ---------------------------------------------------------------------------

std::size_t RoadGraph::add_vertex(Vec2 p, bool base) {
  if (!std::isfinite(p.i) || !std::isfinite(p.j)) throw std::invalid_argument("vertex coordinates must be finite");
  vertices_.push_back(p);
  vertex_base_.push_back(base);
  adjacency_.emplace_back();
  return vertices_.size() - 1;
}

bool RoadGraph::try_add_edge(std::size_t u, std::size_t v, bool base) {
  if (u >= vertices_.size() || v >= vertices_.size() || u == v || has_edge(u, v)) return false;
  edges_.push_back({u, v, base});
  adjacency_[u].push_back(edges_.size() - 1);
  adjacency_[v].push_back(edges_.size() - 1);
  return true;
}

std::size_t RoadGraph::add_edge(std::size_t u, std::size_t v, bool base) {
  if (u >= vertices_.size() || v >= vertices_.size()) throw std::invalid_argument("edge endpoint out of range");
  if (u == v) throw std::invalid_argument("self-loop edge");
  if (has_edge(u, v)) throw std::invalid_argument("duplicate edge");
  try_add_edge(u, v, base);
  return edges_.size() - 1;
}

std::size_t RoadGraph::other_end(std::size_t e, std::size_t v) const {
  const Edge& ed = edges_.at(e);
  return ed.u == v ? ed.v : ed.u;
}

std::optional<std::size_t> RoadGraph::find_edge(std::size_t u, std::size_t v) const {
  if (u >= adjacency_.size() || v >= adjacency_.size()) return std::nullopt;
  const std::size_t from = adjacency_[u].size() <= adjacency_[v].size() ? u : v;
  const std::size_t to = from == u ? v : u;
  for (std::size_t e : adjacency_[from]) {
    if (other_end(e, from) == to) return e;
  }
  return std::nullopt;
}

double RoadGraph::edge_length_px(std::size_t e) const {
  const Edge& ed = edges_.at(e);
  return distance(vertices_[ed.u], vertices_[ed.v]);
}

double RoadGraph::total_length_px() const {
  double total = 0.0;
  for (std::size_t e = 0; e < edges_.size(); ++e) total += edge_length_px(e);
  return total;
}

BBox RoadGraph::bbox() const {
  BBox b;
  for (const Vec2& p : vertices_) b.expand(p);
  return b;
}

void RoadGraph::validate() const {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& ed = edges_[e];
    if (ed.u >= vertices_.size() || ed.v >= vertices_.size()) throw std::invalid_argument("edge endpoint out of range");
    if (ed.u == ed.v) throw std::invalid_argument("self-loop edge");
    if (find_edge(ed.u, ed.v) != e) throw std::invalid_argument("duplicate edge");
  }
}

// ---------------------------------------------------------------------------

Tensor::Tensor(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
               std::uint32_t scale_factor, float fill)
    : height_(height), width_(width), channels_(channels), scale_factor_(scale_factor),
      data_(static_cast<std::size_t>(height) * width * channels, fill) {
  if (channels == 0) throw std::invalid_argument("tensor needs at least one channel");
  if (scale_factor == 0) throw std::invalid_argument("scale_factor must be positive");
}

Tensor::Tensor(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
               std::uint32_t scale_factor, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), scale_factor_(scale_factor),
      data_(std::move(data)) {
  if (channels == 0) throw std::invalid_argument("tensor needs at least one channel");
  if (scale_factor == 0) throw std::invalid_argument("scale_factor must be positive");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw std::invalid_argument("tensor data length does not match dimensions");
  }
}

bool Tensor::values_in_unit_interval() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

ConfidenceTensor::ConfidenceTensor(Tensor t) : tensor_(std::move(t)) {
  if (tensor_.channels() != kNumDirections) throw std::invalid_argument("confidence tensor must have 64 channels");
  if (!tensor_.values_in_unit_interval()) throw std::invalid_argument("confidence values must lie in [0, 1]");
}

ConfidenceTensor::ConfidenceTensor(std::uint32_t height, std::uint32_t width,
                                   std::uint32_t scale_factor, float fill)
    : ConfidenceTensor(Tensor(height, width, kNumDirections, scale_factor, fill)) {}

// ---------------------------------------------------------------------------

RasterImage::RasterImage(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
                         GeoTransform transform, std::uint8_t fill)
    : height_(height), width_(width), channels_(channels), transform_(transform),
      data_(static_cast<std::size_t>(height) * width * channels, fill) {
  if (channels < 1 || channels > 4) throw std::invalid_argument("raster channels must be 1-4");
}

RasterImage::RasterImage(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
                         GeoTransform transform, std::vector<std::uint8_t> data)
    : height_(height), width_(width), channels_(channels), transform_(transform),
      data_(std::move(data)) {
  if (channels < 1 || channels > 4) throw std::invalid_argument("raster channels must be 1-4");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw std::invalid_argument("raster data length does not match dimensions");
  }
}

bool PixelWindow::overlaps(const PixelWindow& o) const {
  if (empty() || o.empty()) return false;
  return x0 < o.x0 + o.width && o.x0 < x0 + width && y0 < o.y0 + o.height && o.y0 < y0 + height;
}

Vec2 PixelWindow::center() const {
  return {x0 + (width - 1) / 2.0, y0 + (height - 1) / 2.0};
}

PixelWindow clamp_shift(PixelWindow w, int raster_width, int raster_height) {
  if (w.width > raster_width || w.height > raster_height) {
    throw std::invalid_argument("window larger than raster");
  }
  w.x0 = std::clamp(w.x0, 0, raster_width - w.width);
  w.y0 = std::clamp(w.y0, 0, raster_height - w.height);
  return w;
}

PixelWindow clamp_intersect(PixelWindow w, int raster_width, int raster_height) {
  const int x1 = std::min(w.x0 + w.width, raster_width);
  const int y1 = std::min(w.y0 + w.height, raster_height);
  w.x0 = std::max(w.x0, 0);
  w.y0 = std::max(w.y0, 0);
  w.width = std::max(0, x1 - w.x0);
  w.height = std::max(0, y1 - w.y0);
  return w;
}

PixelWindow window_covering(const BBox& box) {
  if (box.empty()) return {};
  const int x0 = static_cast<int>(std::floor(box.min_i));
  const int y0 = static_cast<int>(std::floor(box.min_j));
  const int x1 = static_cast<int>(std::ceil(box.max_i));
  const int y1 = static_cast<int>(std::ceil(box.max_j));
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

RasterImage crop(const RasterImage& img, const PixelWindow& w) {
  if (w.x0 < 0 || w.y0 < 0 || w.empty() || w.x0 + w.width > static_cast<int>(img.width()) ||
      w.y0 + w.height > static_cast<int>(img.height())) {
    throw std::invalid_argument("crop window outside raster");
  }
  const GeoTransform& t = img.transform();
  GeoTransform sub = t;
  const Vec2 origin = t.pixel_to_world({static_cast<double>(w.x0), static_cast<double>(w.y0)});
  sub.origin_x = origin.i;
  sub.origin_y = origin.j;
  RasterImage out(static_cast<std::uint32_t>(w.height), static_cast<std::uint32_t>(w.width), img.channels(), sub);
  const std::size_t row_bytes = static_cast<std::size_t>(w.width) * img.channels();
  for (int y = 0; y < w.height; ++y) {
    const auto src = img.data().subspan(
        (static_cast<std::size_t>(w.y0 + y) * img.width() + static_cast<std::size_t>(w.x0)) * img.channels(), row_bytes);
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(y * row_bytes));
  }
  return out;
}

std::string_view to_string(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::NewRoad: return "new-road";
    case ProposalKind::RemovedRoad: return "removed-road";
    case ProposalKind::NewBuilding: return "new-building";
  }
  return "new-road";
}

ProposalKind proposal_kind_from_string(std::string_view s) {
  if (s == "new-road") return ProposalKind::NewRoad;
  if (s == "removed-road") return ProposalKind::RemovedRoad;
  if (s == "new-building") return ProposalKind::NewBuilding;
  throw std::invalid_argument("unknown proposal kind: " + std::string(s));
}

BBox geometry_bbox(const Proposal& p) {
  BBox b;
  if (p.is_road()) {
    for (const Edge& e : p.road.edges()) {
      b.expand(p.road.vertex(e.u));
      b.expand(p.road.vertex(e.v));
    }
    if (p.road.edge_count() == 0) b = p.road.bbox();
  } else {
    for (const Ring& r : p.rings) {
      for (const Vec2& v : r) b.expand(v);
    }
  }
  return b;
}

void Proposal::update_bbox() { bbox = geometry_bbox(*this); }

}  // namespace mapupdate
