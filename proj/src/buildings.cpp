#include "mapupdate/buildings.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mapupdate {

SegRaster::SegRaster(Tensor t, GeoTransform transform) : probs_(std::move(t)), transform_(transform) {
  if (probs_.channels() != 1) throw std::invalid_argument("segmentation raster must have one channel");
  if (!probs_.values_in_unit_interval()) throw std::invalid_argument("segmentation values must lie in [0, 1]");
}

SegRaster::SegRaster(std::uint32_t height, std::uint32_t width, float fill, GeoTransform transform)
    : SegRaster(Tensor(height, width, 1, 1, fill), transform) {}

void SegRaster::set(std::uint32_t j, std::uint32_t i, float v) {
  if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("segmentation values must lie in [0, 1]");
  probs_.at(j, i, 0) = v;
}

RasterImage compare_segmentation(const SegRaster& p_old, const SegRaster& p_new, double t_old, double t_new) {
  if (p_old.height() != p_new.height() || p_old.width() != p_new.width()) {
    throw std::invalid_argument("segmentation rasters differ in shape");
  }
  if (!(t_old >= 0.0 && t_old <= 1.0 && t_new >= 0.0 && t_new <= 1.0)) {
    throw std::invalid_argument("thresholds must lie in [0, 1]");
  }
  RasterImage out(p_new.height(), p_new.width(), 1, p_new.transform());
  for (std::uint32_t j = 0; j < p_new.height(); ++j) {
    for (std::uint32_t i = 0; i < p_new.width(); ++i) {
      out.at(j, i) = (p_old.at(j, i) < t_old && p_new.at(j, i) > t_new) ? 1 : 0;
    }
  }
  return out;
}

namespace {

struct Corner {
  int x;
  int y;
  auto operator<=>(const Corner&) const = default;
};

// Traces the outer boundary of one component, clockwise on screen with the
// interior on the right. Corner (x, y) is the top-left corner of pixel (x, y).
Ring trace_outer_boundary(const std::vector<std::pair<int, int>>& pixels, const std::vector<int>& label, int id,
                          int width, int height) {
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height && label[static_cast<std::size_t>(y) * width + x] == id;
  };
  std::multimap<Corner, Corner> out_edges;
  for (auto [x, y] : pixels) {
    if (!inside(x, y - 1)) out_edges.insert({{x, y}, {x + 1, y}});
    if (!inside(x + 1, y)) out_edges.insert({{x + 1, y}, {x + 1, y + 1}});
    if (!inside(x, y + 1)) out_edges.insert({{x + 1, y + 1}, {x, y + 1}});
    if (!inside(x - 1, y)) out_edges.insert({{x, y + 1}, {x, y}});
  }
  // Top-left pixel in raster order; its top edge is on the outer boundary.
  const auto [sx, sy] = *std::min_element(pixels.begin(), pixels.end(), [](auto a, auto b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  const Corner start{sx, sy};
  std::vector<Corner> loop{start};
  Corner cur = start;
  Corner prev{sx - 1, sy};
  auto take = [&](Corner from, Corner to) {
    auto range = out_edges.equal_range(from);
    for (auto it = range.first; it != range.second; ++it) {
      if (it->second == to) {
        out_edges.erase(it);
        return;
      }
    }
  };
  while (true) {
    auto range = out_edges.equal_range(cur);
    if (range.first == range.second) break;
    // Prefer the sharpest right turn so pinch corners are not crossed.
    const int dx = cur.x - prev.x;
    const int dy = cur.y - prev.y;
    Corner next = range.first->second;
    int best_rank = 4;
    for (auto it = range.first; it != range.second; ++it) {
      const int ex = it->second.x - cur.x;
      const int ey = it->second.y - cur.y;
      const int cross = dx * ey - dy * ex;
      const int dot = dx * ex + dy * ey;
      const int rank = cross > 0 ? 0 : (dot > 0 ? 1 : (cross < 0 ? 2 : 3));
      if (rank < best_rank) {
        best_rank = rank;
        next = it->second;
      }
    }
    take(cur, next);
    prev = cur;
    cur = next;
    if (cur == start) break;
    loop.push_back(cur);
  }
  // Drop collinear corners.
  Ring ring;
  const std::size_t n = loop.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Corner a = loop[(k + n - 1) % n];
    const Corner b = loop[k];
    const Corner c = loop[(k + 1) % n];
    const int cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if (cross != 0) ring.push_back({b.x - 0.5, b.y - 0.5});
  }
  return ring;
}

}  // namespace

double ring_area(const Ring& ring) {
  double a = 0.0;
  for (std::size_t k = 0; k < ring.size(); ++k) {
    const Vec2 p = ring[k];
    const Vec2 q = ring[(k + 1) % ring.size()];
    a += p.i * q.j - q.i * p.j;
  }
  return std::fabs(a) / 2.0;
}

std::vector<Proposal> extract_polygons(const RasterImage& b, double min_area_m2, double meters_per_pixel) {
  if (min_area_m2 < 0.0) throw std::invalid_argument("min_area must be non-negative");
  if (b.channels() != 1) throw std::invalid_argument("binary raster must have one channel");
  const int w = static_cast<int>(b.width());
  const int h = static_cast<int>(b.height());
  const double pixel_area = meters_per_pixel * meters_per_pixel;
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<Proposal> out;
  int next_id = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (b.at(static_cast<std::uint32_t>(y0), static_cast<std::uint32_t>(x0)) == 0 ||
          label[static_cast<std::size_t>(y0) * w + x0] >= 0) {
        continue;
      }
      const int id = next_id++;
      std::vector<std::pair<int, int>> pixels;
      std::vector<std::pair<int, int>> stack{{x0, y0}};
      label[static_cast<std::size_t>(y0) * w + x0] = id;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        pixels.push_back({x, y});
        const int nbr[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
        for (const auto& n : nbr) {
          const int nx = n[0];
          const int ny = n[1];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t idx = static_cast<std::size_t>(ny) * w + nx;
          if (label[idx] >= 0 || b.at(static_cast<std::uint32_t>(ny), static_cast<std::uint32_t>(nx)) == 0) continue;
          label[idx] = id;
          stack.push_back({nx, ny});
        }
      }
      if (static_cast<double>(pixels.size()) * pixel_area < min_area_m2) continue;
      Proposal p;
      p.kind = ProposalKind::NewBuilding;
      p.rings.push_back(trace_outer_boundary(pixels, label, id, w, h));
      p.update_bbox();
      out.push_back(std::move(p));
    }
  }
  return out;
}

bool point_in_polygon(const std::vector<Ring>& rings, Vec2 p) {
  bool inside = false;
  for (const Ring& r : rings) {
    for (std::size_t a = 0, b = r.size() - 1; a < r.size(); b = a++) {
      const Vec2 pa = r[a];
      const Vec2 pb = r[b];
      if ((pa.j > p.j) != (pb.j > p.j) && p.i < (pb.i - pa.i) * (p.j - pa.j) / (pb.j - pa.j) + pa.i) {
        inside = !inside;
      }
    }
  }
  return inside;
}

RasterImage building_mask(const Proposal& prop, const PixelWindow& window, double buffer_m, double meters_per_pixel) {
  if (prop.rings.empty() || prop.rings.front().size() < 3 || ring_area(prop.rings.front()) <= 0.0) {
    throw std::invalid_argument("degenerate building polygon");
  }
  if (window.empty()) throw std::invalid_argument("mask window is degenerate");
  if (buffer_m < 0.0) throw std::invalid_argument("buffer must be non-negative");
  const double r = m_to_px(buffer_m, meters_per_pixel);
  RasterImage mask(static_cast<std::uint32_t>(window.height), static_cast<std::uint32_t>(window.width), 1);
  const BBox area = geometry_bbox(prop).padded(r);
  const int x0 = std::max(window.x0, static_cast<int>(std::floor(area.min_i)));
  const int x1 = std::min(window.x0 + window.width - 1, static_cast<int>(std::ceil(area.max_i)));
  const int y0 = std::max(window.y0, static_cast<int>(std::floor(area.min_j)));
  const int y1 = std::min(window.y0 + window.height - 1, static_cast<int>(std::ceil(area.max_j)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      bool on = point_in_polygon(prop.rings, p);
      if (!on && r > 0.0) {
        for (const Ring& ring : prop.rings) {
          for (std::size_t a = 0, b = ring.size() - 1; a < ring.size() && !on; b = a++) {
            on = point_segment_distance(p, ring[a], ring[b]) <= r;
          }
        }
      }
      if (on) mask.at(static_cast<std::uint32_t>(y - window.y0), static_cast<std::uint32_t>(x - window.x0)) = 1;
    }
  }
  return mask;
}

RasterImage rasterize_polygons(const std::vector<std::vector<Ring>>& polygons, std::uint32_t height,
                               std::uint32_t width) {
  RasterImage out(height, width, 1);
  for (const auto& rings : polygons) {
    BBox b;
    for (const Ring& r : rings) {
      for (const Vec2& v : r) b.expand(v);
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(b.min_i)));
    const int x1 = std::min(static_cast<int>(width) - 1, static_cast<int>(std::ceil(b.max_i)));
    const int y0 = std::max(0, static_cast<int>(std::floor(b.min_j)));
    const int y1 = std::min(static_cast<int>(height) - 1, static_cast<int>(std::ceil(b.max_j)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (point_in_polygon(rings, {static_cast<double>(x), static_cast<double>(y)})) {
          out.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x)) = 1;
        }
      }
    }
  }
  return out;
}

}  // namespace mapupdate
