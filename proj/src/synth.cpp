#include "mapupdate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mapupdate/io.hpp"

namespace mapupdate {

namespace {

constexpr std::uint64_t kConfOldStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kConfNewStream = 0xC2B2AE3D27D4EB4FULL;
constexpr std::uint64_t kImageOldStream = 0x165667B19E3779F9ULL;
constexpr std::uint64_t kImageNewStream = 0xD6E8FEB86659FD93ULL;
constexpr std::uint64_t kSegStream = 0xFF51AFD7ED558CCDULL;

double cross(Vec2 a, Vec2 b) { return a.i * b.j - a.j * b.i; }

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

double segment_distance(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d), point_segment_distance(c, a, b),
                   point_segment_distance(d, a, b)});
}

double window_weight(double delta, double width) {
  return delta < width ? std::cos(std::numbers::pi / 2.0 * delta / width) : 0.0;
}

// Ridge value of one segment. Each direction along the segment is only
// supported where at least end_margin_m of road remains that way from the
// foot point, so dead ends carry no forward confidence.
double segment_value(const RenderSegment& s, Vec2 p, int k, double sigma_m, double window_channels,
                     double end_margin_m, double mpp) {
  const Vec2 ab = s.b - s.a;
  const double len2 = ab.i * ab.i + ab.j * ab.j;
  if (len2 <= 0.0) return 0.0;
  double t = ((p.i - s.a.i) * ab.i + (p.j - s.a.j) * ab.j) / len2;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 foot = s.a + ab * t;
  const double d = distance(p, foot) * mpp;
  if (d > 4.0 * sigma_m) return 0.0;
  const double g = std::exp(-d * d / (2.0 * sigma_m * sigma_m));
  const double width = window_channels * kChannelWidth;
  const double fwd = std::atan2(ab.j, ab.i);
  const double c = angle_center(k);
  double w = 0.0;
  const double len_m = std::sqrt(len2) * mpp;
  if ((1.0 - t) * len_m > end_margin_m) w = std::max(w, window_weight(angular_distance(c, fwd), width));
  if (t * len_m > end_margin_m) w = std::max(w, window_weight(angular_distance(c, fwd + std::numbers::pi), width));
  return g * w;
}

void render_confidence(ConfidenceTensor& p, const std::vector<RenderSegment>& segments, const SceneParams& sp) {
  const int s = sp.scale_factor;
  const double reach_px = m_to_px(4.0 * sp.sigma_m, sp.meters_per_pixel);
  Tensor& t = p.mutable_tensor();
  const int w = static_cast<int>(t.width());
  const int h = static_cast<int>(t.height());
  const int span = static_cast<int>(std::ceil(sp.window_channels)) + 1;
  for (const RenderSegment& seg : segments) {
    const double fwd = std::atan2(seg.b.j - seg.a.j, seg.b.i - seg.a.i);
    std::vector<int> channels;
    for (double dir : {fwd, fwd + std::numbers::pi}) {
      const int k0 = channel_of_angle(dir);
      for (int dk = -span; dk <= span; ++dk) channels.push_back(((k0 + dk) % kNumDirections + kNumDirections) % kNumDirections);
    }
    std::sort(channels.begin(), channels.end());
    channels.erase(std::unique(channels.begin(), channels.end()), channels.end());
    const double off = (s - 1) / 2.0;
    const int cx0 = std::max(0, static_cast<int>(std::floor((std::min(seg.a.i, seg.b.i) - reach_px - off) / s)));
    const int cx1 = std::min(w - 1, static_cast<int>(std::ceil((std::max(seg.a.i, seg.b.i) + reach_px - off) / s)));
    const int cy0 = std::max(0, static_cast<int>(std::floor((std::min(seg.a.j, seg.b.j) - reach_px - off) / s)));
    const int cy1 = std::min(h - 1, static_cast<int>(std::ceil((std::max(seg.a.j, seg.b.j) + reach_px - off) / s)));
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        const Vec2 centre{cx * s + off, cy * s + off};
        for (int k : channels) {
          const double v = segment_value(seg, centre, k, sp.sigma_m, sp.window_channels, sp.end_margin_m,
                                         sp.meters_per_pixel);
          float& cell = t.at(static_cast<std::uint32_t>(cy), static_cast<std::uint32_t>(cx), static_cast<std::uint32_t>(k));
          cell = std::max(cell, static_cast<float>(v));
        }
      }
    }
  }
}

void add_noise(std::span<float> values, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (float& v : values) v = static_cast<float>(std::clamp(v + n(rng), 0.0, 1.0));
}

struct Colour {
  std::uint8_t r, g, b;
};

void paint_ribbon(RasterImage& img, const RenderSegment& seg, double half_width_px, Colour c) {
  const int w = static_cast<int>(img.width());
  const int h = static_cast<int>(img.height());
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.i, seg.b.i) - half_width_px)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(seg.a.i, seg.b.i) + half_width_px)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(seg.a.j, seg.b.j) - half_width_px)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(seg.a.j, seg.b.j) + half_width_px)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (point_segment_distance({static_cast<double>(x), static_cast<double>(y)}, seg.a, seg.b) <= half_width_px) {
        const auto uy = static_cast<std::uint32_t>(y);
        const auto ux = static_cast<std::uint32_t>(x);
        img.at(uy, ux, 0) = c.r;
        img.at(uy, ux, 1) = c.g;
        img.at(uy, ux, 2) = c.b;
      }
    }
  }
}

void paint_rect(RasterImage& img, const BuildingRect& r, Colour c) {
  for (int y = r.y0; y <= r.y1; ++y) {
    for (int x = r.x0; x <= r.x1; ++x) {
      img.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), 0) = c.r;
      img.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), 1) = c.g;
      img.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), 2) = c.b;
    }
  }
}

void add_image_noise(RasterImage& img, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (std::uint8_t& v : img.data()) v = static_cast<std::uint8_t>(std::clamp(std::lround(v + n(rng)), 0L, 255L));
}

RasterImage textured_background(const SceneParams& sp, std::mt19937_64& rng, const GeoTransform& tf) {
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  const double a = phase(rng), b = phase(rng), c = phase(rng);
  RasterImage img(static_cast<std::uint32_t>(sp.size_px), static_cast<std::uint32_t>(sp.size_px), 3, tf);
  for (int y = 0; y < sp.size_px; ++y) {
    for (int x = 0; x < sp.size_px; ++x) {
      const double t = 12.0 * std::sin(0.031 * x + a) * std::cos(0.027 * y + b) + 6.0 * std::sin(0.11 * x + 0.07 * y + c);
      const auto uy = static_cast<std::uint32_t>(y);
      const auto ux = static_cast<std::uint32_t>(x);
      img.at(uy, ux, 0) = static_cast<std::uint8_t>(std::lround(150.0 + t));
      img.at(uy, ux, 1) = static_cast<std::uint8_t>(std::lround(165.0 + t));
      img.at(uy, ux, 2) = static_cast<std::uint8_t>(std::lround(135.0 + t));
    }
  }
  return img;
}

struct GridLine {
  bool vertical = false;  // x constant
  double pos = 0.0;       // pixels
  Vec2 a;
  Vec2 b;
};

double pieces_distance(const std::vector<RenderSegment>& p, const std::vector<RenderSegment>& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : p) {
    for (const auto& t : q) best = std::min(best, segment_distance(s.a, s.b, t.a, t.b));
  }
  return best;
}

Proposal road_proposal(const PlantedRoad& r, ProposalKind kind) {
  Proposal p;
  p.kind = kind;
  const std::size_t a = p.road.add_vertex(r.start);
  const std::size_t b = p.road.add_vertex(r.end);
  p.road.add_edge(a, b);
  p.update_bbox();
  return p;
}

Proposal building_proposal(const BuildingRect& r) {
  Proposal p;
  p.kind = ProposalKind::NewBuilding;
  p.rings.push_back(r.ring());
  p.update_bbox();
  return p;
}

}  // namespace

void SceneParams::validate() const {
  if (size_px < 256) throw std::invalid_argument("scene size must be at least 256 px");
  if (!(meters_per_pixel > 0.0)) throw std::invalid_argument("meters_per_pixel must be positive");
  if (scale_factor <= 0 || size_px % scale_factor != 0) {
    throw std::invalid_argument("scene size must be a multiple of the scale factor");
  }
  if (!(grid_spacing_m > 0.0) || grid_jitter_m < 0.0) throw std::invalid_argument("grid spacing must be positive");
  if (n_new < 0 || n_distractors < 0 || n_removed < 0 || n_buildings < 0 || n_new_buildings < 0) {
    throw std::invalid_argument("counts must be non-negative");
  }
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  if (!(min_length_m > 0.0) || max_length_m < min_length_m) throw std::invalid_argument("bad road length range");
  if (!(sigma_m > 0.0) || !(window_channels > 0.0) || !(road_width_m > 0.0) || start_gap_m < 0.0 ||
      end_margin_m < 0.0) {
    throw std::invalid_argument("renderer constants must be positive");
  }
}

Ring BuildingRect::ring() const {
  return {{x0 - 0.5, y0 - 0.5}, {x1 + 0.5, y0 - 0.5}, {x1 + 0.5, y1 + 0.5}, {x0 - 0.5, y1 + 0.5}};
}

double oracle_confidence(const std::vector<RenderSegment>& segments, Vec2 p, int k, const SceneParams& params) {
  double best = 0.0;
  for (const auto& s : segments) {
    best = std::max(best, segment_value(s, p, k, params.sigma_m, params.window_channels, params.end_margin_m,
                                        params.meters_per_pixel));
  }
  return best;
}

Scene generate_scene(const SceneParams& sp) {
  sp.validate();
  Scene scene;
  scene.params = sp;
  scene.seed = sp.seed;
  const double mpp = sp.meters_per_pixel;
  const double size = sp.size_px;
  const double last = size - 1.0;
  scene.transform = GeoTransform(mpp, 0.0, size * mpp);
  std::mt19937_64 rng(sp.seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto px = [&](double m) { return m_to_px(m, mpp); };

  // Grid lines.
  std::vector<GridLine> lines;
  const double spacing = px(sp.grid_spacing_m);
  for (int vertical = 1; vertical >= 0; --vertical) {
    for (double p = spacing / 2.0; p < size - px(20.0); p += spacing) {
      const double pos = std::clamp(p + uniform(-px(sp.grid_jitter_m), px(sp.grid_jitter_m)), px(20.0), last - px(20.0));
      GridLine l;
      l.vertical = vertical == 1;
      l.pos = pos;
      l.a = l.vertical ? Vec2{pos, 0.0} : Vec2{0.0, pos};
      l.b = l.vertical ? Vec2{pos, last} : Vec2{last, pos};
      lines.push_back(l);
    }
  }

  // Planted roads continuing dead-end stubs.
  std::vector<std::vector<RenderSegment>> occupied;
  std::vector<std::pair<std::size_t, Vec2>> roots;  // line index, root point
  const double margin = px(30.0);
  auto inside = [&](Vec2 p) { return p.i >= margin && p.j >= margin && p.i <= last - margin && p.j <= last - margin; };
  auto place = [&]() -> PlantedRoad {
    for (int attempt = 0; attempt < 5000; ++attempt) {
      const std::size_t li = std::uniform_int_distribution<std::size_t>(0, lines.size() - 1)(rng);
      const GridLine& line = lines[li];
      const double along = uniform(px(40.0), last - px(40.0));
      bool near_crossing = false;
      for (const GridLine& other : lines) {
        if (other.vertical != line.vertical && std::fabs(other.pos - along) < px(40.0)) near_crossing = true;
      }
      if (near_crossing) continue;
      const Vec2 root = line.vertical ? Vec2{line.pos, along} : Vec2{along, line.pos};
      const double side = uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const double stub_angle = normalize_angle(line.vertical ? (side > 0 ? 0.0 : std::numbers::pi)
                                                              : (side > 0 ? std::numbers::pi / 2.0 : 1.5 * std::numbers::pi));
      std::vector<int> headings;
      for (int k = 0; k < kNumDirections; ++k) {
        const double d = angular_distance(angle_center(k), stub_angle);
        if (d >= std::numbers::pi / 9.0 && d <= std::numbers::pi / 4.0) headings.push_back(k);
      }
      const int k = headings[std::uniform_int_distribution<std::size_t>(0, headings.size() - 1)(rng)];
      const double heading = angle_center(k);
      const Vec2 stub_dir{std::cos(stub_angle), std::sin(stub_angle)};
      const Vec2 dir{std::cos(heading), std::sin(heading)};
      PlantedRoad r;
      r.stub_root = root;
      // Whole multiples of the 10 m densification spacing, so the stub vertex
      // behind the dead end sits a full step away from the planted road.
      r.stub_end = root + stub_dir * px(uniform(0.0, 1.0) < 0.5 ? 30.0 : 40.0);
      r.start = r.stub_end + dir * px(sp.start_gap_m);
      r.end = r.start + dir * px(uniform(sp.min_length_m, sp.max_length_m));
      const Vec2 reach = r.end + dir * px(15.0);
      if (!inside(r.stub_end) || !inside(r.start) || !inside(reach)) continue;
      const std::vector<RenderSegment> pieces{{r.stub_root, r.stub_end}, {r.start, reach}};
      bool ok = true;
      for (std::size_t lj = 0; lj < lines.size() && ok; ++lj) {
        const GridLine& other = lines[lj];
        if (segment_distance(r.start, reach, other.a, other.b) < px(20.0)) ok = false;
        if (lj != li && segment_distance(r.stub_root, r.stub_end, other.a, other.b) < px(30.0)) ok = false;
      }
      for (const auto& occ : occupied) {
        if (!ok) break;
        if (pieces_distance(pieces, occ) < px(50.0)) ok = false;
      }
      if (!ok) continue;
      occupied.push_back(pieces);
      roots.push_back({li, root});
      return r;
    }
    throw std::runtime_error("could not place planted road; scene too crowded");
  };
  for (int n = 0; n < sp.n_new; ++n) scene.new_road_geometry.push_back(place());
  for (int n = 0; n < sp.n_removed; ++n) scene.removed_geometry.push_back(place());
  for (int n = 0; n < sp.n_distractors; ++n) scene.distractor_geometry.push_back(place());

  // Base graph: grid lines split at crossings and stub roots, plus stubs.
  RoadGraph& g = scene.base_graph;
  std::vector<std::vector<std::pair<double, std::size_t>>> on_line(lines.size());
  for (std::size_t a = 0; a < lines.size(); ++a) {
    on_line[a].push_back({0.0, g.add_vertex(lines[a].a, true)});
    on_line[a].push_back({last, g.add_vertex(lines[a].b, true)});
  }
  for (std::size_t a = 0; a < lines.size(); ++a) {
    if (!lines[a].vertical) continue;
    for (std::size_t b = 0; b < lines.size(); ++b) {
      if (lines[b].vertical) continue;
      const std::size_t v = g.add_vertex({lines[a].pos, lines[b].pos}, true);
      on_line[a].push_back({lines[b].pos, v});
      on_line[b].push_back({lines[a].pos, v});
    }
  }
  std::vector<std::size_t> stub_root_ids;
  for (const auto& [li, root] : roots) {
    const std::size_t v = g.add_vertex(root, true);
    on_line[li].push_back({lines[li].vertical ? root.j : root.i, v});
    stub_root_ids.push_back(v);
  }
  for (auto& pts : on_line) {
    std::sort(pts.begin(), pts.end());
    for (std::size_t n = 1; n < pts.size(); ++n) g.add_edge(pts[n - 1].second, pts[n].second, true);
  }
  std::vector<const PlantedRoad*> all_planted;
  for (const auto& r : scene.new_road_geometry) all_planted.push_back(&r);
  for (const auto& r : scene.removed_geometry) all_planted.push_back(&r);
  for (const auto& r : scene.distractor_geometry) all_planted.push_back(&r);
  for (std::size_t n = 0; n < all_planted.size(); ++n) {
    const std::size_t end = g.add_vertex(all_planted[n]->stub_end, true);
    g.add_edge(stub_root_ids[n], end, true);
  }

  auto plant = [&](const std::vector<PlantedRoad>& roads, std::vector<SubgraphSelection>& sel) {
    for (const PlantedRoad& r : roads) {
      const std::size_t a = scene.planted.add_vertex(r.start);
      const std::size_t b = scene.planted.add_vertex(r.end);
      SubgraphSelection s;
      s.edges.push_back(scene.planted.add_edge(a, b));
      s.bbox = selection_bbox(scene.planted, s.edges);
      sel.push_back(s);
    }
  };
  plant(scene.new_road_geometry, scene.new_roads);
  plant(scene.distractor_geometry, scene.distractors);
  plant(scene.removed_geometry, scene.removed_roads);

  // Buildings away from every road.
  std::vector<RenderSegment> all_roads;
  for (const Edge& e : g.edges()) all_roads.push_back({g.vertex(e.u), g.vertex(e.v)});
  for (const PlantedRoad* r : all_planted) all_roads.push_back({r->start, r->end});
  auto place_building = [&](std::vector<BuildingRect>& placed_so_far) -> BuildingRect {
    for (int attempt = 0; attempt < 5000; ++attempt) {
      const int w = static_cast<int>(std::lround(px(uniform(12.0, 30.0))));
      const int h = static_cast<int>(std::lround(px(uniform(12.0, 30.0))));
      const int x0 = static_cast<int>(std::lround(uniform(margin, last - margin - w)));
      const int y0 = static_cast<int>(std::lround(uniform(margin, last - margin - h)));
      BuildingRect b{x0, y0, x0 + w - 1, y0 + h - 1};
      const Ring ring = b.ring();
      std::vector<RenderSegment> sides;
      for (std::size_t n = 0; n < 4; ++n) sides.push_back({ring[n], ring[(n + 1) % 4]});
      const bool centre_on_road = std::any_of(all_roads.begin(), all_roads.end(), [&](const RenderSegment& s) {
        return point_in_polygon({ring}, s.a) || point_in_polygon({ring}, s.b);
      });
      if (centre_on_road || pieces_distance(sides, all_roads) < px(15.0)) continue;
      bool clear = true;
      for (const BuildingRect& o : placed_so_far) {
        if (b.x0 - px(10.0) <= o.x1 && o.x0 <= b.x1 + px(10.0) && b.y0 - px(10.0) <= o.y1 && o.y0 <= b.y1 + px(10.0)) {
          clear = false;
        }
      }
      if (!clear) continue;
      return b;
    }
    throw std::runtime_error("could not place building; scene too crowded");
  };
  std::vector<BuildingRect> all_buildings;
  for (int n = 0; n < sp.n_buildings; ++n) {
    scene.buildings.push_back(place_building(all_buildings));
    all_buildings.push_back(scene.buildings.back());
  }
  for (int n = 0; n < sp.n_new_buildings; ++n) {
    scene.new_buildings.push_back(place_building(all_buildings));
    all_buildings.push_back(scene.new_buildings.back());
  }

  const auto conf_size = static_cast<std::uint32_t>(sp.size_px / sp.scale_factor);
  scene.p_old = ConfidenceTensor(conf_size, conf_size, static_cast<std::uint32_t>(sp.scale_factor));
  scene.p_new = ConfidenceTensor(conf_size, conf_size, static_cast<std::uint32_t>(sp.scale_factor));
  const std::vector<RenderSegment> old_segments = scene_segments(scene, false);
  const std::vector<RenderSegment> new_segments = scene_segments(scene, true);
  render_confidence(scene.p_old, old_segments, sp);
  render_confidence(scene.p_new, new_segments, sp);
  add_noise(scene.p_old.mutable_tensor().data(), sp.noise_sigma, sp.seed ^ kConfOldStream);
  add_noise(scene.p_new.mutable_tensor().data(), sp.noise_sigma, sp.seed ^ kConfNewStream);

  // Imagery.
  const RasterImage background = textured_background(sp, rng, scene.transform);
  const double half = px(sp.road_width_m) / 2.0;
  const Colour road{58, 56, 54};
  const Colour path{66, 62, 58};
  const Colour roof{48, 46, 52};
  scene.m_old = background;
  scene.m_new = background;
  for (RasterImage* img : {&scene.m_old, &scene.m_new}) {
    for (const Edge& e : g.edges()) paint_ribbon(*img, {g.vertex(e.u), g.vertex(e.v)}, half, road);
    for (const auto& r : scene.distractor_geometry) paint_ribbon(*img, {r.start, r.end}, half, path);
    for (const auto& b : scene.buildings) paint_rect(*img, b, roof);
  }
  for (const auto& r : scene.removed_geometry) paint_ribbon(scene.m_old, {r.start, r.end}, half, road);
  for (const auto& r : scene.new_road_geometry) paint_ribbon(scene.m_new, {r.start, r.end}, half, road);
  for (const auto& b : scene.new_buildings) paint_rect(scene.m_new, b, roof);
  add_image_noise(scene.m_old, 20.0 * sp.noise_sigma, sp.seed ^ kImageOldStream);
  add_image_noise(scene.m_new, 20.0 * sp.noise_sigma, sp.seed ^ kImageNewStream);

  // Building segmentation probabilities.
  const auto n = static_cast<std::uint32_t>(sp.size_px);
  Tensor seg_old(n, n, 1, 1, 0.05f);
  Tensor seg_new(n, n, 1, 1, 0.05f);
  auto fill = [](Tensor& t, const BuildingRect& b) {
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) t.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), 0) = 0.9f;
    }
  };
  for (const auto& b : scene.buildings) {
    fill(seg_old, b);
    fill(seg_new, b);
  }
  for (const auto& b : scene.new_buildings) fill(seg_new, b);
  if (sp.n_buildings + sp.n_new_buildings > 0) {
    add_noise(seg_old.data(), sp.noise_sigma, sp.seed ^ kSegStream);
    add_noise(seg_new.data(), sp.noise_sigma, (sp.seed ^ kSegStream) + 1);
  }
  scene.seg_old = SegRaster(std::move(seg_old), scene.transform);
  scene.seg_new = SegRaster(std::move(seg_new), scene.transform);
  return scene;
}

std::vector<RenderSegment> scene_segments(const Scene& scene, bool new_epoch) {
  std::vector<RenderSegment> out;
  const RoadGraph& g = scene.base_graph;
  for (const Edge& e : g.edges()) out.push_back({g.vertex(e.u), g.vertex(e.v)});
  for (const auto& r : scene.distractor_geometry) out.push_back({r.start, r.end});
  for (const auto& r : new_epoch ? scene.new_road_geometry : scene.removed_geometry) out.push_back({r.start, r.end});
  return out;
}

GroundTruthSet scene_ground_truth(const Scene& scene) {
  GroundTruthSet out;
  for (const auto& r : scene.new_road_geometry) out.proposals.push_back(road_proposal(r, ProposalKind::NewRoad));
  return out;
}

GroundTruthSet scene_removed_truth(const Scene& scene) {
  GroundTruthSet out;
  for (const auto& r : scene.removed_geometry) out.proposals.push_back(road_proposal(r, ProposalKind::RemovedRoad));
  return out;
}

GroundTruthSet scene_building_truth(const Scene& scene) {
  GroundTruthSet out;
  for (const auto& b : scene.new_buildings) out.proposals.push_back(building_proposal(b));
  return out;
}

std::vector<Proposal> scene_distractor_proposals(const Scene& scene) {
  std::vector<Proposal> out;
  for (const auto& r : scene.distractor_geometry) out.push_back(road_proposal(r, ProposalKind::NewRoad));
  return out;
}

void write_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_netpbm(dir / "old.ppm", scene.m_old);
  io::write_netpbm(dir / "new.ppm", scene.m_new);
  io::write_ctns(dir / "p_old.ctns", scene.p_old.tensor());
  io::write_ctns(dir / "p_new.ctns", scene.p_new.tensor());
  io::write_ctns(dir / "seg_old.ctns", scene.seg_old.tensor());
  io::write_ctns(dir / "seg_new.ctns", scene.seg_new.tensor());
  io::write_graph(dir / "base.geojson", scene.base_graph, scene.transform);
  io::write_proposals(dir / "truth.geojson", scene_ground_truth(scene).proposals, scene.transform);
  io::write_proposals(dir / "removed_truth.geojson", scene_removed_truth(scene).proposals, scene.transform);
  io::write_proposals(dir / "building_truth.geojson", scene_building_truth(scene).proposals, scene.transform);
  io::write_proposals(dir / "distractors.geojson", scene_distractor_proposals(scene), scene.transform);

  const SceneParams& p = scene.params;
  nlohmann::ordered_json m;
  m["kind"] = "scene";
  m["params"] = {{"size_px", p.size_px},
                 {"meters_per_pixel", p.meters_per_pixel},
                 {"scale_factor", p.scale_factor},
                 {"grid_spacing_m", p.grid_spacing_m},
                 {"grid_jitter_m", p.grid_jitter_m},
                 {"n_new", p.n_new},
                 {"n_distractors", p.n_distractors},
                 {"n_removed", p.n_removed},
                 {"n_buildings", p.n_buildings},
                 {"n_new_buildings", p.n_new_buildings},
                 {"noise_sigma", p.noise_sigma},
                 {"seed", p.seed},
                 {"min_length_m", p.min_length_m},
                 {"max_length_m", p.max_length_m},
                 {"sigma_m", p.sigma_m},
                 {"window_channels", p.window_channels},
                 {"road_width_m", p.road_width_m},
                 {"start_gap_m", p.start_gap_m},
                 {"end_margin_m", p.end_margin_m}};
  m["files"] = {{"old_image", "old.ppm"},         {"new_image", "new.ppm"},
                {"p_old", "p_old.ctns"},          {"p_new", "p_new.ctns"},
                {"seg_old", "seg_old.ctns"},      {"seg_new", "seg_new.ctns"},
                {"base_graph", "base.geojson"},   {"truth", "truth.geojson"},
                {"removed_truth", "removed_truth.geojson"},
                {"building_truth", "building_truth.geojson"},
                {"distractors", "distractors.geojson"}};
  m["transform"] = {{"meters_per_pixel", scene.transform.meters_per_pixel},
                    {"origin", {scene.transform.origin_x, scene.transform.origin_y}}};
  io::write_text(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace mapupdate
