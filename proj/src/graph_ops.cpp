#include "mapupdate/graph_ops.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <unordered_map>

namespace mapupdate {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Uniform bucket grid over segments, for radius queries.
class SegmentGrid {
 public:
  SegmentGrid(const RoadGraph& g, double cell) : g_(g), cell_(std::max(cell, 1.0)) {
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      BBox b;
      b.expand(g.vertex(g.edge(e).u));
      b.expand(g.vertex(g.edge(e).v));
      for (long cy = key(b.min_j); cy <= key(b.max_j); ++cy) {
        for (long cx = key(b.min_i); cx <= key(b.max_i); ++cx) cells_[pack(cx, cy)].push_back(e);
      }
    }
  }

  double nearest_within(Vec2 p, double radius) const {
    double best = std::numeric_limits<double>::infinity();
    for (long cy = key(p.j - radius); cy <= key(p.j + radius); ++cy) {
      for (long cx = key(p.i - radius); cx <= key(p.i + radius); ++cx) {
        auto it = cells_.find(pack(cx, cy));
        if (it == cells_.end()) continue;
        for (std::size_t e : it->second) {
          best = std::min(best, point_segment_distance(p, g_.vertex(g_.edge(e).u), g_.vertex(g_.edge(e).v)));
        }
      }
    }
    return best;
  }

 private:
  long key(double x) const { return static_cast<long>(std::floor(x / cell_)); }
  static long long pack(long x, long y) { return (static_cast<long long>(x) << 32) ^ (y & 0xffffffffLL); }

  const RoadGraph& g_;
  double cell_;
  std::unordered_map<long long, std::vector<std::size_t>> cells_;
};

}  // namespace

BBox selection_bbox(const RoadGraph& parent, const std::vector<std::size_t>& edges) {
  BBox b;
  for (std::size_t e : edges) {
    b.expand(parent.vertex(parent.edge(e).u));
    b.expand(parent.vertex(parent.edge(e).v));
  }
  return b;
}

RoadGraph extract_subgraph(const RoadGraph& parent, const SubgraphSelection& sel) {
  RoadGraph out;
  std::unordered_map<std::size_t, std::size_t> remap;
  auto map_vertex = [&](std::size_t v) {
    auto [it, inserted] = remap.try_emplace(v, 0);
    if (inserted) it->second = out.add_vertex(parent.vertex(v), parent.vertex_is_base(v));
    return it->second;
  };
  for (std::size_t e : sel.edges) {
    const Edge& ed = parent.edge(e);
    const std::size_t a = map_vertex(ed.u);
    const std::size_t b = map_vertex(ed.v);
    out.add_edge(a, b, ed.base);
  }
  return out;
}

RoadGraph densify(const RoadGraph& g, double max_spacing_m, double meters_per_pixel) {
  if (!(max_spacing_m > 0.0)) throw std::invalid_argument("densify: max_spacing must be positive");
  const double spacing_px = m_to_px(max_spacing_m, meters_per_pixel);
  RoadGraph out;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) out.add_vertex(g.vertex(v), g.vertex_is_base(v));
  for (const Edge& e : g.edges()) {
    const Vec2 a = g.vertex(e.u);
    const Vec2 b = g.vertex(e.v);
    const double len = distance(a, b);
    // Tolerate lengths a hair over the spacing from the m/px round trip.
    const auto segments = static_cast<std::size_t>(std::max(1.0, std::ceil(len / spacing_px - 1e-6)));
    std::size_t prev = e.u;
    for (std::size_t s = 1; s < segments; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(segments);
      const std::size_t mid = out.add_vertex(a + (b - a) * t, e.base);
      out.add_edge(prev, mid, e.base);
      prev = mid;
    }
    out.add_edge(prev, e.v, e.base);
  }
  return out;
}

std::vector<double> edge_angles_at(const RoadGraph& g, std::size_t v) {
  std::vector<double> out;
  const Vec2 p = g.vertex(v);
  for (std::size_t e : g.incident(v)) {
    const Vec2 q = g.vertex(g.other_end(e, v));
    out.push_back(normalize_angle(std::atan2(q.j - p.j, q.i - p.i)));
  }
  return out;
}

std::vector<SubgraphSelection> connected_components_of_difference(const RoadGraph& g_prime, const RoadGraph& g_base) {
  if (g_base.vertex_count() > g_prime.vertex_count()) {
    throw std::invalid_argument("base graph has more vertices than traced graph");
  }
  for (std::size_t v = 0; v < g_base.vertex_count(); ++v) {
    if (!(g_base.vertex(v) == g_prime.vertex(v))) {
      throw std::invalid_argument("base vertices are not a prefix of the traced graph");
    }
  }
  std::vector<bool> in_base(g_prime.edge_count(), false);
  for (const Edge& e : g_base.edges()) {
    const auto pe = g_prime.find_edge(e.u, e.v);
    if (!pe) throw std::invalid_argument("base edge missing from traced graph");
    in_base[*pe] = true;
  }

  DisjointSets sets(g_prime.vertex_count());
  for (std::size_t e = 0; e < g_prime.edge_count(); ++e) {
    if (!in_base[e]) sets.unite(g_prime.edge(e).u, g_prime.edge(e).v);
  }
  // Components ordered by their first new edge.
  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<SubgraphSelection> out;
  for (std::size_t e = 0; e < g_prime.edge_count(); ++e) {
    if (in_base[e]) continue;
    const std::size_t root = sets.find(g_prime.edge(e).u);
    auto [it, inserted] = slot.try_emplace(root, out.size());
    if (inserted) out.emplace_back();
    out[it->second].edges.push_back(e);
  }
  for (SubgraphSelection& s : out) s.bbox = selection_bbox(g_prime, s.edges);
  return out;
}

SubgraphSelection bfs_subgraph(const RoadGraph& g, std::size_t v0, double t_box_m, double meters_per_pixel) {
  if (v0 >= g.vertex_count()) throw std::invalid_argument("bfs_subgraph: invalid start vertex");
  if (!(t_box_m > 0.0)) throw std::invalid_argument("bfs_subgraph: t_box must be positive");
  const double limit_px = m_to_px(t_box_m, meters_per_pixel);

  SubgraphSelection sel;
  std::vector<bool> edge_taken(g.edge_count(), false);
  std::vector<bool> seen(g.vertex_count(), false);
  std::deque<std::size_t> queue{v0};
  seen[v0] = true;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t e : g.incident(u)) {
      if (edge_taken[e]) continue;
      edge_taken[e] = true;
      sel.edges.push_back(e);
      sel.bbox.expand(g.vertex(g.edge(e).u));
      sel.bbox.expand(g.vertex(g.edge(e).v));
      if (std::max(sel.bbox.width(), sel.bbox.height()) > limit_px) return sel;
      const std::size_t w = g.other_end(e, u);
      if (!seen[w]) {
        seen[w] = true;
        queue.push_back(w);
      }
    }
  }
  return sel;
}

RoadGraph prune_near_map(const RoadGraph& candidates, const RoadGraph& g_base, double radius_m, double meters_per_pixel) {
  if (radius_m < 0.0) throw std::invalid_argument("prune_near_map: negative radius");
  const double radius_px = m_to_px(radius_m, meters_per_pixel);
  const SegmentGrid grid(g_base, std::max(radius_px, 16.0));
  RoadGraph out;
  for (std::size_t v = 0; v < candidates.vertex_count(); ++v) {
    out.add_vertex(candidates.vertex(v), candidates.vertex_is_base(v));
  }
  for (const Edge& e : candidates.edges()) {
    const Vec2 mid = (candidates.vertex(e.u) + candidates.vertex(e.v)) * 0.5;
    if (grid.nearest_within(mid, radius_px) <= radius_px) continue;
    out.add_edge(e.u, e.v, e.base);
  }
  return out;
}

}  // namespace mapupdate
