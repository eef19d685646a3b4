#pragma once

#include <cstddef>
#include <vector>

#include "mapupdate/core.hpp"

namespace mapupdate {

// A set of edges of some parent graph plus their tight bounding box. The
// parent is passed alongside rather than referenced.
struct SubgraphSelection {
  std::vector<std::size_t> edges;
  BBox bbox;

  bool empty() const { return edges.empty(); }
};

BBox selection_bbox(const RoadGraph& parent, const std::vector<std::size_t>& edges);
// Copies the selected edges (and only their endpoints) into a new graph.
RoadGraph extract_subgraph(const RoadGraph& parent, const SubgraphSelection& sel);

// Subdivides every edge into ceil(len / max_spacing) equal segments.
// Original vertices keep their indices; inserted vertices are appended and
// inherit the edge's base flag.
RoadGraph densify(const RoadGraph& g, double max_spacing_m, double meters_per_pixel);

// Direction (radians in [0, 2*pi)) from v toward each neighbour, in
// incidence order.
std::vector<double> edge_angles_at(const RoadGraph& g, std::size_t v);

// Partitions the edges of g_prime that are not in g_base into connected
// components. g_base's vertices must be a prefix of g_prime's vertices and
// every g_base edge must exist in g_prime. Components connect through any
// shared vertex, including base junctions; base edges never join them.
std::vector<SubgraphSelection> connected_components_of_difference(const RoadGraph& g_prime,
                                                                  const RoadGraph& g_base);

// Breadth-first edge collection from v0, stopping right after the first
// edge that makes the larger bounding-box side exceed t_box_m.
SubgraphSelection bfs_subgraph(const RoadGraph& g, std::size_t v0, double t_box_m, double meters_per_pixel);

// Drops candidate edges whose midpoint lies within radius_m of a base edge.
// Vertices are kept.
RoadGraph prune_near_map(const RoadGraph& candidates, const RoadGraph& g_base, double radius_m,
                         double meters_per_pixel);

}  // namespace mapupdate
