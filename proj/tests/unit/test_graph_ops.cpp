#include <algorithm>
#include <set>

#include "doctest.h"
#include "mapupdate/graph_ops.hpp"
#include "support.hpp"

using namespace mapupdate;

TEST_SUITE("graph_ops") {

TEST_CASE("densify preserves length and bounds segment spacing") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const RoadGraph g = mutest::random_lattice_graph(rng, 6, 6, 50.0 + 10.0 * trial, 0.7);
    const RoadGraph d = densify(g, 10.0, 0.6);
    const double spacing = 10.0 / 0.6;
    CHECK(std::fabs(d.total_length_px() - g.total_length_px()) <= 1e-6 * g.total_length_px());
    for (std::size_t e = 0; e < d.edge_count(); ++e) CHECK(d.edge_length_px(e) <= spacing * (1 + 1e-9));
    for (std::size_t v = 0; v < g.vertex_count(); ++v) CHECK(d.vertex(v) == g.vertex(v));
    CHECK(d.edge_count() - g.edge_count() == d.vertex_count() - g.vertex_count());
  }
}

TEST_CASE("densify segment count is ceil(len / spacing)") {
  RoadGraph g;
  g.add_vertex({0, 0});
  g.add_vertex({50, 0});   // 30 m at 0.6 m/px
  g.add_vertex({50, 51});  // 30.6 m
  g.add_edge(0, 1, true);
  g.add_edge(1, 2);
  const RoadGraph d = densify(g, 10.0, 0.6);
  CHECK(d.edge_count() == 3 + 4);
  CHECK(d.vertex_is_base(3));
  CHECK_FALSE(d.vertex_is_base(d.vertex_count() - 1));
  CHECK_THROWS(densify(g, 0.0, 0.6));
}

TEST_CASE("edge angles") {
  RoadGraph g;
  g.add_vertex({0, 0});
  g.add_vertex({1, 0});
  g.add_vertex({0, 1});
  g.add_vertex({-1, -1});
  g.add_edge(0, 1);
  g.add_edge(0, 2);
  g.add_edge(0, 3);
  const auto a = edge_angles_at(g, 0);
  CHECK(a[0] == doctest::Approx(0.0));
  CHECK(a[1] == doctest::Approx(std::numbers::pi / 2));
  CHECK(a[2] == doctest::Approx(5 * std::numbers::pi / 4));
}

TEST_CASE("components of the difference join at shared vertices only") {
  RoadGraph base;
  for (int x = 0; x < 4; ++x) base.add_vertex({x * 10.0, 0}, true);
  for (int x = 0; x < 3; ++x) base.add_edge(x, x + 1, true);
  RoadGraph gp = base;
  const auto a = gp.add_vertex({0, 10});
  const auto b = gp.add_vertex({0, 20});
  const auto c = gp.add_vertex({30, 10});
  gp.add_edge(0, a);
  gp.add_edge(a, b);
  gp.add_edge(3, c);
  const auto d = gp.add_vertex({10, -10});
  gp.add_edge(1, d);
  gp.add_edge(d, 2);  // joins base vertices 1 and 2 through new edges
  const auto comps = connected_components_of_difference(gp, base);
  REQUIRE(comps.size() == 3);
  CHECK(comps[0].edges.size() == 2);
  CHECK(comps[0].bbox == BBox{0, 0, 0, 20});
  CHECK(comps[1].edges.size() == 1);
  CHECK(comps[2].edges.size() == 2);

  RoadGraph wrong;
  wrong.add_vertex({1, 1});
  CHECK_THROWS(connected_components_of_difference(gp, wrong));
}

TEST_CASE("bfs subgraph stops after the box exceeds t_box") {
  RoadGraph g;
  for (int x = 0; x <= 20; ++x) g.add_vertex({x * 10.0, 0});
  for (int x = 0; x < 20; ++x) g.add_edge(x, x + 1);
  // 60 m at 1 m/px: the seventh edge from vertex 0 reaches 70 px > 60.
  const auto sel = bfs_subgraph(g, 0, 60.0, 1.0);
  CHECK(sel.edges.size() == 7);
  CHECK(sel.bbox.width() == 70.0);
  const auto mid = bfs_subgraph(g, 10, 60.0, 1.0);
  CHECK(mid.bbox.width() > 60.0);
  CHECK(mid.bbox.width() <= 70.0);
  const auto all = bfs_subgraph(g, 0, 1000.0, 1.0);
  CHECK(all.edges.size() == 20);
}

TEST_CASE("extract subgraph copies only selected edges") {
  std::mt19937_64 rng(3);
  const RoadGraph g = mutest::random_lattice_graph(rng, 4, 4, 30.0, 1.0);
  SubgraphSelection sel;
  sel.edges = {0, 2, 5};
  const RoadGraph s = extract_subgraph(g, sel);
  CHECK(s.edge_count() == 3);
  CHECK(s.total_length_px() == doctest::Approx(g.edge_length_px(0) + g.edge_length_px(2) + g.edge_length_px(5)));
}

TEST_CASE("prune near map drops edges whose midpoint is close") {
  RoadGraph base;
  base.add_vertex({0, 0});
  base.add_vertex({100, 0});
  base.add_edge(0, 1);
  RoadGraph cand;
  cand.add_vertex({10, 5});
  cand.add_vertex({20, 5});
  cand.add_vertex({10, 50});
  cand.add_edge(0, 1);
  cand.add_edge(0, 2);
  const RoadGraph out = prune_near_map(cand, base, 6.0, 1.0);
  CHECK(out.vertex_count() == 3);
  REQUIRE(out.edge_count() == 1);
  CHECK(out.edge(0).v == 2);
}

}
