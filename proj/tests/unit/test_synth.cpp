#include "doctest.h"
#include "mapupdate/io.hpp"
#include "mapupdate/synth.hpp"
#include "mapupdate/tracing.hpp"
#include "support.hpp"

using namespace mapupdate;

TEST_SUITE("synth") {

TEST_CASE("scenes are deterministic per seed") {
  SceneParams sp;
  sp.seed = 12;
  sp.noise_sigma = 0.1;
  sp.n_buildings = 2;
  sp.n_new_buildings = 2;
  const Scene a = generate_scene(sp);
  const Scene b = generate_scene(sp);
  CHECK(a.p_new == b.p_new);
  CHECK(a.p_old == b.p_old);
  CHECK(a.m_new == b.m_new);
  CHECK(a.seg_new.tensor() == b.seg_new.tensor());
  CHECK(io::graph_to_geojson(a.base_graph) == io::graph_to_geojson(b.base_graph));
  sp.seed = 13;
  const Scene c = generate_scene(sp);
  CHECK_FALSE(c.p_new == a.p_new);
}

TEST_CASE("scene shapes and value ranges") {
  SceneParams sp;
  sp.seed = 2;
  sp.noise_sigma = 0.3;
  const Scene s = generate_scene(sp);
  CHECK(s.p_new.image_width() == 1024);
  CHECK(s.p_new.width() == 256);
  CHECK(s.p_new.tensor().channels() == 64);
  CHECK(s.p_new.tensor().values_in_unit_interval());
  CHECK(s.p_old.tensor().values_in_unit_interval());
  CHECK(s.m_old.channels() == 3);
  CHECK(s.new_roads.size() == 3);
  CHECK(s.distractors.size() == 5);
  CHECK(scene_ground_truth(s).proposals.size() == 3);
  CHECK(scene_distractor_proposals(s).size() == 5);
}

TEST_CASE("planted new roads are confident now and absent before") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneParams sp;
    sp.seed = seed;
    const Scene s = generate_scene(sp);
    for (const PlantedRoad& r : s.new_road_geometry) {
      const double len = distance(r.start, r.end);
      const Vec2 dir = (r.end - r.start) * (1.0 / len);
      const int k = channel_of_angle(std::atan2(dir.j, dir.i));
      const int back = (k + 32) % 64;
      // Samples along the middle of the road, well clear of both ends.
      for (double t = 0.2; t <= 0.8; t += 0.1) {
        const Vec2 p = r.start + dir * (t * len);
        CHECK(sample_confidence(s.p_new, p.i, p.j, k) >= 0.9);
        CHECK(sample_confidence(s.p_new, p.i, p.j, back) >= 0.9);
        CHECK(sample_confidence(s.p_old, p.i, p.j, k) < 0.4);
      }
    }
    // Distractors are rendered in both epochs.
    for (const PlantedRoad& r : s.distractor_geometry) {
      const Vec2 mid = (r.start + r.end) * 0.5;
      const int k = channel_of_angle(std::atan2(r.end.j - r.start.j, r.end.i - r.start.i));
      CHECK(sample_confidence(s.p_new, mid.i, mid.j, k) >= 0.9);
      CHECK(sample_confidence(s.p_old, mid.i, mid.j, k) >= 0.9);
    }
  }
}

TEST_CASE("oracle confidence is a Gaussian ridge with a cosine angular window") {
  SceneParams sp;
  const std::vector<RenderSegment> seg = {{{100, 100}, {300, 100}}};
  const int k_east = 0;  // centre 2.8 degrees off the segment direction
  const double sigma_px = sp.sigma_m / sp.meters_per_pixel;
  const double on = oracle_confidence(seg, {200, 100}, k_east, sp);
  const double off = oracle_confidence(seg, {200, 100 + sigma_px}, k_east, sp);
  CHECK(off / on == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  CHECK(oracle_confidence(seg, {200, 100}, 16, sp) == 0.0);  // perpendicular
  CHECK(oracle_confidence(seg, {200, 100 + 5 * sigma_px}, k_east, sp) == 0.0);  // past 4 sigma
  CHECK(on > 0.9);
}

TEST_CASE("removed roads exist only in the old epoch") {
  SceneParams sp;
  sp.seed = 5;
  sp.n_new = 0;
  sp.n_removed = 3;
  const Scene s = generate_scene(sp);
  REQUIRE(s.removed_geometry.size() == 3);
  CHECK(scene_removed_truth(s).proposals.size() == 3);
  for (const PlantedRoad& r : s.removed_geometry) {
    const Vec2 mid = (r.start + r.end) * 0.5;
    const int k = channel_of_angle(std::atan2(r.end.j - r.start.j, r.end.i - r.start.i));
    CHECK(sample_confidence(s.p_old, mid.i, mid.j, k) >= 0.9);
    CHECK(sample_confidence(s.p_new, mid.i, mid.j, k) < 0.4);
  }
}

TEST_CASE("new buildings appear only in the new segmentation") {
  SceneParams sp;
  sp.seed = 3;
  sp.n_buildings = 3;
  sp.n_new_buildings = 2;
  const Scene s = generate_scene(sp);
  REQUIRE(s.new_buildings.size() == 2);
  CHECK(scene_building_truth(s).proposals.size() == 2);
  for (const BuildingRect& b : s.new_buildings) {
    const auto cx = static_cast<std::uint32_t>((b.x0 + b.x1) / 2);
    const auto cy = static_cast<std::uint32_t>((b.y0 + b.y1) / 2);
    CHECK(s.seg_new.at(cy, cx) > 0.5f);
    CHECK(s.seg_old.at(cy, cx) < 0.5f);
  }
  for (const BuildingRect& b : s.buildings) {
    const auto cx = static_cast<std::uint32_t>((b.x0 + b.x1) / 2);
    const auto cy = static_cast<std::uint32_t>((b.y0 + b.y1) / 2);
    CHECK(s.seg_new.at(cy, cx) > 0.5f);
    CHECK(s.seg_old.at(cy, cx) > 0.5f);
  }
}

TEST_CASE("write_scene writes every file") {
  SceneParams sp;
  sp.seed = 1;
  sp.size_px = 768;
  sp.n_new = 2;
  sp.n_distractors = 2;
  const Scene s = generate_scene(sp);
  const auto dir = mutest::scratch_dir("synth_write");
  write_scene(s, dir);
  for (const char* f : {"old.ppm", "new.ppm", "p_old.ctns", "p_new.ctns", "seg_old.ctns", "seg_new.ctns",
                        "base.geojson", "truth.geojson", "removed_truth.geojson", "building_truth.geojson",
                        "distractors.geojson", "manifest.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(ConfidenceTensor(io::read_ctns(dir / "p_new.ctns")) == s.p_new);
  const RoadGraph g = io::read_graph(dir / "base.geojson");
  CHECK(g.edge_count() == s.base_graph.edge_count());
  // The reader applies the embedded transform; vertex order is not kept.
  CHECK(g.vertex_count() == s.base_graph.vertex_count());
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const Vec2 p = g.vertex(v);
    double best = 1e9;
    for (const Vec2& q : s.base_graph.vertices()) best = std::min(best, distance(p, q));
    CHECK(best < 1e-6);
  }
}

TEST_CASE("parameter validation") {
  SceneParams sp;
  sp.size_px = 1001;
  CHECK_THROWS(generate_scene(sp));
  sp = SceneParams{};
  sp.noise_sigma = -1;
  CHECK_THROWS(generate_scene(sp));
  sp = SceneParams{};
  sp.size_px = 256;
  sp.n_new = 40;
  CHECK_THROWS_WITH(generate_scene(sp), doctest::Contains("too crowded"));
}

}
