#include <cstring>
#include <vector>

#include "doctest.h"
#include "mapupdate/io.hpp"
#include "support.hpp"

using namespace mapupdate;

TEST_SUITE("io") {

TEST_CASE("CTNS bytes match the hand-written layout") {
  const Tensor t(1, 2, 1, 4, std::vector<float>{0.5f, 1.0f});
  const std::vector<std::uint8_t> expected = {'C', 'T', 'N', 'S', 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,
                                              1,   0,   0,   0,   4, 0, 0, 0, 0, 0, 0, 0x3f, 0, 0, 0x80, 0x3f};
  CHECK(io::encode_ctns(t) == expected);
  CHECK(io::decode_ctns(expected) == t);
}

TEST_CASE("CTNS round trip through a file") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor t(7, 9, 64, 4);
  for (float& v : t.data()) v = u(rng);
  const auto dir = mutest::scratch_dir("io_ctns");
  io::write_ctns(dir / "t.ctns", t);
  CHECK(io::read_ctns(dir / "t.ctns") == t);
  CHECK(std::filesystem::file_size(dir / "t.ctns") == io::kCtnsHeaderBytes + 7 * 9 * 64 * 4);
}

TEST_CASE("CTNS decoder rejects malformed input") {
  auto bytes = io::encode_ctns(Tensor(2, 2, 1, 1, 0.25f));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::decode_ctns(bad_magic), io::FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(io::decode_ctns(bad_version), io::FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(io::decode_ctns(truncated), io::FormatError);
  CHECK_THROWS_AS(io::decode_ctns(std::vector<std::uint8_t>{'C', 'T'}), io::FormatError);
  CHECK_THROWS_AS(io::read_ctns("/nonexistent/x.ctns"), io::IoError);
}

TEST_CASE("graph GeoJSON round trip, pixel and world coordinates") {
  std::mt19937_64 rng(1);
  const RoadGraph g = mutest::random_lattice_graph(rng, 5, 4, 40.0, 0.8);
  for (bool world : {false, true}) {
    const std::optional<GeoTransform> xf = world ? std::optional(GeoTransform(0.6, 5000.0, 9000.0)) : std::nullopt;
    const RoadGraph back = io::graph_from_geojson(io::graph_to_geojson(g, xf));
    REQUIRE(back.edge_count() == g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const Vec2 a = g.vertex(g.edge(e).u);
      const Vec2 b = g.vertex(g.edge(e).v);
      const Vec2 a2 = back.vertex(back.edge(e).u);
      const Vec2 b2 = back.vertex(back.edge(e).v);
      CHECK(distance(a, a2) < 1e-6);
      CHECK(distance(b, b2) < 1e-6);
    }
  }
}

TEST_CASE("proposal GeoJSON keeps kind, score and rings") {
  std::vector<Proposal> props(2);
  props[0].kind = ProposalKind::RemovedRoad;
  props[0].road.add_vertex({1, 2});
  props[0].road.add_vertex({30, 40});
  props[0].road.add_edge(0, 1);
  props[0].score = 0.25;
  props[0].update_bbox();
  props[1].kind = ProposalKind::NewBuilding;
  props[1].rings = {{{0, 0}, {4, 0}, {4, 3}, {0, 3}}};
  props[1].update_bbox();
  const auto back = io::proposals_from_geojson(io::proposals_to_geojson(props));
  REQUIRE(back.size() == 2);
  CHECK(back[0].kind == ProposalKind::RemovedRoad);
  CHECK(back[0].score == 0.25);
  CHECK(back[0].road.edge_count() == 1);
  CHECK(back[0].bbox == props[0].bbox);
  CHECK(back[1].kind == ProposalKind::NewBuilding);
  CHECK_FALSE(back[1].score.has_value());
  REQUIRE(back[1].rings.size() == 1);
  CHECK(back[1].bbox == BBox{0, 0, 4, 3});
}

TEST_CASE("GeoJSON errors are format errors") {
  CHECK_THROWS_AS(io::graph_from_geojson("{"), io::FormatError);
  CHECK_THROWS_AS(io::graph_from_geojson("{\"type\":\"Feature\"}"), io::FormatError);
}

TEST_CASE("netpbm round trip") {
  const auto dir = mutest::scratch_dir("io_pnm");
  RasterImage rgb(3, 4, 3);
  RasterImage gray(3, 4, 1);
  for (std::size_t n = 0; n < rgb.data().size(); ++n) rgb.data()[n] = static_cast<std::uint8_t>(n * 7);
  for (std::size_t n = 0; n < gray.data().size(); ++n) gray.data()[n] = static_cast<std::uint8_t>(n * 13);
  io::write_netpbm(dir / "a.ppm", rgb);
  io::write_netpbm(dir / "a.pgm", gray);
  CHECK(io::read_netpbm(dir / "a.ppm") == rgb);
  CHECK(io::read_netpbm(dir / "a.pgm") == gray);
  io::write_text(dir / "bad.ppm", "P3\n1 1\n255\n0 0 0\n");
  CHECK_THROWS_AS(io::read_netpbm(dir / "bad.ppm"), io::FormatError);
}

}
