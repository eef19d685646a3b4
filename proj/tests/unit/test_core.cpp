#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mapupdate/core.hpp"

using namespace mapupdate;

TEST_SUITE("core") {

TEST_CASE("channel centres map back to their channel") {
  for (int k = 0; k < kNumDirections; ++k) {
    CHECK(channel_of_angle(angle_center(k)) == k);
    CHECK(angle_center(k) == doctest::Approx((k + 0.5) * 2.0 * std::numbers::pi / 64.0));
  }
  CHECK(channel_of_angle(0.0) == 0);
  CHECK(channel_of_angle(-1e-9) == 63);
  CHECK(channel_of_angle(2.0 * std::numbers::pi) == 0);
  CHECK(channel_of_angle(std::numbers::pi) == 32);
  CHECK_THROWS_AS(angle_center(64), std::invalid_argument);
}

TEST_CASE("angular distance is symmetric and at most pi") {
  CHECK(angular_distance(0.1, 2.0 * std::numbers::pi - 0.1) == doctest::Approx(0.2));
  CHECK(angular_distance(0.0, std::numbers::pi) == doctest::Approx(std::numbers::pi));
  for (double a = -7.0; a < 7.0; a += 0.37) {
    for (double b = -7.0; b < 7.0; b += 0.41) {
      CHECK(angular_distance(a, b) == doctest::Approx(angular_distance(b, a)));
      CHECK(angular_distance(a, b) <= std::numbers::pi + 1e-12);
    }
  }
}

TEST_CASE("closed bbox intersection counts touching boxes") {
  const BBox a{0, 0, 10, 10};
  CHECK(a.intersects({10, 10, 20, 20}));
  CHECK(a.intersects({10, 0, 11, 1}));
  CHECK_FALSE(a.intersects({10.001, 0, 20, 10}));
  CHECK_FALSE(a.intersects(BBox{}));
  BBox b;
  CHECK(b.empty());
  b.expand(Vec2{3, 4});
  CHECK(b.width() == 0.0);
  CHECK(b.intersects({3, 4, 3, 4}));
}

TEST_CASE("geotransform round trip and north-up convention") {
  const GeoTransform t(0.5, 1000.0, 2000.0);
  const Vec2 w = t.pixel_to_world({10, 20});
  CHECK(w.i == 1005.0);
  CHECK(w.j == 1990.0);
  const Vec2 p = t.world_to_pixel(w);
  CHECK(p.i == doctest::Approx(10.0));
  CHECK(p.j == doctest::Approx(20.0));
  CHECK(m_to_px(6.0, 0.6) == doctest::Approx(10.0));
  CHECK_THROWS(GeoTransform(0.0, 0, 0));
}

TEST_CASE("road graph rejects self loops and duplicates") {
  RoadGraph g;
  const auto a = g.add_vertex({0, 0});
  const auto b = g.add_vertex({3, 4});
  g.add_edge(a, b);
  CHECK_THROWS_AS(g.add_edge(a, a), std::invalid_argument);
  CHECK_THROWS_AS(g.add_edge(b, a), std::invalid_argument);
  CHECK_THROWS_AS(g.add_edge(a, 7), std::invalid_argument);
  CHECK_FALSE(g.try_add_edge(b, a));
  CHECK(g.edge_length_px(0) == 5.0);
  CHECK(g.degree(a) == 1);
  CHECK(g.other_end(0, a) == b);
  g.validate();
}

TEST_CASE("point to segment distance") {
  CHECK(point_segment_distance({5, 3}, {0, 0}, {10, 0}) == 3.0);
  CHECK(point_segment_distance({-3, 4}, {0, 0}, {10, 0}) == 5.0);
  CHECK(point_segment_distance({1, 1}, {2, 2}, {2, 2}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("pixel windows") {
  const PixelWindow w{-10, 5, 20, 20};
  const PixelWindow s = clamp_shift(w, 100, 100);
  CHECK(s == PixelWindow{0, 5, 20, 20});
  CHECK_THROWS(clamp_shift({0, 0, 200, 10}, 100, 100));
  CHECK(clamp_intersect(w, 100, 100) == PixelWindow{0, 5, 10, 20});
  CHECK(w.center().i == doctest::Approx(-0.5));
  CHECK(PixelWindow{0, 0, 10, 10}.overlaps({9, 9, 5, 5}));
  CHECK_FALSE(PixelWindow{0, 0, 10, 10}.overlaps({10, 0, 5, 5}));
  CHECK(window_covering({1.5, 2.5, 3.2, 4.0}) == PixelWindow{1, 2, 4, 3});
}

TEST_CASE("crop copies the right pixels and shifts the transform") {
  RasterImage img(4, 5, 1, GeoTransform(1.0, 0, 100));
  for (std::uint32_t j = 0; j < 4; ++j)
    for (std::uint32_t i = 0; i < 5; ++i) img.at(j, i) = static_cast<std::uint8_t>(10 * j + i);
  const RasterImage c = crop(img, {1, 2, 3, 2});
  CHECK(c.width() == 3);
  CHECK(c.at(0, 0) == 21);
  CHECK(c.at(1, 2) == 33);
  CHECK(c.transform().origin_x == 1.0);
  CHECK(c.transform().origin_y == 98.0);
}

TEST_CASE("tensor unit interval check") {
  Tensor t(2, 2, 3, 1, 0.5f);
  CHECK(t.values_in_unit_interval());
  t.at(1, 1, 2) = 1.5f;
  CHECK_FALSE(t.values_in_unit_interval());
  CHECK_THROWS(ConfidenceTensor(Tensor(2, 2, 3, 4, 0.0f)));
}

}
