#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mapupdate/pipeline.hpp"
#include "mapupdate/synth.hpp"
#include "mapupdate/tracing.hpp"
#include "support.hpp"

using namespace mapupdate;

namespace {

// 256 x 256 image, every confidence pixel `v` in channel 0 only.
ConfidenceTensor channel0(float v) {
  ConfidenceTensor t(64, 64, 4);
  for (std::uint32_t j = 0; j < 64; ++j)
    for (std::uint32_t i = 0; i < 64; ++i) t.mutable_tensor().at(j, i, 0) = v;
  return t;
}

// A vertical base edge (100,100)-(100,120); densified to three vertices
// 10 px apart at 10 m spacing, 0.6 m/px.
RoadGraph vertical_base() {
  RoadGraph g;
  g.add_vertex({100, 100});
  g.add_vertex({100, 120});
  g.add_edge(0, 1);
  return g;
}

using EdgeKey = std::pair<std::pair<double, double>, std::pair<double, double>>;

std::vector<EdgeKey> traced_edges(const RoadGraph& g) {
  std::vector<EdgeKey> out;
  for (const Edge& e : g.edges()) {
    if (e.base) continue;
    auto a = std::make_pair(g.vertex(e.u).i, g.vertex(e.u).j);
    auto b = std::make_pair(g.vertex(e.v).i, g.vertex(e.v).j);
    if (b < a) std::swap(a, b);
    out.push_back({a, b});
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool same_edges(const std::vector<EdgeKey>& a, const std::vector<EdgeKey>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (std::fabs(a[n].first.first - b[n].first.first) > tol || std::fabs(a[n].first.second - b[n].first.second) > tol ||
        std::fabs(a[n].second.first - b[n].second.first) > tol ||
        std::fabs(a[n].second.second - b[n].second.second) > tol) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("tracing") {

TEST_CASE("bilinear sampling matches hand arithmetic") {
  // Confidence pixels c(i=0)=0, c(i=1)=1 in both rows; scale 4 puts their
  // centres at image i = 1.5 and 5.5.
  ConfidenceTensor t(2, 2, 4);
  t.mutable_tensor().at(0, 1, 0) = 1.0f;
  t.mutable_tensor().at(1, 1, 0) = 1.0f;
  CHECK(sample_confidence(t, 1.5, 3.0, 0) == 0.0);
  CHECK(sample_confidence(t, 2.5, 3.0, 0) == doctest::Approx(0.25));
  CHECK(sample_confidence(t, 3.5, 0.0, 0) == doctest::Approx(0.5));
  CHECK(sample_confidence(t, 5.5, 7.0, 0) == doctest::Approx(1.0));
  CHECK(sample_confidence(t, 0.0, 0.0, 0) == 0.0);
  CHECK(sample_confidence(t, 7.0, 7.0, 0) == 1.0);
  CHECK(sample_confidence(t, 3.5, 3.5, 1) == 0.0);
  CHECK_THROWS_AS(sample_confidence(t, 7.5, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(sample_confidence(t, -0.1, 0.0, 0), std::invalid_argument);
}

TEST_CASE("straight traces from each densified vertex") {
  TracingConfig cfg;
  cfg.record_log = true;
  const TraceResult r = trace_changes(vertical_base(), channel0(0.9f), channel0(0.0f), cfg);
  CHECK(r.base.vertex_count() == 3);
  // Each row: 9 steps of 10 m (16.67 px) along channel 0 fit before x = 255.
  CHECK(r.g_prime.edge_count() - r.base.edge_count() == 27);
  REQUIRE(r.proposals.size() == 3);
  const double dx = (10.0 / 0.6) * std::cos(angle_center(0));
  for (const Proposal& p : r.proposals) {
    CHECK(p.kind == ProposalKind::NewRoad);
    CHECK(p.road.edge_count() == 9);
    CHECK(p.bbox.max_i == doctest::Approx(100 + 9 * dx));
  }
  // Seeds are explored from the top of the stack: the densified midpoint.
  REQUIRE_FALSE(r.log.empty());
  CHECK(r.log.front().i == 100.0);
  CHECK(r.log.front().j == 110.0);
  CHECK(r.log.front().action == TraceAction::Extend);
  CHECK(std::count_if(r.log.begin(), r.log.end(), [](const TraceDecision& d) {
          return d.action == TraceAction::PopExtent;
        }) == 3);
}

TEST_CASE("comparison gate suppresses roads present in both epochs") {
  TracingConfig cfg;
  CHECK(trace_changes(vertical_base(), channel0(0.9f), channel0(0.9f), cfg).proposals.empty());
  cfg.compare_old = false;
  CHECK(trace_changes(vertical_base(), channel0(0.9f), channel0(0.9f), cfg).proposals.size() == 3);
}

TEST_CASE("gate boundaries: p_new >= t_new passes, p_old >= t_old fails") {
  TracingConfig cfg;
  cfg.t_new = 0.5;
  cfg.t_old = 0.5;
  CHECK(trace_changes(vertical_base(), channel0(0.5f), channel0(0.0f), cfg).proposals.size() == 3);
  CHECK(trace_changes(vertical_base(), channel0(0.5f), channel0(0.5f), cfg).proposals.empty());
  CHECK(trace_changes(vertical_base(), channel0(0.49f), channel0(0.0f), cfg).proposals.empty());
}

TEST_CASE("reverse mode swaps the tensors and labels removed roads") {
  TracingConfig cfg;
  cfg.mode = TraceMode::Reverse;
  const TraceResult r = trace_changes(vertical_base(), channel0(0.0f), channel0(0.9f), cfg);
  REQUIRE(r.proposals.size() == 3);
  CHECK(r.proposals[0].kind == ProposalKind::RemovedRoad);
  CHECK(trace_changes(vertical_base(), channel0(0.9f), channel0(0.0f), cfg).proposals.empty());
}

TEST_CASE("max_steps truncates") {
  TracingConfig cfg;
  cfg.max_steps = 5;
  const TraceResult r = trace_changes(vertical_base(), channel0(0.9f), channel0(0.0f), cfg);
  CHECK(r.truncated);
  CHECK(r.steps == 5);
}

TEST_CASE("input validation") {
  TracingConfig cfg;
  RoadGraph outside;
  outside.add_vertex({10, 10});
  outside.add_vertex({300, 10});
  outside.add_edge(0, 1);
  CHECK_THROWS_AS(trace_changes(outside, channel0(0.9f), channel0(0.0f), cfg), std::invalid_argument);
  CHECK_THROWS_AS(trace_changes(vertical_base(), channel0(0.9f), ConfidenceTensor(32, 32, 4), cfg),
                  std::invalid_argument);
  cfg.t_new = 1.5;
  CHECK_THROWS(cfg.validate());
  CHECK(trace_mode_from_string("reverse") == TraceMode::Reverse);
  CHECK_THROWS(trace_mode_from_string("sideways"));
}

TEST_CASE("decision log round trip") {
  TracingConfig cfg;
  cfg.record_log = true;
  const TraceResult r = trace_changes(vertical_base(), channel0(0.9f), channel0(0.0f), cfg);
  std::stringstream ss;
  write_decision_log(ss, r.log);
  const auto back = read_decision_log(ss);
  REQUIRE(back.size() == r.log.size());
  for (std::size_t n = 0; n < back.size(); ++n) {
    CHECK(back[n].action == r.log[n].action);
    CHECK(back[n].k == r.log[n].k);
    CHECK(back[n].i == r.log[n].i);
    CHECK(back[n].p_new == r.log[n].p_new);
  }
}

TEST_CASE("session hands off steps leaving its window") {
  TracingConfig cfg;
  auto present = std::make_shared<const ConfidenceTensor>(channel0(0.9f));
  auto past = std::make_shared<const ConfidenceTensor>(channel0(0.0f));
  const RoadGraph base = densify(vertical_base(), cfg.densify_spacing_m, cfg.meters_per_pixel);
  TraceSession left(base, present, past, 0, 0, {0, 0, 160, 256}, 256, 256, cfg);
  left.run({0, 1, 2});
  auto handoffs = left.take_handoffs();
  CHECK(handoffs.size() == 3);
  for (const Handoff& h : handoffs) {
    CHECK(h.origin.i < 159.5);
    CHECK(h.target.i >= 159.5);
  }
  TraceSession right(base, present, past, 0, 0, {160, 0, 96, 256}, 256, 256, cfg);
  // The left tile stops at its border; the crossing edges belong to the right.
  CHECK(left.graph().edge_count() - base.edge_count() == 9);
  for (const Handoff& h : handoffs) {
    const auto v = right.accept_handoff(h);
    REQUIRE(v.has_value());
    right.run({*v});
  }
  CHECK(right.take_handoffs().empty());
  CHECK(right.graph().edge_count() - base.edge_count() == 18);
}

TEST_CASE("tiled tracing matches a single session") {
  TracingConfig cfg;
  const TraceResult whole = trace_changes(vertical_base(), channel0(0.9f), channel0(0.0f), cfg);
  for (bool parallel : {false, true}) {
    for (int ts : {64, 128, 160, 256}) {
      TilingOptions tiling;
      tiling.tile_size = ts;
      tiling.parallel = parallel;
      const TraceResult tiled = trace_tiled(vertical_base(), channel0(0.9f), channel0(0.0f), cfg, tiling);
      CAPTURE(parallel);
      CAPTURE(ts);
      CHECK(same_edges(traced_edges(whole.g_prime), traced_edges(tiled.g_prime), 1e-9));
      CHECK(tiled.proposals.size() == 3);
    }
  }
  RoadGraph empty;
  CHECK_THROWS_WITH_AS(trace_tiled(empty, channel0(0.9f), channel0(0.0f), cfg, {}), doctest::Contains("graph required"),
                       std::invalid_argument);
}

TEST_CASE("tile merge invariant on synthetic scenes") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    for (double noise : {0.0, 0.1}) {
      SceneParams sp;
      sp.seed = seed;
      sp.noise_sigma = noise;
      const Scene s = generate_scene(sp);
      TracingConfig cfg;
      const TraceResult one = trace_changes(s.base_graph, s.p_new, s.p_old, cfg);
      TilingOptions four;
      four.tile_size = 512;
      const TraceResult tiled = trace_tiled(s.base_graph, s.p_new, s.p_old, cfg, four);
      CAPTURE(seed);
      CAPTURE(noise);
      CHECK(same_edges(traced_edges(one.g_prime), traced_edges(tiled.g_prime), 0.0));
      CHECK(tiled.proposals.size() == one.proposals.size());
      // Concurrent tiles agree whenever no two roads meet at a border, which
      // holds on every zero-noise scene.
      if (noise == 0.0) {
        four.parallel = true;
        four.threads = 4;
        const TraceResult par = trace_tiled(s.base_graph, s.p_new, s.p_old, cfg, four);
        CHECK(same_edges(traced_edges(one.g_prime), traced_edges(par.g_prime), 1e-6));
      }
      TilingOptions single;
      single.tile_size = 1024;
      const TraceResult same = trace_tiled(s.base_graph, s.p_new, s.p_old, cfg, single);
      CHECK(same_edges(traced_edges(one.g_prime), traced_edges(same.g_prime), 0.0));
      CHECK(same.proposals.size() == one.proposals.size());
    }
  }
}

TEST_CASE("traced edges keep 30 degree separation at both ends") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneParams sp;
    sp.seed = seed;
    sp.noise_sigma = 0.1;
    const Scene s = generate_scene(sp);
    TracingConfig cfg;
    const TraceResult r = trace_changes(s.base_graph, s.p_new, s.p_old, cfg);
    const RoadGraph& g = r.g_prime;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
      const auto& inc = g.incident(v);
      const auto angles = edge_angles_at(g, v);
      for (std::size_t a = 0; a < inc.size(); ++a) {
        for (std::size_t b = a + 1; b < inc.size(); ++b) {
          if (g.edge(inc[a]).base && g.edge(inc[b]).base) continue;
          CHECK(angular_distance(angles[a], angles[b]) >= cfg.min_angular_sep - 1e-9);
        }
      }
    }
  }
}

TEST_CASE("confidence crop reproduces full-tensor samples inside the window") {
  SceneParams sp;
  sp.seed = 9;
  sp.noise_sigma = 0.1;
  const Scene s = generate_scene(sp);
  const PixelWindow w{300, 500, 200, 180};
  const ConfidenceCrop c = crop_confidence(s.p_new, w);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ui(w.x0 - 0.5, w.x0 + w.width - 0.5);
  std::uniform_real_distribution<double> uj(w.y0 - 0.5, w.y0 + w.height - 0.5);
  auto crop_sample = [&](double i, double j, int k) {
    // Shift image coordinates by the crop offset in confidence pixels.
    const double s4 = c.tensor.scale_factor();
    return sample_confidence(c.tensor, i - c.offset_x * s4, j - c.offset_y * s4, k);
  };
  for (int n = 0; n < 500; ++n) {
    const double i = ui(rng);
    const double j = uj(rng);
    const int k = static_cast<int>(rng() % 64);
    CHECK(crop_sample(i, j, k) == doctest::Approx(sample_confidence(s.p_new, i, j, k)).epsilon(1e-12));
  }
}

}
