// Acceptance checks for the map-update pipeline. Prints one PASS/FAIL line
// per criterion and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mapupdate/buildings.hpp"
#include "mapupdate/change_filter.hpp"
#include "mapupdate/evaluation.hpp"
#include "mapupdate/graph_ops.hpp"
#include "mapupdate/io.hpp"
#include "mapupdate/scorer.hpp"
#include "mapupdate/synth.hpp"
#include "mapupdate/tracing.hpp"
#include "support.hpp"

using namespace mapupdate;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Pooled {
  std::size_t tp = 0;
  std::size_t denom = 0;
  std::size_t covered = 0;
  std::size_t truth = 0;

  void add(const PRPoint& p) {
    tp += p.matched_proposals;
    denom += p.num_proposals;
    covered += p.matched_truth;
    truth += p.num_truth;
  }
  double precision() const { return denom ? static_cast<double>(tp) / static_cast<double>(denom) : 1.0; }
  double recall() const { return truth ? static_cast<double>(covered) / static_cast<double>(truth) : 0.0; }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

SceneParams scene_params(std::uint64_t seed, double noise) {
  SceneParams sp;
  sp.seed = seed;
  sp.n_new = 3;
  sp.n_distractors = 5;
  sp.noise_sigma = noise;
  return sp;
}

// Stage one plus stage two on one scene, all in memory.
std::vector<Proposal> change_pipeline(const Scene& s, const TracingConfig& tcfg, const FilterConfig& fcfg) {
  TraceResult r = trace_changes(s.base_graph, s.p_new, s.p_old, tcfg);
  MockScorer scorer;
  score_proposals(r.proposals, s.m_old, s.m_new, scorer, fcfg);
  return filter_proposals(r.proposals, fcfg.t_filter).kept;
}

// Proposals that hit a distractor and no planted road.
std::size_t distractor_hits(const std::vector<Proposal>& props, const Scene& s) {
  const auto distractors = scene_distractor_proposals(s);
  const auto truth = scene_ground_truth(s).proposals;
  std::size_t n = 0;
  for (const Proposal& p : props) {
    const bool on_truth = std::any_of(truth.begin(), truth.end(), [&](const Proposal& t) { return p.bbox.intersects(t.bbox); });
    const bool on_distractor =
        std::any_of(distractors.begin(), distractors.end(), [&](const Proposal& d) { return p.bbox.intersects(d.bbox); });
    n += (!on_truth && on_distractor);
  }
  return n;
}

Outcome synthetic_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  Pooled pooled;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Scene s = generate_scene(scene_params(seed, 0.0));
    pooled.add(match_proposals(change_pipeline(s, TracingConfig{}, FilterConfig{}), scene_ground_truth(s)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {pooled.precision() == 1.0 && pooled.recall() == 1.0 && secs < 60.0,
          fmt("precision=%.4f recall=%.4f time=%.1fs", pooled.precision(), pooled.recall(), secs)};
}

Outcome motivating_failure() {
  Pooled plain;
  std::size_t plain_distractors = 0;
  std::size_t change_distractors = 0;
  TracingConfig plain_cfg;
  plain_cfg.compare_old = false;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Scene s = generate_scene(scene_params(seed, 0.0));
    const TraceResult r = trace_changes(s.base_graph, s.p_new, s.p_old, plain_cfg);
    plain.add(match_proposals(r.proposals, scene_ground_truth(s)));
    plain_distractors += distractor_hits(r.proposals, s);
    change_distractors += distractor_hits(change_pipeline(s, TracingConfig{}, FilterConfig{}), s);
  }
  return {plain.precision() <= 0.6 && plain_distractors > 0 && change_distractors == 0,
          fmt("plain precision=%.4f plain distractor proposals=%.0f change-seeking distractor proposals=%.0f",
              plain.precision(), static_cast<double>(plain_distractors), static_cast<double>(change_distractors))};
}

Outcome noise_robustness() {
  Pooled pooled;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Scene s = generate_scene(scene_params(seed, 0.1));
    pooled.add(match_proposals(change_pipeline(s, TracingConfig{}, FilterConfig{}), scene_ground_truth(s)));
  }
  return {pooled.precision() >= 0.95 && pooled.recall() >= 0.9,
          fmt("noise=0.1 precision=%.4f recall=%.4f", pooled.precision(), pooled.recall())};
}

Proposal box_proposal(double x0, double y0, double x1, double y1) {
  Proposal p;
  p.kind = ProposalKind::NewRoad;
  p.bbox = BBox{x0, y0, x1, y1};
  return p;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pos(0.0, 300.0);
  std::uniform_real_distribution<double> ext(0.0, 40.0);
  std::uniform_int_distribution<int> count(0, 20);
  auto rand_box = [&] {
    const double x = std::round(pos(rng) * 2) / 2;
    const double y = std::round(pos(rng) * 2) / 2;
    return box_proposal(x, y, x + std::round(ext(rng)), y + std::round(ext(rng)));
  };
  auto hit = [](const BBox& a, const BBox& b) {
    return !(a.max_i < b.min_i || b.max_i < a.min_i || a.max_j < b.min_j || b.max_j < a.min_j);
  };
  std::size_t match_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    GroundTruthSet gt;
    std::vector<Proposal> props;
    for (int n = count(rng); n > 0; --n) props.push_back(rand_box());
    for (int n = count(rng); n > 0; --n) gt.proposals.push_back(rand_box());
    for (int n = count(rng) / 4; n > 0; --n) gt.allowlist.push_back(rand_box());
    std::size_t tp = 0, denom = 0, covered = 0;
    for (const auto& p : props) {
      bool t = false, a = false;
      for (const auto& g : gt.proposals) t = t || hit(p.bbox, g.bbox);
      for (const auto& g : gt.allowlist) a = a || hit(p.bbox, g.bbox);
      tp += t;
      denom += (t || !a);
    }
    for (const auto& g : gt.proposals) {
      bool c = false;
      for (const auto& p : props) c = c || hit(p.bbox, g.bbox);
      covered += c;
    }
    const double precision = denom ? static_cast<double>(tp) / static_cast<double>(denom) : 1.0;
    const double recall = gt.proposals.empty() ? 0.0 : static_cast<double>(covered) / gt.proposals.size();
    const PRPoint r = match_proposals(props, gt);
    if (r.precision != precision || r.recall != recall || r.matched_proposals != tp || r.num_proposals != denom ||
        r.matched_truth != covered) {
      ++match_failures;
    }
  }

  std::size_t identity_failures = 0;
  std::size_t monotone_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const RoadGraph g = mutest::random_lattice_graph(rng, 6, 6, 40.0, 0.8);
    AplsOptions opts;
    opts.seed = static_cast<std::uint64_t>(trial);
    opts.n_samples = 300;
    opts.meters_per_pixel = 1.0;
    if (apls(g, g, opts) != 1.0) ++identity_failures;
    // Delete edges one at a time in a random order.
    std::vector<std::size_t> order(g.edge_count());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double prev = 1.0;
    std::vector<bool> removed(g.edge_count(), false);
    for (std::size_t step = 0; step < order.size(); step += 3) {
      for (std::size_t k = step; k < std::min(step + 3, order.size()); ++k) removed[order[k]] = true;
      RoadGraph h;
      for (std::size_t v = 0; v < g.vertex_count(); ++v) h.add_vertex(g.vertex(v));
      for (std::size_t e = 0; e < g.edge_count(); ++e) {
        if (!removed[e]) h.add_edge(g.edge(e).u, g.edge(e).v);
      }
      const double s = apls(g, h, opts);
      if (s > prev) ++monotone_failures;
      prev = s;
    }
  }
  return {match_failures == 0 && identity_failures == 0 && monotone_failures == 0,
          fmt("match mismatches=%.0f/1000 apls(g,g)!=1: %.0f/100 apls increases under deletion=%.0f",
              static_cast<double>(match_failures), static_cast<double>(identity_failures),
              static_cast<double>(monotone_failures))};
}

Outcome tracing_replay() {
  std::size_t edges = 0;
  std::size_t violations = 0;
  TracingConfig cfg;
  cfg.record_log = true;
  const double tol = 1e-9;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Scene s = generate_scene(scene_params(seed, 0.1));
    const TraceResult r = trace_changes(s.base_graph, s.p_new, s.p_old, cfg);
    std::size_t logged = 0;
    for (const TraceDecision& d : r.log) {
      if (d.action != TraceAction::Extend && d.action != TraceAction::Snap) continue;
      ++logged;
      // The logged values must be what the tensors say, and pass both gates.
      if (sample_confidence(s.p_new, d.i, d.j, d.k) != d.p_new) ++violations;
      if (sample_confidence(s.p_old, d.i, d.j, d.k) != d.p_old) ++violations;
      if (!(d.p_new >= cfg.t_new) || !(d.p_old < cfg.t_old)) ++violations;
    }
    const std::size_t traced = r.g_prime.edge_count() - r.base.edge_count();
    if (logged != traced) ++violations;
    edges += traced;
    // Every traced edge keeps min_angular_sep from every other edge at both ends.
    for (std::size_t v = 0; v < r.g_prime.vertex_count(); ++v) {
      const auto& inc = r.g_prime.incident(v);
      for (std::size_t a = 0; a < inc.size(); ++a) {
        for (std::size_t b = a + 1; b < inc.size(); ++b) {
          if (r.g_prime.edge(inc[a]).base && r.g_prime.edge(inc[b]).base) continue;
          const Vec2 p = r.g_prime.vertex(v);
          const Vec2 qa = r.g_prime.vertex(r.g_prime.other_end(inc[a], v));
          const Vec2 qb = r.g_prime.vertex(r.g_prime.other_end(inc[b], v));
          const double sep = angular_distance(std::atan2(qa.j - p.j, qa.i - p.i), std::atan2(qb.j - p.j, qb.i - p.i));
          if (sep < cfg.min_angular_sep - tol) ++violations;
        }
      }
    }
  }
  return {violations == 0 && edges > 0,
          fmt("traced edges=%.0f violations=%.0f", static_cast<double>(edges), static_cast<double>(violations))};
}

Outcome sampler_statistics() {
  const Scene s = generate_scene(scene_params(11, 0.0));
  FilterConfig cfg;
  std::mt19937_64 rng(5150);
  const double max_px = m_to_px(cfg.mismatch_max_dist_m, cfg.meters_per_pixel);
  std::size_t matching = 0, random_window = 0, overlaps = 0, too_far = 0, unmasked = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const PairExample ex = sample_training_pair(s.base_graph, s.m_old, s.m_new, cfg, rng);
    if (ex.label == PairLabel::Matching) {
      ++matching;
      if (ex.provenance == PairProvenance::RandomWindow) ++random_window;
    } else {
      if (ex.window_old.overlaps(ex.window_new)) ++overlaps;
      if (distance(ex.window_old.center(), s.base_graph.vertex(ex.v0)) > max_px) ++too_far;
    }
    const auto mask = ex.mask.data();
    const auto a = ex.crop_old.data();
    const auto b = ex.crop_new.data();
    const std::size_t ch = ex.crop_old.channels();
    bool clean = mask.size() * ch == a.size() && a.size() == b.size();
    for (std::size_t px = 0; clean && px < mask.size(); ++px) {
      if (mask[px]) continue;
      for (std::size_t c = 0; c < ch; ++c) clean = clean && a[px * ch + c] == 0 && b[px * ch + c] == 0;
    }
    unmasked += !clean;
  }
  const double fm = static_cast<double>(matching) / n;
  const double fr = matching ? static_cast<double>(random_window) / static_cast<double>(matching) : 0.0;
  const bool ok = fm >= 0.48 && fm <= 0.52 && fr >= 0.17 && fr <= 0.23 && overlaps == 0 && too_far == 0 && unmasked == 0;
  std::ostringstream d;
  d << "matching=" << fm << " random-window|matching=" << fr << " overlapping=" << overlaps << " beyond-2500m=" << too_far
    << " mask-zeroing-failures=" << unmasked;
  return {ok, d.str()};
}

std::size_t ones(const RasterImage& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](std::uint8_t v) { return v != 0; }));
}

double total_length(const RoadGraph& g) {
  double sum = 0.0;
  for (const Edge& e : g.edges()) sum += distance(g.vertex(e.u), g.vertex(e.v));
  return sum;
}

Outcome geometry_oracles() {
  std::mt19937_64 rng(77);
  double worst_densify = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const RoadGraph g = mutest::random_lattice_graph(rng, 5, 5, 73.0, 0.7);
    const double before = total_length(g);
    const RoadGraph d = densify(g, 10.0, 0.6);
    if (before > 0) worst_densify = std::max(worst_densify, std::fabs(total_length(d) - before) / before);
  }

  double worst_stadium = 0.0;
  for (double len : {100.0, 200.0, 333.0}) {
    for (double r : {10.0, 20.0, 35.0}) {
      RoadGraph g;
      g.add_vertex({100.3, 150.7});
      g.add_vertex({100.3 + len * std::cos(0.3), 150.7 + len * std::sin(0.3)});
      g.add_edge(0, 1);
      const double expected = 2.0 * r * len + std::numbers::pi * r * r;
      const double got = static_cast<double>(ones(mask_from_graph(g, {0, 0, 600, 600}, r, 1.0)));
      worst_stadium = std::max(worst_stadium, std::fabs(got - expected) / expected);
    }
  }

  double worst_square = 0.0;
  for (double r : {5.0, 10.0, 25.0}) {
    Proposal b;
    b.kind = ProposalKind::NewBuilding;
    const double a = 100.0;
    b.rings = {{{100.3, 100.7}, {100.3 + a, 100.7}, {100.3 + a, 100.7 + a}, {100.3, 100.7 + a}}};
    b.update_bbox();
    FilterConfig c;
    c.building_pad_m = r;
    c.meters_per_pixel = 1.0;
    const double expected = a * a + 4.0 * a * r + std::numbers::pi * r * r;
    const double got = static_cast<double>(ones(proposal_mask(b, {0, 0, 400, 400}, c)));
    worst_square = std::max(worst_square, std::fabs(got - expected) / expected);
  }

  std::size_t compare_mismatch = 0;
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 20; ++trial) {
    SegRaster a(64, 80), b(64, 80);
    for (std::uint32_t j = 0; j < 64; ++j) {
      for (std::uint32_t i = 0; i < 80; ++i) {
        a.set(j, i, std::round(u(rng) * 20.0f) / 20.0f);
        b.set(j, i, std::round(u(rng) * 20.0f) / 20.0f);
      }
    }
    const double t_old = 0.3 + 0.02 * trial, t_new = 0.7 - 0.02 * trial;
    const RasterImage m = compare_segmentation(a, b, t_old, t_new);
    for (std::uint32_t j = 0; j < 64; ++j) {
      for (std::uint32_t i = 0; i < 80; ++i) {
        if (static_cast<bool>(m.at(j, i)) != (a.at(j, i) < t_old && b.at(j, i) > t_new)) ++compare_mismatch;
      }
    }
  }
  return {worst_densify <= 1e-6 && worst_stadium <= 0.01 && worst_square <= 0.01 && compare_mismatch == 0,
          fmt("densify rel err=%.2e stadium area err=%.4f dilated-square area err=%.4f B_compare mismatches=%.0f",
              worst_densify, worst_stadium, worst_square, static_cast<double>(compare_mismatch))};
}

// --- CLI determinism -----------------------------------------------------

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MU_CLI + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

using EdgeKey = std::pair<Vec2, Vec2>;

std::vector<EdgeKey> edge_keys(const RoadGraph& g) {
  std::vector<EdgeKey> out;
  auto less = [](Vec2 a, Vec2 b) { return a.i < b.i || (a.i == b.i && a.j < b.j); };
  for (const Edge& e : g.edges()) {
    Vec2 a = g.vertex(e.u), b = g.vertex(e.v);
    if (less(b, a)) std::swap(a, b);
    out.push_back({a, b});
  }
  std::sort(out.begin(), out.end(), [&](const EdgeKey& x, const EdgeKey& y) {
    if (less(x.first, y.first)) return true;
    if (less(y.first, x.first)) return false;
    return less(x.second, y.second);
  });
  return out;
}

bool same_edges(const RoadGraph& a, const RoadGraph& b, double tol) {
  const auto ka = edge_keys(a), kb = edge_keys(b);
  if (ka.size() != kb.size()) return false;
  for (std::size_t n = 0; n < ka.size(); ++n) {
    if (distance(ka[n].first, kb[n].first) > tol || distance(ka[n].second, kb[n].second) > tol) return false;
  }
  return true;
}

Outcome determinism() {
  const fs::path root = mutest::scratch_dir("acceptance_determinism");
  std::vector<std::string> problems;
  std::size_t compared = 0;
  // Both replicas run at the same path, since reports record their inputs.
  const fs::path d = root / "work";
  for (const char* rep : {"a", "b"}) {
    const fs::path scene = d / "synth" / "scene";
    const std::vector<std::pair<std::string, std::string>> cmds = {
        {"synth", "synth --seed 9 --set synth.noise_sigma=0.1 --set synth.n_new_buildings=3 --out " + q(d / "synth")},
        {"trace", "trace --scene " + q(scene) + " --debug-log --out " + q(d / "trace")},
        {"filter", "filter --scene " + q(scene) + " --proposals " + q(d / "trace" / "proposals.geojson") + " --out " +
                       q(d / "filter")},
        {"sample-pairs", "sample-pairs --scene " + q(scene) + " --seed 9 --count 40 --out " + q(d / "pairs")},
        {"eval", "eval --proposals " + q(d / "filter" / "scored.geojson") + " --truth " + q(scene / "truth.geojson") +
                     " --truth-graph " + q(scene / "base.geojson") + " --prop-graph " + q(d / "trace" / "g_prime.geojson") +
                     " --seed 9 --out " + q(d / "eval")},
        {"buildings", "buildings --scene " + q(scene) + " --out " + q(d / "buildings")},
        {"run", "run --scene " + q(scene) + " --seed 9 --out " + q(d / "run")},
    };
    for (const auto& [name, args] : cmds) {
      if (cli(args) != 0) problems.push_back(name + " failed");
    }
    fs::rename(d, root / rep);
  }
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    const fs::path other = root / "b" / rel;
    ++compared;
    if (!fs::exists(other) || io::read_bytes(entry.path()) != io::read_bytes(other)) {
      problems.push_back("differs: " + rel.string());
    }
  }
  for (const char* name : {"synth/scene/truth.geojson", "trace/proposals.geojson", "trace/report.json",
                           "filter/scored.geojson", "eval/report.jsonl", "buildings/proposals.geojson",
                           "run/candidates.geojson", "run/report.json", "pairs/dataset/index.jsonl"}) {
    if (!fs::exists(root / "a" / name)) problems.push_back(std::string("missing: ") + name);
  }

  // Tile-border merge: one 1024 px tile vs four 512 px tiles.
  std::size_t tile_scenes = 0;
  for (int seed : {3, 14, 20, 22}) {
    const fs::path d = root / ("tiles_" + std::to_string(seed));
    if (cli("synth --seed " + std::to_string(seed) + " --set synth.noise_sigma=0.1 --out " + q(d)) != 0) {
      problems.push_back("tile synth failed");
      continue;
    }
    if (cli("run --scene " + q(d / "scene") + " --tile-size 1024 --out " + q(d / "one")) != 0 ||
        cli("run --scene " + q(d / "scene") + " --tile-size 512 --threads 4 --out " + q(d / "four")) != 0) {
      problems.push_back("tiled run failed");
      continue;
    }
    ++tile_scenes;
    if (!same_edges(io::read_graph(d / "one" / "g_prime.geojson"), io::read_graph(d / "four" / "g_prime.geojson"), 1e-6)) {
      problems.push_back("1-tile vs 4-tile edge sets differ (seed " + std::to_string(seed) + ")");
    }
  }
  std::ostringstream detail;
  detail << "files compared=" << compared << " tiled scenes=" << tile_scenes;
  for (const auto& p : problems) detail << "; " << p;
  return {problems.empty() && compared > 0, detail.str()};
}

}  // namespace

// Optional arguments name the criteria to run; default is all of them.
int main(int argc, char** argv) {
  const std::vector<std::string> only(argv + 1, argv + argc);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"synthetic-recovery", synthetic_recovery},
      {"motivating-failure-mode", motivating_failure},
      {"noise-robustness", noise_robustness},
      {"metric-oracles", metric_oracles},
      {"tracing-replay", tracing_replay},
      {"sampler-statistics", sampler_statistics},
      {"geometry-oracles", geometry_oracles},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
