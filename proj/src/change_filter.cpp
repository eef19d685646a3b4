#include "mapupdate/change_filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mapupdate/buildings.hpp"
#include "mapupdate/io.hpp"

namespace mapupdate {

using json = nlohmann::ordered_json;

void FilterConfig::validate() const {
  if (!(mask_buffer_m > 0.0 && pad_m >= 0.0 && building_pad_m >= 0.0)) {
    throw std::invalid_argument("mask buffer must be positive and padding non-negative");
  }
  if (!(t_box_min_m > 0.0 && t_box_max_m >= t_box_min_m)) throw std::invalid_argument("invalid t_box range");
  if (!(mismatch_max_dist_m > 0.0)) throw std::invalid_argument("mismatch distance must be positive");
  if (window_px <= 0) throw std::invalid_argument("window size must be positive");
  if (!(p_matching >= 0.0 && p_matching <= 1.0 && p_random_window >= 0.0 && p_random_window <= 1.0)) {
    throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  if (!(meters_per_pixel > 0.0)) throw std::invalid_argument("meters_per_pixel must be positive");
  if (max_attempts <= 0) throw std::invalid_argument("max_attempts must be positive");
}

std::string_view to_string(PairLabel l) { return l == PairLabel::Matching ? "matching" : "mismatched"; }

std::string_view to_string(PairProvenance p) {
  switch (p) {
    case PairProvenance::SameWindow: return "same-window";
    case PairProvenance::RandomWindow: return "random-window";
    case PairProvenance::DisjointWindow: return "disjoint-window";
  }
  return "same-window";
}

RasterImage mask_from_subgraph(const RoadGraph& g, const SubgraphSelection& sel, const PixelWindow& window,
                               double buffer_m, double meters_per_pixel) {
  if (!(buffer_m > 0.0)) throw std::invalid_argument("mask buffer must be positive");
  if (window.empty()) throw std::invalid_argument("mask window is degenerate");
  const double r = m_to_px(buffer_m, meters_per_pixel);
  RasterImage mask(static_cast<std::uint32_t>(window.height), static_cast<std::uint32_t>(window.width), 1);
  for (std::size_t e : sel.edges) {
    const Vec2 a = g.vertex(g.edge(e).u);
    const Vec2 b = g.vertex(g.edge(e).v);
    const int x0 = std::max(window.x0, static_cast<int>(std::floor(std::min(a.i, b.i) - r)));
    const int x1 = std::min(window.x0 + window.width - 1, static_cast<int>(std::ceil(std::max(a.i, b.i) + r)));
    const int y0 = std::max(window.y0, static_cast<int>(std::floor(std::min(a.j, b.j) - r)));
    const int y1 = std::min(window.y0 + window.height - 1, static_cast<int>(std::ceil(std::max(a.j, b.j) + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        std::uint8_t& m = mask.at(static_cast<std::uint32_t>(y - window.y0), static_cast<std::uint32_t>(x - window.x0));
        if (m == 0 && point_segment_distance({static_cast<double>(x), static_cast<double>(y)}, a, b) <= r) m = 1;
      }
    }
  }
  return mask;
}

RasterImage mask_from_graph(const RoadGraph& g, const PixelWindow& window, double buffer_m, double meters_per_pixel) {
  SubgraphSelection all;
  for (std::size_t e = 0; e < g.edge_count(); ++e) all.edges.push_back(e);
  return mask_from_subgraph(g, all, window, buffer_m, meters_per_pixel);
}

void apply_mask(RasterImage& crop, const RasterImage& mask) {
  if (crop.height() != mask.height() || crop.width() != mask.width()) {
    throw std::invalid_argument("mask and crop dimensions differ");
  }
  for (std::uint32_t y = 0; y < crop.height(); ++y) {
    for (std::uint32_t x = 0; x < crop.width(); ++x) {
      if (mask.at(y, x) != 0) continue;
      for (std::uint32_t c = 0; c < crop.channels(); ++c) crop.at(y, x, c) = 0;
    }
  }
}

namespace {

PixelWindow random_window(std::mt19937_64& rng, int size, int width, int height) {
  std::uniform_int_distribution<int> xs(0, width - size);
  std::uniform_int_distribution<int> ys(0, height - size);
  const int x = xs(rng);
  const int y = ys(rng);
  return {x, y, size, size};
}

// Uniform over windows disjoint from `avoid` whose centre lies within
// max_dist_px of v0, by rejection inside the feasible square.
std::optional<PixelWindow> disjoint_window(std::mt19937_64& rng, const PixelWindow& avoid, Vec2 v0,
                                           double max_dist_px, int size, int width, int height, int tries) {
  const double half = (size - 1) / 2.0;
  const int lo_x = std::max(0, static_cast<int>(std::ceil(v0.i - max_dist_px - half)));
  const int hi_x = std::min(width - size, static_cast<int>(std::floor(v0.i + max_dist_px - half)));
  const int lo_y = std::max(0, static_cast<int>(std::ceil(v0.j - max_dist_px - half)));
  const int hi_y = std::min(height - size, static_cast<int>(std::floor(v0.j + max_dist_px - half)));
  if (lo_x > hi_x || lo_y > hi_y) return std::nullopt;
  std::uniform_int_distribution<int> xs(lo_x, hi_x);
  std::uniform_int_distribution<int> ys(lo_y, hi_y);
  for (int t = 0; t < tries; ++t) {
    const int x = xs(rng);
    const int y = ys(rng);
    const PixelWindow w{x, y, size, size};
    if (w.overlaps(avoid)) continue;
    if (distance(w.center(), v0) > max_dist_px) continue;
    return w;
  }
  return std::nullopt;
}

}  // namespace

PairExample sample_training_pair(const RoadGraph& g, const RasterImage& m_old, const RasterImage& m_new,
                                 const FilterConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (m_old.height() != m_new.height() || m_old.width() != m_new.width() || m_old.channels() != m_new.channels()) {
    throw std::invalid_argument("old and new imagery are not aligned");
  }
  const int W = static_cast<int>(m_new.width());
  const int H = static_cast<int>(m_new.height());
  const int size = cfg.window_px;
  if (W < size || H < size) throw std::invalid_argument("imagery too small for the sampling window");
  if (cfg.p_matching < 1.0 && W < 2 * size && H < 2 * size) {
    throw std::invalid_argument("imagery too small for two disjoint sampling windows");
  }
  if (g.edge_count() == 0) throw std::invalid_argument("graph has no edges to build masks from");

  std::bernoulli_distribution matching_draw(cfg.p_matching);
  std::bernoulli_distribution random_draw(cfg.p_random_window);
  std::uniform_int_distribution<std::size_t> vertex_draw(0, g.vertex_count() - 1);
  std::uniform_real_distribution<double> t_box_draw(cfg.t_box_min_m, cfg.t_box_max_m);

  // Label decisions come first so retries never bias the label mix.
  const bool matching = matching_draw(rng);
  const bool use_random = matching && random_draw(rng);
  const double max_dist_px = m_to_px(cfg.mismatch_max_dist_m, cfg.meters_per_pixel);

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const std::size_t v0 = vertex_draw(rng);
    if (g.degree(v0) == 0) continue;
    const double t_box = t_box_draw(rng);
    const SubgraphSelection h = bfs_subgraph(g, v0, t_box, cfg.meters_per_pixel);
    const Vec2 c = g.vertex(v0);
    const PixelWindow w_mask = clamp_shift(
        {static_cast<int>(std::lround(c.i)) - size / 2, static_cast<int>(std::lround(c.j)) - size / 2, size, size}, W, H);

    PairExample ex;
    ex.v0 = v0;
    ex.t_box_m = t_box;
    ex.window_mask = w_mask;
    if (!matching) {
      const auto w_old = disjoint_window(rng, w_mask, c, max_dist_px, size, W, H, 1000);
      if (!w_old) continue;
      ex.label = PairLabel::Mismatched;
      ex.provenance = PairProvenance::DisjointWindow;
      ex.window_old = *w_old;
      ex.window_new = w_mask;
    } else if (use_random) {
      ex.label = PairLabel::Matching;
      ex.provenance = PairProvenance::RandomWindow;
      ex.window_old = ex.window_new = random_window(rng, size, W, H);
    } else {
      ex.label = PairLabel::Matching;
      ex.provenance = PairProvenance::SameWindow;
      ex.window_old = ex.window_new = w_mask;
    }
    // For random windows the mask keeps its position relative to the window,
    // i.e. it is re-centred on the new window.
    ex.mask = mask_from_subgraph(g, h, w_mask, cfg.mask_buffer_m, cfg.meters_per_pixel);
    ex.crop_old = crop(m_old, ex.window_old);
    ex.crop_new = crop(m_new, ex.window_new);
    apply_mask(ex.crop_old, ex.mask);
    apply_mask(ex.crop_new, ex.mask);
    return ex;
  }
  throw std::runtime_error("could not sample a training pair after repeated attempts");
}

PairExample sample_training_pair(const RoadGraph& g, const RasterImage& m_old, const RasterImage& m_new,
                                 const FilterConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_training_pair(g, m_old, m_new, cfg, rng);
}

DatasetSummary export_pair_dataset(const RoadGraph& g, const RasterImage& m_old, const RasterImage& m_new,
                                   const FilterConfig& cfg, std::size_t count, std::uint64_t seed,
                                   const std::filesystem::path& dir) {
  if (count == 0) throw std::invalid_argument("sample count must be positive");
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  DatasetSummary summary;
  std::ostringstream index;
  auto window_json = [](const PixelWindow& w) { return json::array({w.x0, w.y0, w.width, w.height}); };
  for (std::size_t n = 0; n < count; ++n) {
    const PairExample ex = sample_training_pair(g, m_old, m_new, cfg, rng);
    char name[48];
    std::snprintf(name, sizeof(name), "example_%06zu.ctns", n);
    io::write_ctns(dir / name, make_example_tensor(ex.crop_old, ex.crop_new, ex.mask));
    ++summary.count;
    if (ex.label == PairLabel::Matching) {
      ++summary.matching;
      if (ex.provenance == PairProvenance::RandomWindow) ++summary.random_window;
    } else {
      ++summary.mismatched;
    }
    json rec;
    rec["file"] = name;
    rec["label"] = std::string(to_string(ex.label));
    rec["provenance"] = std::string(to_string(ex.provenance));
    rec["window_old"] = window_json(ex.window_old);
    rec["window_new"] = window_json(ex.window_new);
    rec["window_mask"] = window_json(ex.window_mask);
    rec["v0"] = json::array({g.vertex(ex.v0).i, g.vertex(ex.v0).j});
    rec["t_box_m"] = ex.t_box_m;
    index << rec.dump() << '\n';
  }
  io::write_text(dir / "index.jsonl", index.str());
  json s;
  s["count"] = summary.count;
  s["matching"] = summary.matching;
  s["mismatched"] = summary.mismatched;
  s["random_window"] = summary.random_window;
  s["matching_fraction"] = static_cast<double>(summary.matching) / static_cast<double>(summary.count);
  s["random_window_fraction_of_matching"] =
      summary.matching ? static_cast<double>(summary.random_window) / static_cast<double>(summary.matching) : 0.0;
  s["seed"] = seed;
  io::write_text(dir / "summary.json", s.dump(2) + "\n");
  return summary;
}

PixelWindow scoring_window(const Proposal& prop, const FilterConfig& cfg, int image_width, int image_height) {
  if (prop.bbox.empty()) throw std::invalid_argument("proposal has empty geometry");
  const double pad = m_to_px(cfg.pad_m, cfg.meters_per_pixel);
  const PixelWindow w = clamp_intersect(window_covering(prop.bbox.padded(pad)), image_width, image_height);
  if (w.empty()) throw std::invalid_argument("proposal lies outside the imagery");
  return w;
}

RasterImage proposal_mask(const Proposal& prop, const PixelWindow& window, const FilterConfig& cfg) {
  if (prop.is_road()) return mask_from_graph(prop.road, window, cfg.mask_buffer_m, cfg.meters_per_pixel);
  return building_mask(prop, window, cfg.building_pad_m, cfg.meters_per_pixel);
}

double score_proposal(const Proposal& prop, const RasterImage& m_old, const RasterImage& m_new, Scorer& scorer,
                      const FilterConfig& cfg) {
  if (m_old.height() != m_new.height() || m_old.width() != m_new.width()) {
    throw std::invalid_argument("old and new imagery are not aligned");
  }
  const PixelWindow w =
      scoring_window(prop, cfg, static_cast<int>(m_new.width()), static_cast<int>(m_new.height()));
  const RasterImage mask = proposal_mask(prop, w, cfg);
  const Tensor probs = scorer.score(make_example_tensor(crop(m_old, w), crop(m_new, w), mask));
  if (probs.channels() != 1 || probs.height() != mask.height() || probs.width() != mask.width()) {
    throw std::runtime_error("scorer output does not match its input size");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint32_t y = 0; y < mask.height(); ++y) {
    for (std::uint32_t x = 0; x < mask.width(); ++x) {
      if (mask.at(y, x) == 0) continue;
      sum += probs.at(y, x, 0);
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("degenerate proposal: empty mask");
  return std::clamp(sum / static_cast<double>(n), 0.0, 1.0);
}

void score_proposals(std::vector<Proposal>& props, const RasterImage& m_old, const RasterImage& m_new,
                     Scorer& scorer, const FilterConfig& cfg) {
  for (Proposal& p : props) p.score = score_proposal(p, m_old, m_new, scorer, cfg);
}

FilterOutcome filter_proposals(const std::vector<Proposal>& props, double t_filter) {
  const double t = std::clamp(t_filter, 0.0, 1.0);
  FilterOutcome out;
  for (const Proposal& p : props) {
    if (!p.score) throw std::invalid_argument("filter_proposals: proposal has no score");
    (*p.score < t ? out.kept : out.pruned).push_back(p);
  }
  return out;
}

}  // namespace mapupdate
