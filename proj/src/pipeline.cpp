#include "mapupdate/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mapupdate/buildings.hpp"
#include "mapupdate/io.hpp"

namespace mapupdate {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k{"seed", "sample.count"};
    auto add = [&](const std::string& section, std::initializer_list<const char*> names) {
      for (const char* n : names) k.insert(section + "." + n);
    };
    add("input", {"scene", "graph", "old_image", "new_image", "p_old", "p_new", "seg_old", "seg_new", "proposals",
                  "truth", "allowlist", "truth_graph", "prop_graph"});
    add("tracing", {"t_new", "t_old", "step_length_m", "densify_spacing_m", "min_angular_sep_deg", "snap_fraction",
                    "max_steps", "mode", "compare_old"});
    add("filter", {"t_filter", "mask_buffer_m", "pad_m", "building_pad_m", "t_box_min_m", "t_box_max_m",
                   "mismatch_max_dist_m", "window_px", "p_matching", "p_random_window", "max_attempts"});
    add("eval", {"thresholds", "snap_radius_m", "apls_samples"});
    add("buildings", {"t_old", "t_new", "min_area_m2", "t_filter"});
    add("pipeline", {"tile_size", "threads", "parallel_tiles", "scorer", "debug_log", "meters_per_pixel"});
    add("synth", {"size_px", "scale_factor", "grid_spacing_m", "grid_jitter_m", "n_new", "n_distractors", "n_removed",
                  "n_buildings", "n_new_buildings", "noise_sigma", "min_length_m", "max_length_m", "sigma_m",
                  "window_channels", "road_width_m", "start_gap_m", "end_margin_m"});
    return k;
  }();
  return keys;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.has(full)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
    cfg.values_[full] = trim(s.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io::IoError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const char* b = it->second.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(b, &end);
  if (end == b || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("'" + key + "' is not a number: " + it->second);
  }
  return v;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const char* b = it->second.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(b, &end, 10);
  if (end == b || *end != '\0' || errno == ERANGE) throw ConfigError("'" + key + "' is not an integer: " + it->second);
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' is not a boolean: " + v);
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Config::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

void validate_config_keys(const Config& cfg) {
  for (const auto& [k, v] : cfg.values()) {
    if (!known_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
}

// ---------------------------------------------------------------------------
// PipelineConfig

namespace {

std::vector<double> parse_thresholds(const std::string& s) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) continue;
    Config one;
    one.set("t", t);
    out.push_back(one.get_double("t", 0.0));
  }
  if (out.empty()) throw ConfigError("eval.thresholds is empty");
  return out;
}

std::string join_path(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

}  // namespace

PipelineConfig PipelineConfig::from_config(const Config& cfg) {
  validate_config_keys(cfg);
  PipelineConfig p;
  p.source = cfg;
  const long long seed = cfg.get_int("seed", 0);
  if (seed < 0) throw ConfigError("seed must be non-negative");
  p.seed = static_cast<std::uint64_t>(seed);

  p.scene_dir = cfg.get("input.scene", "");
  std::optional<double> scene_mpp;
  std::string scene_truth;
  std::string scene_removed;
  if (!p.scene_dir.empty()) {
    const fs::path dir(p.scene_dir);
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad scene manifest in " + p.scene_dir + ": " + e.what());
    }
    const auto& f = m.at("files");
    p.graph = join_path(dir, f.at("base_graph").get<std::string>());
    p.old_image = join_path(dir, f.at("old_image").get<std::string>());
    p.new_image = join_path(dir, f.at("new_image").get<std::string>());
    p.p_old = join_path(dir, f.at("p_old").get<std::string>());
    p.p_new = join_path(dir, f.at("p_new").get<std::string>());
    p.seg_old = join_path(dir, f.at("seg_old").get<std::string>());
    p.seg_new = join_path(dir, f.at("seg_new").get<std::string>());
    scene_truth = join_path(dir, f.at("truth").get<std::string>());
    scene_removed = join_path(dir, f.at("removed_truth").get<std::string>());
    scene_mpp = m.at("transform").at("meters_per_pixel").get<double>();
  }
  auto path = [&](const char* key, std::string& field) { field = cfg.get(std::string("input.") + key, field); };
  path("graph", p.graph);
  path("old_image", p.old_image);
  path("new_image", p.new_image);
  path("p_old", p.p_old);
  path("p_new", p.p_new);
  path("seg_old", p.seg_old);
  path("seg_new", p.seg_new);
  path("proposals", p.proposals);
  path("allowlist", p.allowlist);
  path("truth_graph", p.truth_graph);
  path("prop_graph", p.prop_graph);

  p.meters_per_pixel = cfg.get_double("pipeline.meters_per_pixel", scene_mpp.value_or(kDefaultMetersPerPixel));
  p.tile_size = static_cast<int>(cfg.get_int("pipeline.tile_size", 512));
  p.threads = static_cast<int>(cfg.get_int("pipeline.threads", 0));
  p.parallel_tiles = cfg.get_bool("pipeline.parallel_tiles", false);
  p.scorer = cfg.get("pipeline.scorer", "mock");
  p.debug_log = cfg.get_bool("pipeline.debug_log", false);

  TracingConfig& t = p.tracing;
  t.t_new = cfg.get_double("tracing.t_new", t.t_new);
  t.t_old = cfg.get_double("tracing.t_old", t.t_old);
  t.step_length_m = cfg.get_double("tracing.step_length_m", t.step_length_m);
  t.densify_spacing_m = cfg.get_double("tracing.densify_spacing_m", t.densify_spacing_m);
  t.min_angular_sep = cfg.get_double("tracing.min_angular_sep_deg", t.min_angular_sep * 180.0 / std::numbers::pi) *
                      std::numbers::pi / 180.0;
  t.snap_fraction = cfg.get_double("tracing.snap_fraction", t.snap_fraction);
  const long long max_steps = cfg.get_int("tracing.max_steps", static_cast<long long>(t.max_steps));
  if (max_steps <= 0) throw ConfigError("tracing.max_steps must be positive");
  t.max_steps = static_cast<std::size_t>(max_steps);
  try {
    t.mode = trace_mode_from_string(cfg.get("tracing.mode", std::string(to_string(t.mode))));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  t.compare_old = cfg.get_bool("tracing.compare_old", t.compare_old);
  t.meters_per_pixel = p.meters_per_pixel;
  t.record_log = p.debug_log;

  // Truth defaults follow the tracing direction.
  if (!p.scene_dir.empty()) p.truth = t.mode == TraceMode::Forward ? scene_truth : scene_removed;
  path("truth", p.truth);

  FilterConfig& f = p.filter;
  f.t_filter = cfg.get_double("filter.t_filter", f.t_filter);
  f.mask_buffer_m = cfg.get_double("filter.mask_buffer_m", f.mask_buffer_m);
  f.pad_m = cfg.get_double("filter.pad_m", f.pad_m);
  f.building_pad_m = cfg.get_double("filter.building_pad_m", f.building_pad_m);
  f.t_box_min_m = cfg.get_double("filter.t_box_min_m", f.t_box_min_m);
  f.t_box_max_m = cfg.get_double("filter.t_box_max_m", f.t_box_max_m);
  f.mismatch_max_dist_m = cfg.get_double("filter.mismatch_max_dist_m", f.mismatch_max_dist_m);
  f.window_px = static_cast<int>(cfg.get_int("filter.window_px", f.window_px));
  f.p_matching = cfg.get_double("filter.p_matching", f.p_matching);
  f.p_random_window = cfg.get_double("filter.p_random_window", f.p_random_window);
  f.max_attempts = static_cast<int>(cfg.get_int("filter.max_attempts", f.max_attempts));
  f.meters_per_pixel = p.meters_per_pixel;

  p.thresholds.clear();
  if (cfg.has("eval.thresholds")) {
    p.thresholds = parse_thresholds(cfg.get("eval.thresholds", ""));
  } else {
    for (int n = 0; n <= 20; ++n) p.thresholds.push_back(n * 0.05);
  }
  p.apls.snap_radius_m = cfg.get_double("eval.snap_radius_m", p.apls.snap_radius_m);
  const long long apls_samples = cfg.get_int("eval.apls_samples", static_cast<long long>(p.apls.n_samples));
  if (apls_samples <= 0) throw ConfigError("eval.apls_samples must be positive");
  p.apls.n_samples = static_cast<std::size_t>(apls_samples);
  p.apls.seed = p.seed;
  p.apls.meters_per_pixel = p.meters_per_pixel;

  p.seg_t_old = cfg.get_double("buildings.t_old", p.seg_t_old);
  p.seg_t_new = cfg.get_double("buildings.t_new", p.seg_t_new);
  p.min_area_m2 = cfg.get_double("buildings.min_area_m2", p.min_area_m2);
  p.building_t_filter = cfg.get_double("buildings.t_filter", p.building_t_filter);

  const long long count = cfg.get_int("sample.count", static_cast<long long>(p.sample_count));
  if (count <= 0) throw ConfigError("sample.count must be positive");
  p.sample_count = static_cast<std::size_t>(count);

  SceneParams& s = p.synth;
  s.size_px = static_cast<int>(cfg.get_int("synth.size_px", s.size_px));
  s.scale_factor = static_cast<int>(cfg.get_int("synth.scale_factor", s.scale_factor));
  s.grid_spacing_m = cfg.get_double("synth.grid_spacing_m", s.grid_spacing_m);
  s.grid_jitter_m = cfg.get_double("synth.grid_jitter_m", s.grid_jitter_m);
  s.n_new = static_cast<int>(cfg.get_int("synth.n_new", s.n_new));
  s.n_distractors = static_cast<int>(cfg.get_int("synth.n_distractors", s.n_distractors));
  s.n_removed = static_cast<int>(cfg.get_int("synth.n_removed", s.n_removed));
  s.n_buildings = static_cast<int>(cfg.get_int("synth.n_buildings", s.n_buildings));
  s.n_new_buildings = static_cast<int>(cfg.get_int("synth.n_new_buildings", s.n_new_buildings));
  s.noise_sigma = cfg.get_double("synth.noise_sigma", s.noise_sigma);
  s.min_length_m = cfg.get_double("synth.min_length_m", s.min_length_m);
  s.max_length_m = cfg.get_double("synth.max_length_m", s.max_length_m);
  s.sigma_m = cfg.get_double("synth.sigma_m", s.sigma_m);
  s.window_channels = cfg.get_double("synth.window_channels", s.window_channels);
  s.road_width_m = cfg.get_double("synth.road_width_m", s.road_width_m);
  s.start_gap_m = cfg.get_double("synth.start_gap_m", s.start_gap_m);
  s.end_margin_m = cfg.get_double("synth.end_margin_m", s.end_margin_m);
  s.meters_per_pixel = p.meters_per_pixel;
  s.seed = p.seed;

  p.validate();
  return p;
}

void PipelineConfig::validate() const {
  if (tile_size < 512) throw ConfigError("pipeline.tile_size must be at least 512");
  if (threads < 0) throw ConfigError("pipeline.threads must be non-negative");
  if (!(meters_per_pixel > 0.0)) throw ConfigError("pipeline.meters_per_pixel must be positive");
  if (!(min_area_m2 >= 0.0)) throw ConfigError("buildings.min_area_m2 must be non-negative");
  if (scorer != "mock" && scorer.rfind("cmd:", 0) != 0) throw ConfigError("pipeline.scorer must be mock or cmd:<argv>");
  try {
    tracing.validate();
    filter.validate();
    synth.validate();
    if (!(seg_t_old >= 0.0 && seg_t_old <= 1.0 && seg_t_new >= 0.0 && seg_t_new <= 1.0)) {
      throw std::invalid_argument("segmentation thresholds must lie in [0, 1]");
    }
    if (!(building_t_filter >= 0.0 && building_t_filter <= 1.0)) {
      throw std::invalid_argument("buildings.t_filter must lie in [0, 1]");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::unique_ptr<Scorer> make_scorer(const std::string& spec) {
  if (spec == "mock") return std::make_unique<MockScorer>();
  if (spec.rfind("cmd:", 0) == 0) {
    auto argv = split_command(spec.substr(4));
    if (argv.empty()) throw ConfigError("scorer command is empty");
    return std::make_unique<SubprocessScorer>(std::move(argv));
  }
  throw ConfigError("unknown scorer '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Tiled tracing

namespace {

template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
  const std::size_t workers =
      std::min<std::size_t>(n, threads > 0 ? static_cast<std::size_t>(threads)
                                           : std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

RoadGraph as_base_graph(const RoadGraph& g) {
  RoadGraph out;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) out.add_vertex(g.vertex(v), true);
  for (const Edge& e : g.edges()) out.add_edge(e.u, e.v, true);
  return out;
}

// Unifies traced vertices closer than `radius` px while merging tile graphs.
class VertexIndex {
 public:
  explicit VertexIndex(double radius) : radius_(radius) {}

  std::size_t locate(RoadGraph& g, Vec2 p) {
    const long cx = static_cast<long>(std::floor(p.i / radius_));
    const long cy = static_cast<long>(std::floor(p.j / radius_));
    std::optional<std::size_t> best;
    double best_d = radius_;
    for (long y = cy - 1; y <= cy + 1; ++y) {
      for (long x = cx - 1; x <= cx + 1; ++x) {
        const auto it = cells_.find(key(x, y));
        if (it == cells_.end()) continue;
        for (std::size_t v : it->second) {
          const double d = distance(g.vertex(v), p);
          if (d <= radius_ && (!best || d < best_d || (d == best_d && v < *best))) {
            best_d = d;
            best = v;
          }
        }
      }
    }
    if (best) return *best;
    const std::size_t v = g.add_vertex(p, false);
    cells_[key(cx, cy)].push_back(v);
    return v;
  }

 private:
  static long long key(long x, long y) { return (static_cast<long long>(x) << 32) ^ (y & 0xffffffffLL); }
  double radius_;
  std::unordered_map<long long, std::vector<std::size_t>> cells_;
};

}  // namespace

TraceResult trace_tiled(const RoadGraph& g, const ConfidenceTensor& p_new, const ConfidenceTensor& p_old,
                        const TracingConfig& cfg, const TilingOptions& tiling) {
  cfg.validate();
  if (tiling.tile_size <= 0) throw std::invalid_argument("tile size must be positive");
  if (!(tiling.halo_fraction >= 0.0)) throw std::invalid_argument("halo fraction must be non-negative");
  if (g.empty()) throw std::invalid_argument("base graph required: the input graph has no vertices");
  if (p_new.height() != p_old.height() || p_new.width() != p_old.width() ||
      p_new.scale_factor() != p_old.scale_factor()) {
    throw std::invalid_argument("confidence tensors have mismatched extents");
  }
  TraceResult result;
  result.base = densify(as_base_graph(g), cfg.densify_spacing_m, cfg.meters_per_pixel);
  const int iw = static_cast<int>(p_new.image_width());
  const int ih = static_cast<int>(p_new.image_height());
  for (const Vec2& v : result.base.vertices()) {
    if (!(v.i >= 0.0 && v.j >= 0.0 && v.i <= iw - 1.0 && v.j <= ih - 1.0)) {
      throw std::invalid_argument("graph extends outside the confidence tensor extent");
    }
  }

  const int ts = tiling.tile_size;
  const int ntx = (iw + ts - 1) / ts;
  const int nty = (ih + ts - 1) / ts;
  const std::size_t ntiles = static_cast<std::size_t>(ntx) * nty;
  auto owner = [&](Vec2 p) {
    const int tx = std::clamp(static_cast<int>(std::floor((p.i + 0.5) / ts)), 0, ntx - 1);
    const int ty = std::clamp(static_cast<int>(std::floor((p.j + 0.5) / ts)), 0, nty - 1);
    return static_cast<std::size_t>(ty) * ntx + tx;
  };

  const bool forward = cfg.mode == TraceMode::Forward;
  const ConfidenceTensor& present = forward ? p_new : p_old;
  const ConfidenceTensor& past = forward ? p_old : p_new;
  const int halo = static_cast<int>(std::ceil(tiling.halo_fraction * ts));
  const ProposalKind kind = forward ? ProposalKind::NewRoad : ProposalKind::RemovedRoad;
  auto core_of = [&](std::size_t t) {
    const int tx = static_cast<int>(t % ntx);
    const int ty = static_cast<int>(t / ntx);
    return PixelWindow{tx * ts, ty * ts, std::min(ts, iw - tx * ts), std::min(ts, ih - ty * ts)};
  };
  auto view_of = [&](std::size_t t) {
    const PixelWindow core = core_of(t);
    const PixelWindow read = clamp_intersect(
        PixelWindow{core.x0 - halo, core.y0 - halo, core.width + 2 * halo, core.height + 2 * halo}, iw, ih);
    ConfidenceCrop a = crop_confidence(present, read);
    ConfidenceCrop b = crop_confidence(past, read);
    return ConfidenceView{std::make_shared<const ConfidenceTensor>(std::move(a.tensor)),
                          std::make_shared<const ConfidenceTensor>(std::move(b.tensor)), a.offset_x, a.offset_y};
  };

  if (!tiling.parallel) {
    // A few recently used tiles stay resident; DFS rarely jumps far.
    constexpr std::size_t kResident = 4;
    std::vector<std::pair<std::size_t, ConfidenceView>> resident;
    ConfidenceResolver resolver = [&](Vec2 p) {
      const std::size_t t = owner(p);
      auto it = std::find_if(resident.begin(), resident.end(), [&](const auto& r) { return r.first == t; });
      if (it == resident.end()) {
        if (resident.size() == kResident) resident.pop_back();
        resident.insert(resident.begin(), {t, view_of(t)});
      } else if (it != resident.begin()) {
        std::rotate(resident.begin(), it, it + 1);
      }
      return resident.front().second;
    };
    TraceSession session(result.base, resolver, iw, ih, cfg);
    std::vector<std::size_t> stack(result.base.vertex_count());
    std::iota(stack.begin(), stack.end(), 0);
    session.run(std::move(stack));
    result.steps = session.steps();
    result.truncated = session.truncated();
    result.log = session.log();
    result.g_prime = session.take_graph();
    result.proposals = proposals_from_trace(result.g_prime, result.base, kind);
    return result;
  }

  std::vector<std::unique_ptr<TraceSession>> sessions(ntiles);
  std::vector<std::vector<std::size_t>> seeds(ntiles);
  for (std::size_t v = 0; v < result.base.vertex_count(); ++v) seeds[owner(result.base.vertex(v))].push_back(v);

  parallel_for(ntiles, tiling.threads, [&](std::size_t t) {
    const ConfidenceView v = view_of(t);
    sessions[t] = std::make_unique<TraceSession>(result.base, v.present, v.past, v.offset_x, v.offset_y, core_of(t),
                                                 iw, ih, cfg);
    sessions[t]->run(seeds[t]);
  });

  // Handoff rounds: each crossing step is continued by the tile owning its
  // target, in a fixed order so results do not depend on thread timing.
  for (;;) {
    std::vector<std::vector<Handoff>> inbox(ntiles);
    bool any = false;
    for (std::size_t t = 0; t < ntiles; ++t) {
      for (const Handoff& h : sessions[t]->take_handoffs()) {
        inbox[owner(h.target)].push_back(h);
        any = true;
      }
    }
    if (!any) break;
    parallel_for(ntiles, tiling.threads, [&](std::size_t t) {
      for (const Handoff& h : inbox[t]) {
        if (sessions[t]->truncated()) break;
        if (const auto v = sessions[t]->accept_handoff(h)) sessions[t]->run({*v});
      }
    });
  }

  // Merge traced edges over the shared densified base.
  const std::size_t nbase = result.base.vertex_count();
  RoadGraph merged = result.base;
  VertexIndex index(1.0);
  for (std::size_t t = 0; t < ntiles; ++t) {
    const TraceSession& s = *sessions[t];
    const RoadGraph& tg = s.graph();
    std::vector<std::optional<std::size_t>> map(tg.vertex_count());
    auto resolve = [&](std::size_t v) {
      if (v < nbase) return v;
      if (!map[v]) map[v] = index.locate(merged, tg.vertex(v));
      return *map[v];
    };
    for (const Edge& e : tg.edges()) {
      if (e.base) continue;
      const std::size_t a = resolve(e.u);
      const std::size_t b = resolve(e.v);
      if (a != b) merged.try_add_edge(a, b, false);
    }
    result.steps += s.steps();
    result.truncated = result.truncated || s.truncated();
    result.log.insert(result.log.end(), s.log().begin(), s.log().end());
  }
  result.g_prime = std::move(merged);
  result.proposals = proposals_from_trace(result.g_prime, result.base, kind);
  return result;
}

// ---------------------------------------------------------------------------
// Command runners

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr const char* kTruncatedWarning = "tracing hit max_steps; proposals may be incomplete";

void require(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing input: ") + what);
}

RasterImage load_image(const std::string& path, double mpp) {
  return io::read_netpbm(path, GeoTransform(mpp, 0.0, 0.0));
}

ConfidenceTensor load_confidence(const std::string& path) {
  Tensor t = io::read_ctns(path);
  if (t.channels() != static_cast<std::uint32_t>(kNumDirections)) {
    throw io::FormatError(path + ": confidence tensor must have 64 channels");
  }
  if (!t.values_in_unit_interval()) throw io::FormatError(path + ": confidence values outside [0, 1]");
  return ConfidenceTensor(std::move(t));
}

RoadGraph load_base_graph(const std::string& path) {
  RoadGraph g = io::read_graph(path);
  if (g.empty()) throw std::invalid_argument("base graph required: " + path + " has no vertices");
  return g;
}

class RunWriter {
 public:
  RunWriter(const PipelineConfig& cfg, std::string command, const fs::path& out)
      : cfg_(cfg), out_(out) {
    summary_.command = std::move(command);
    fs::create_directories(out_);
  }

  fs::path path(const std::string& name) {
    summary_.outputs.push_back(name);
    return out_ / name;
  }
  void text(const std::string& name, const std::string& body) { io::write_text(path(name), body); }
  void warn(const std::string& w) { summary_.warnings.push_back(w); }
  const std::vector<std::string>& warnings() const { return summary_.warnings; }

  RunSummary finish(const std::vector<std::pair<std::string, std::string>>& inputs) {
    ojson m;
    m["command"] = summary_.command;
    m["version"] = kVersion;
    m["config_hash"] = cfg_.source.hash_hex();
    ojson c = ojson::object();
    for (const auto& [k, v] : cfg_.source.values()) c[k] = v;
    m["config"] = c;
    m["seed"] = cfg_.seed;
    ojson in = ojson::object();
    for (const auto& [k, v] : inputs) {
      if (!v.empty()) in[k] = v;
    }
    m["inputs"] = in;
    m["outputs"] = summary_.outputs;
    m["warnings"] = summary_.warnings;
    io::write_text(out_ / "manifest.json", m.dump(2) + "\n");
    summary_.outputs.push_back("manifest.json");
    return summary_;
  }

 private:
  const PipelineConfig& cfg_;
  fs::path out_;
  RunSummary summary_;
};

std::optional<GeoTransform> output_transform(const PipelineConfig& cfg) {
  if (cfg.scene_dir.empty()) return std::nullopt;
  const auto m = nlohmann::json::parse(io::read_text(fs::path(cfg.scene_dir) / "manifest.json"));
  const auto& t = m.at("transform");
  return GeoTransform(t.at("meters_per_pixel").get<double>(), t.at("origin").at(0).get<double>(),
                      t.at("origin").at(1).get<double>());
}

std::string pr_line(const PRPoint& p, bool has_threshold) {
  if (has_threshold) return to_json_line(p);
  auto j = ojson::parse(to_json_line(p));
  j["threshold"] = nullptr;
  return j.dump();
}

TraceResult run_tracing(const PipelineConfig& cfg) {
  require(cfg.graph, "graph");
  require(cfg.p_new, "p_new");
  require(cfg.p_old, "p_old");
  const RoadGraph g = load_base_graph(cfg.graph);
  const ConfidenceTensor p_new = load_confidence(cfg.p_new);
  const ConfidenceTensor p_old = load_confidence(cfg.p_old);
  TilingOptions tiling;
  tiling.tile_size = cfg.tile_size;
  tiling.threads = cfg.threads;
  tiling.parallel = cfg.parallel_tiles;
  return trace_tiled(g, p_new, p_old, cfg.tracing, tiling);
}

GroundTruthSet load_truth(const PipelineConfig& cfg) {
  GroundTruthSet truth;
  truth.proposals = io::read_proposals(cfg.truth);
  if (!cfg.allowlist.empty()) truth.allowlist = io::read_proposals(cfg.allowlist);
  return truth;
}

void write_trace_outputs(RunWriter& w, const PipelineConfig& cfg, const TraceResult& r,
                         const std::optional<GeoTransform>& xf) {
  io::write_graph(w.path("g_prime.geojson"), r.g_prime, xf);
  if (cfg.debug_log) {
    std::ostringstream log;
    write_decision_log(log, r.log);
    w.text("decisions.log", log.str());
  }
  if (r.truncated) w.warn(kTruncatedWarning);
}

std::vector<std::pair<std::string, std::string>> trace_inputs(const PipelineConfig& cfg) {
  return {{"graph", cfg.graph}, {"p_new", cfg.p_new}, {"p_old", cfg.p_old}};
}

}  // namespace

RunSummary run_synth(const PipelineConfig& cfg, const fs::path& out) {
  RunWriter w(cfg, "synth", out);
  const Scene scene = generate_scene(cfg.synth);
  write_scene(scene, out / "scene");
  for (const char* f : {"old.ppm", "new.ppm", "p_old.ctns", "p_new.ctns", "seg_old.ctns", "seg_new.ctns",
                        "base.geojson", "truth.geojson", "removed_truth.geojson", "building_truth.geojson",
                        "distractors.geojson", "manifest.json"}) {
    w.path(std::string("scene/") + f);
  }
  return w.finish({});
}

RunSummary run_trace(const PipelineConfig& cfg, const fs::path& out) {
  RunWriter w(cfg, "trace", out);
  const TraceResult r = run_tracing(cfg);
  const auto xf = output_transform(cfg);
  io::write_proposals(w.path("proposals.geojson"), r.proposals, xf);
  write_trace_outputs(w, cfg, r, xf);
  ojson rep;
  rep["config_hash"] = cfg.source.hash_hex();
  rep["mode"] = std::string(to_string(cfg.tracing.mode));
  rep["steps"] = r.steps;
  rep["truncated"] = r.truncated;
  rep["proposals"] = r.proposals.size();
  rep["warnings"] = w.warnings();
  w.text("report.json", rep.dump(2) + "\n");
  return w.finish(trace_inputs(cfg));
}

RunSummary run_filter(const PipelineConfig& cfg, const fs::path& out) {
  require(cfg.proposals, "proposals");
  require(cfg.old_image, "old_image");
  require(cfg.new_image, "new_image");
  RunWriter w(cfg, "filter", out);
  std::vector<Proposal> props = io::read_proposals(cfg.proposals);
  const RasterImage m_old = load_image(cfg.old_image, cfg.meters_per_pixel);
  const RasterImage m_new = load_image(cfg.new_image, cfg.meters_per_pixel);
  auto scorer = make_scorer(cfg.scorer);
  score_proposals(props, m_old, m_new, *scorer, cfg.filter);
  const FilterOutcome f = filter_proposals(props, cfg.filter.t_filter);
  const auto xf = output_transform(cfg);
  io::write_proposals(w.path("scored.geojson"), props, xf);
  io::write_proposals(w.path("proposals.geojson"), f.kept, xf);
  io::write_proposals(w.path("pruned.geojson"), f.pruned, xf);
  ojson rep;
  rep["config_hash"] = cfg.source.hash_hex();
  rep["t_filter"] = cfg.filter.t_filter;
  rep["scored"] = props.size();
  rep["kept"] = f.kept.size();
  rep["pruned"] = f.pruned.size();
  w.text("report.json", rep.dump(2) + "\n");
  return w.finish({{"proposals", cfg.proposals}, {"old_image", cfg.old_image}, {"new_image", cfg.new_image}});
}

RunSummary run_sample_pairs(const PipelineConfig& cfg, const fs::path& out) {
  require(cfg.graph, "graph");
  require(cfg.old_image, "old_image");
  require(cfg.new_image, "new_image");
  RunWriter w(cfg, "sample-pairs", out);
  const RoadGraph g = load_base_graph(cfg.graph);
  const RasterImage m_old = load_image(cfg.old_image, cfg.meters_per_pixel);
  const RasterImage m_new = load_image(cfg.new_image, cfg.meters_per_pixel);
  export_pair_dataset(g, m_old, m_new, cfg.filter, cfg.sample_count, cfg.seed, out / "dataset");
  w.path("dataset/index.jsonl");
  w.path("dataset/summary.json");
  return w.finish({{"graph", cfg.graph}, {"old_image", cfg.old_image}, {"new_image", cfg.new_image}});
}

RunSummary run_eval(const PipelineConfig& cfg, const fs::path& out) {
  const bool have_pr = !cfg.proposals.empty() || !cfg.truth.empty();
  const bool have_apls = !cfg.truth_graph.empty() || !cfg.prop_graph.empty();
  if (!have_pr && !have_apls) throw ConfigError("missing input: proposals and truth, or truth_graph and prop_graph");
  RunWriter w(cfg, "eval", out);
  if (have_pr) {
    require(cfg.proposals, "proposals");
    require(cfg.truth, "truth");
    const std::vector<Proposal> props = io::read_proposals(cfg.proposals);
    const GroundTruthSet truth = load_truth(cfg);
    const bool scored = !props.empty() && std::all_of(props.begin(), props.end(),
                                                      [](const Proposal& p) { return p.score.has_value(); });
    std::string lines;
    if (scored) {
      std::string csv = "threshold,precision,recall\n";
      for (const PRPoint& p : pr_curve(props, truth, cfg.thresholds)) {
        lines += to_json_line(p) + "\n";
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%.6g,%.6f,%.6f\n", p.threshold, p.precision, p.recall);
        csv += buf;
      }
      w.text("curve.csv", csv);
    } else {
      lines = pr_line(match_proposals(props, truth), false) + "\n";
    }
    w.text("report.jsonl", lines);
  }
  if (have_apls) {
    require(cfg.truth_graph, "truth_graph");
    require(cfg.prop_graph, "prop_graph");
    const RoadGraph gt = io::read_graph(cfg.truth_graph);
    const RoadGraph gp = io::read_graph(cfg.prop_graph);
    ojson a;
    a["apls"] = apls(gt, gp, cfg.apls);
    a["samples"] = cfg.apls.n_samples;
    a["snap_radius_m"] = cfg.apls.snap_radius_m;
    a["seed"] = cfg.apls.seed;
    w.text("apls.json", a.dump(2) + "\n");
  }
  return w.finish({{"proposals", cfg.proposals},
                   {"truth", cfg.truth},
                   {"allowlist", cfg.allowlist},
                   {"truth_graph", cfg.truth_graph},
                   {"prop_graph", cfg.prop_graph}});
}

RunSummary run_buildings(const PipelineConfig& cfg, const fs::path& out) {
  require(cfg.seg_old, "seg_old");
  require(cfg.seg_new, "seg_new");
  RunWriter w(cfg, "buildings", out);
  const GeoTransform gt(cfg.meters_per_pixel, 0.0, 0.0);
  const SegRaster s_old(io::read_ctns(cfg.seg_old), gt);
  const SegRaster s_new(io::read_ctns(cfg.seg_new), gt);
  const RasterImage change = compare_segmentation(s_old, s_new, cfg.seg_t_old, cfg.seg_t_new);
  RasterImage vis = change;
  for (auto& b : vis.data()) b = b ? 255 : 0;
  io::write_netpbm(w.path("change_mask.pgm"), vis);
  std::vector<Proposal> props = extract_polygons(change, cfg.min_area_m2, cfg.meters_per_pixel);
  const auto xf = output_transform(cfg);
  ojson rep;
  rep["config_hash"] = cfg.source.hash_hex();
  rep["candidates"] = props.size();
  if (!cfg.old_image.empty() && !cfg.new_image.empty()) {
    const RasterImage m_old = load_image(cfg.old_image, cfg.meters_per_pixel);
    const RasterImage m_new = load_image(cfg.new_image, cfg.meters_per_pixel);
    auto scorer = make_scorer(cfg.scorer);
    score_proposals(props, m_old, m_new, *scorer, cfg.filter);
    const FilterOutcome f = filter_proposals(props, cfg.building_t_filter);
    io::write_proposals(w.path("candidates.geojson"), props, xf);
    io::write_proposals(w.path("proposals.geojson"), f.kept, xf);
    rep["kept"] = f.kept.size();
    rep["t_filter"] = cfg.building_t_filter;
  } else {
    io::write_proposals(w.path("proposals.geojson"), props, xf);
    rep["kept"] = props.size();
  }
  w.text("report.json", rep.dump(2) + "\n");
  return w.finish({{"seg_old", cfg.seg_old},
                   {"seg_new", cfg.seg_new},
                   {"old_image", cfg.old_image},
                   {"new_image", cfg.new_image}});
}

RunSummary run_update(const PipelineConfig& cfg, const fs::path& out) {
  require(cfg.old_image, "old_image");
  require(cfg.new_image, "new_image");
  RunWriter w(cfg, "run", out);
  TraceResult r = run_tracing(cfg);
  const RasterImage m_old = load_image(cfg.old_image, cfg.meters_per_pixel);
  const RasterImage m_new = load_image(cfg.new_image, cfg.meters_per_pixel);
  auto scorer = make_scorer(cfg.scorer);
  score_proposals(r.proposals, m_old, m_new, *scorer, cfg.filter);
  const FilterOutcome f = filter_proposals(r.proposals, cfg.filter.t_filter);

  const auto xf = output_transform(cfg);
  io::write_proposals(w.path("candidates.geojson"), r.proposals, xf);
  io::write_proposals(w.path("proposals.geojson"), f.kept, xf);
  write_trace_outputs(w, cfg, r, xf);

  ojson rep;
  rep["config_hash"] = cfg.source.hash_hex();
  rep["mode"] = std::string(to_string(cfg.tracing.mode));
  rep["steps"] = r.steps;
  rep["truncated"] = r.truncated;
  rep["candidates"] = r.proposals.size();
  rep["kept"] = f.kept.size();
  rep["t_filter"] = cfg.filter.t_filter;
  if (!cfg.truth.empty()) {
    const GroundTruthSet truth = load_truth(cfg);
    PRPoint trace_pr = match_proposals(r.proposals, truth);
    PRPoint kept_pr = match_proposals(f.kept, truth);
    kept_pr.threshold = cfg.filter.t_filter;
    rep["trace"] = ojson::parse(pr_line(trace_pr, false));
    rep["filtered"] = ojson::parse(to_json_line(kept_pr));
    w.text("report.jsonl", to_json_line(kept_pr) + "\n");
  }
  rep["warnings"] = w.warnings();
  w.text("report.json", rep.dump(2) + "\n");
  auto inputs = trace_inputs(cfg);
  inputs.insert(inputs.end(), {{"old_image", cfg.old_image}, {"new_image", cfg.new_image}, {"truth", cfg.truth}});
  return w.finish(inputs);
}

}  // namespace mapupdate
