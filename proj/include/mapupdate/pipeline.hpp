#pragma once

// Orchestration: configuration, tiled tracing with cross-tile merge, and the
// command runners behind the CLI. Every runner writes into an output
// directory and leaves a manifest.json there.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mapupdate/change_filter.hpp"
#include "mapupdate/evaluation.hpp"
#include "mapupdate/scorer.hpp"
#include "mapupdate/synth.hpp"
#include "mapupdate/tracing.hpp"

namespace mapupdate {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key=value text with [section] headers; keys are stored as
// "section.key". '#' and ';' start comments.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  // Sorted "key=value" lines; the hash is FNV-1a 64 over this text.
  std::string canonical() const;
  std::uint64_t hash() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> values_;
};

// Rejects keys outside the known set.
void validate_config_keys(const Config& cfg);

struct PipelineConfig {
  // Inputs.
  std::string scene_dir;
  std::string graph;
  std::string old_image;
  std::string new_image;
  std::string p_old;
  std::string p_new;
  std::string seg_old;
  std::string seg_new;
  std::string proposals;
  std::string truth;
  std::string allowlist;
  std::string truth_graph;
  std::string prop_graph;

  TracingConfig tracing;
  FilterConfig filter;
  AplsOptions apls;
  std::vector<double> thresholds;
  SceneParams synth;
  double seg_t_old = 0.5;
  double seg_t_new = 0.5;
  double min_area_m2 = 25.0;
  // Footprints cover little of their padded mask, so building scores sit
  // closer to 1 than road scores.
  double building_t_filter = 0.985;
  std::size_t sample_count = 1000;

  int tile_size = 512;
  int threads = 0;  // 0: hardware concurrency
  bool parallel_tiles = false;
  std::string scorer = "mock";
  bool debug_log = false;
  double meters_per_pixel = kDefaultMetersPerPixel;
  std::uint64_t seed = 0;

  Config source;

  static PipelineConfig from_config(const Config& cfg);
  void validate() const;
};

std::unique_ptr<Scorer> make_scorer(const std::string& spec);

struct TilingOptions {
  int tile_size = 512;
  double halo_fraction = 0.1;
  int threads = 0;
  // false: one DFS over tile-sized confidence crops, identical to an untiled
  // trace. true: tiles traced concurrently; where two traced roads meet near
  // a tile border the merged geometry may differ from the untiled trace.
  bool parallel = false;
};

// Sequential mode runs the DFS over confidence crops fetched per tile.
// Parallel mode traces each tile's seeds inside its own window, passes steps
// that cross a tile border to the owning tile, then merges all traced edges
// (vertices within 1 px unified). Both split the result into proposals.
TraceResult trace_tiled(const RoadGraph& g, const ConfidenceTensor& p_new, const ConfidenceTensor& p_old,
                        const TracingConfig& cfg, const TilingOptions& tiling);

struct RunSummary {
  std::string command;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
};

RunSummary run_synth(const PipelineConfig& cfg, const std::filesystem::path& out);
RunSummary run_trace(const PipelineConfig& cfg, const std::filesystem::path& out);
RunSummary run_filter(const PipelineConfig& cfg, const std::filesystem::path& out);
RunSummary run_sample_pairs(const PipelineConfig& cfg, const std::filesystem::path& out);
RunSummary run_eval(const PipelineConfig& cfg, const std::filesystem::path& out);
RunSummary run_buildings(const PipelineConfig& cfg, const std::filesystem::path& out);
// trace -> score -> filter -> (evaluate when truth is given).
RunSummary run_update(const PipelineConfig& cfg, const std::filesystem::path& out);

}  // namespace mapupdate
