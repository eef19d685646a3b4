#pragma once

// Self-supervised change filtering: road masks, matching/mismatched training
// pair generation, and per-proposal change scores.
//
// Score convention: a proposal's score is the mask-averaged MATCHING
// probability. A genuine change "fools" the classifier into a low matching
// probability, so proposals with score < t_filter are kept.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mapupdate/core.hpp"
#include "mapupdate/graph_ops.hpp"
#include "mapupdate/scorer.hpp"

namespace mapupdate {

struct FilterConfig {
  double mask_buffer_m = 20.0;
  double pad_m = 20.0;
  double building_pad_m = 20.0;
  double t_filter = 0.975;
  double t_box_min_m = 50.0;
  double t_box_max_m = 150.0;
  double mismatch_max_dist_m = 2500.0;
  int window_px = 512;
  double p_matching = 0.5;
  double p_random_window = 0.2;  // among matching examples
  double meters_per_pixel = kDefaultMetersPerPixel;
  int max_attempts = 200;

  void validate() const;
};

enum class PairLabel { Matching, Mismatched };
enum class PairProvenance { SameWindow, RandomWindow, DisjointWindow };

std::string_view to_string(PairLabel l);
std::string_view to_string(PairProvenance p);

struct PairExample {
  RasterImage crop_old;
  RasterImage crop_new;
  RasterImage mask;
  PairLabel label = PairLabel::Matching;
  PairProvenance provenance = PairProvenance::SameWindow;
  PixelWindow window_old;
  PixelWindow window_new;
  PixelWindow window_mask;  // window the mask was rasterised over
  std::size_t v0 = 0;
  double t_box_m = 0.0;
};

// 1-channel {0,1} raster over `window`: 1 where the pixel centre lies within
// buffer_m of a selected edge.
RasterImage mask_from_subgraph(const RoadGraph& g, const SubgraphSelection& sel, const PixelWindow& window,
                               double buffer_m, double meters_per_pixel);
RasterImage mask_from_graph(const RoadGraph& g, const PixelWindow& window, double buffer_m, double meters_per_pixel);

// Zeroes every crop pixel where the mask is 0.
void apply_mask(RasterImage& crop, const RasterImage& mask);

PairExample sample_training_pair(const RoadGraph& g, const RasterImage& m_old, const RasterImage& m_new,
                                 const FilterConfig& cfg, std::mt19937_64& rng);
PairExample sample_training_pair(const RoadGraph& g, const RasterImage& m_old, const RasterImage& m_new,
                                 const FilterConfig& cfg, std::uint64_t seed);

struct DatasetSummary {
  std::size_t count = 0;
  std::size_t matching = 0;
  std::size_t mismatched = 0;
  std::size_t random_window = 0;
};

// Writes example_NNNNNN.ctns (7 channels) files, index.jsonl and
// summary.json into `dir`.
DatasetSummary export_pair_dataset(const RoadGraph& g, const RasterImage& m_old, const RasterImage& m_new,
                                   const FilterConfig& cfg, std::size_t count, std::uint64_t seed,
                                   const std::filesystem::path& dir);

// Scoring window: proposal bbox padded by pad_m, clipped to the imagery.
PixelWindow scoring_window(const Proposal& prop, const FilterConfig& cfg, int image_width, int image_height);
RasterImage proposal_mask(const Proposal& prop, const PixelWindow& window, const FilterConfig& cfg);

// Mean matching probability over mask pixels. Throws std::invalid_argument
// for an all-zero mask.
double score_proposal(const Proposal& prop, const RasterImage& m_old, const RasterImage& m_new, Scorer& scorer,
                      const FilterConfig& cfg);
void score_proposals(std::vector<Proposal>& props, const RasterImage& m_old, const RasterImage& m_new,
                     Scorer& scorer, const FilterConfig& cfg);

struct FilterOutcome {
  std::vector<Proposal> kept;
  std::vector<Proposal> pruned;
};

// Keeps proposals with score < t_filter (t_filter clamped to [0, 1]).
// Every proposal must carry a score.
FilterOutcome filter_proposals(const std::vector<Proposal>& props, double t_filter);

}  // namespace mapupdate
