#pragma once

// Proposal-level precision/recall by bounding-box intersection, and APLS
// for geometric accuracy of road graphs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mapupdate/core.hpp"

namespace mapupdate {

struct GroundTruthSet {
  std::vector<Proposal> proposals;
  // Known-correct changes that are not labelled; proposals matching only
  // these are left out of the precision denominator.
  std::vector<Proposal> allowlist;
};

struct PRPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  std::size_t matched_proposals = 0;  // proposals hitting >= 1 ground truth
  std::size_t matched_truth = 0;      // ground truths hit by >= 1 proposal
  std::size_t discarded = 0;
  std::size_t num_proposals = 0;      // |P| after discards
  std::size_t num_truth = 0;
};

std::string to_json_line(const PRPoint& p);

PRPoint match_proposals(const std::vector<Proposal>& props, const GroundTruthSet& truth);

// filter_proposals then match_proposals per threshold.
std::vector<PRPoint> pr_curve(const std::vector<Proposal>& scored, const GroundTruthSet& truth,
                              const std::vector<double>& thresholds);

struct AplsOptions {
  double snap_radius_m = 25.0;
  std::size_t n_samples = 500;
  std::uint64_t seed = 0;
  double meters_per_pixel = kDefaultMetersPerPixel;
};

// Symmetrised path-length similarity in [0, 1]. The truth-side term samples
// connected vertex pairs of g_truth; the proposal-side term samples vertex
// pairs of g_prop and skips those that snap to one truth vertex or to
// disconnected truth vertices. A pair whose endpoints do not snap scores 0.
// Throws std::invalid_argument when g_truth has no vertices.
double apls(const RoadGraph& g_truth, const RoadGraph& g_prop, const AplsOptions& opts = {});

// Dijkstra path length in pixels; +inf when disconnected.
double shortest_path_length(const RoadGraph& g, std::size_t from, std::size_t to);

}  // namespace mapupdate
