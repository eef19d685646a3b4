#pragma once

// Synthetic scenes with known ground truth: a base road grid with dead-end
// stubs, planted new / removed roads and distractor paths continuing those
// stubs, optional buildings, paired imagery and oracle confidence tensors.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mapupdate/buildings.hpp"
#include "mapupdate/core.hpp"
#include "mapupdate/evaluation.hpp"
#include "mapupdate/graph_ops.hpp"

namespace mapupdate {

struct SceneParams {
  int size_px = 1024;
  double meters_per_pixel = kDefaultMetersPerPixel;
  int scale_factor = kDefaultScaleFactor;
  double grid_spacing_m = 200.0;  // road density
  double grid_jitter_m = 20.0;
  int n_new = 3;
  int n_distractors = 5;
  int n_removed = 0;
  int n_buildings = 0;      // present in both epochs
  int n_new_buildings = 0;  // new epoch only
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  double min_length_m = 50.0;
  double max_length_m = 120.0;
  double sigma_m = 8.0;          // confidence ridge width
  double window_channels = 2.0;  // angular window half-width, in channels
  double road_width_m = 8.0;
  double start_gap_m = 3.0;      // planted road starts this far past its stub
  double end_margin_m = 4.0;     // no forward confidence this close to a dead end

  void validate() const;
};

// A planted straight road: start/end in image pixels, plus the dead-end
// stub of the base graph it continues.
struct PlantedRoad {
  Vec2 start;
  Vec2 end;
  Vec2 stub_root;
  Vec2 stub_end;
};

struct BuildingRect {
  int x0 = 0;  // inclusive pixel bounds
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  Ring ring() const;
};

struct Scene {
  SceneParams params;
  RoadGraph base_graph;
  // All planted segments, one edge each; selections below index into it.
  RoadGraph planted;
  std::vector<SubgraphSelection> new_roads;
  std::vector<SubgraphSelection> distractors;
  std::vector<SubgraphSelection> removed_roads;
  std::vector<PlantedRoad> new_road_geometry;
  std::vector<PlantedRoad> distractor_geometry;
  std::vector<PlantedRoad> removed_geometry;
  std::vector<BuildingRect> buildings;
  std::vector<BuildingRect> new_buildings;
  RasterImage m_old;
  RasterImage m_new;
  ConfidenceTensor p_old;
  ConfidenceTensor p_new;
  SegRaster seg_old;
  SegRaster seg_new;
  GeoTransform transform;
  std::uint64_t seed = 0;
};

Scene generate_scene(const SceneParams& params);

// One new-road proposal per planted new road, bbox tight.
GroundTruthSet scene_ground_truth(const Scene& scene);
GroundTruthSet scene_removed_truth(const Scene& scene);
GroundTruthSet scene_building_truth(const Scene& scene);
// Distractor paths wrapped as proposals (for false-positive accounting).
std::vector<Proposal> scene_distractor_proposals(const Scene& scene);

// Oracle confidence value of one channel at an image position, before
// noise, given the segments rendered into a tensor.
struct RenderSegment {
  Vec2 a;
  Vec2 b;
};
double oracle_confidence(const std::vector<RenderSegment>& segments, Vec2 p, int k, const SceneParams& params);
// Segments rendered into each epoch.
std::vector<RenderSegment> scene_segments(const Scene& scene, bool new_epoch);

// Writes old.ppm, new.ppm, p_old.ctns, p_new.ctns, seg_old.ctns,
// seg_new.ctns, base.geojson, truth.geojson, removed_truth.geojson,
// building_truth.geojson, distractors.geojson and manifest.json.
void write_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace mapupdate
