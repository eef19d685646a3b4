#pragma once

// Change-seeking iterative tracing: a depth-first search from the densified
// base map that extends roads only along directions with high confidence in
// the "present" tensor and low confidence in the "past" tensor.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mapupdate/core.hpp"
#include "mapupdate/graph_ops.hpp"

namespace mapupdate {

enum class TraceMode { Forward, Reverse };

std::string_view to_string(TraceMode m);
TraceMode trace_mode_from_string(std::string_view s);

struct TracingConfig {
  double t_new = 0.4;
  double t_old = 0.4;
  double step_length_m = 10.0;
  double densify_spacing_m = 10.0;
  double min_angular_sep = kTwoPi / 12.0;  // 30 degrees
  // Step targets within this fraction of step_length of an existing vertex
  // attach to that vertex.
  double snap_fraction = 0.5;
  std::size_t max_steps = 2'000'000;
  TraceMode mode = TraceMode::Forward;
  // false: gate on the present tensor only (plain, non-comparative tracing).
  bool compare_old = true;
  double meters_per_pixel = kDefaultMetersPerPixel;
  bool record_log = false;

  void validate() const;
};

// Bilinear sample of channel k at image position (i, j). Confidence pixel c
// is centred on image coordinate c*s + (s-1)/2; lookups clamp to the tensor.
// Throws std::invalid_argument outside [0, width*s - 1] x [0, height*s - 1].
double sample_confidence(const ConfidenceTensor& p, double i, double j, int k);

enum class TraceAction {
  Extend,       // new vertex created and pushed
  Snap,         // edge attached to an existing vertex
  PopGate,      // best direction failed a confidence gate
  PopNoChannel, // every direction within min_angular_sep of an existing edge
  PopExtent,    // step target outside the traced extent
  PopConflict,  // snap target rejected (duplicate edge or angular clash)
  Handoff,      // target outside the tile window; decided by the owning tile
};

std::string_view to_string(TraceAction a);

// One DFS decision. For Extend/Snap, `target` is the new edge's far end; for
// Handoff it is the step target passed to the neighbouring tile.
struct TraceDecision {
  double i = 0.0;
  double j = 0.0;
  int k = -1;
  double p_new = 0.0;
  double p_old = 0.0;
  TraceAction action = TraceAction::PopGate;
  Vec2 target{};
};

// Writes "i,j,k,p_new,p_old,action[,target_i,target_j]" lines.
void write_decision_log(std::ostream& out, const std::vector<TraceDecision>& log);
std::vector<TraceDecision> read_decision_log(std::istream& in);

struct TraceResult {
  RoadGraph base;    // densified input graph (vertex prefix of g_prime)
  RoadGraph g_prime; // base plus traced additions
  std::vector<Proposal> proposals;
  std::vector<TraceDecision> log;
  std::size_t steps = 0;
  bool truncated = false;
};

// Wraps each connected component of g_prime - base as an unscored proposal.
std::vector<Proposal> proposals_from_trace(const RoadGraph& g_prime, const RoadGraph& base, ProposalKind kind);

TraceResult trace_changes(const RoadGraph& g, const ConfidenceTensor& p_new, const ConfidenceTensor& p_old,
                          const TracingConfig& cfg);

// ---------------------------------------------------------------------------
// Windowed tracing, used for tiled processing. A session owns a graph and
// traces from given stack seeds, reading confidences only inside its window.
// Steps that leave the window without snapping inside it are recorded as
// handoffs; the tile owning the target adds the edge.

struct Handoff {
  Vec2 origin;
  Vec2 target;
  int k = -1;
  double p_new = 0.0;
  double p_old = 0.0;
};

// Where to read confidences for a vertex: a present/past crop pair and the
// crop's offset in confidence pixels.
struct ConfidenceView {
  std::shared_ptr<const ConfidenceTensor> present;
  std::shared_ptr<const ConfidenceTensor> past;
  int offset_x = 0;
  int offset_y = 0;
};
using ConfidenceResolver = std::function<ConfidenceView(Vec2)>;

class TraceSession {
 public:
  // `present` drives extension; `past` is the comparison tensor. Both are
  // crops whose pixel (0, 0) sits at confidence pixel `offset_*` of the full
  // tensor. `window` is in image pixels; `image_width/height` bound targets.
  TraceSession(RoadGraph graph, std::shared_ptr<const ConfidenceTensor> present,
               std::shared_ptr<const ConfidenceTensor> past, int offset_x, int offset_y, PixelWindow window,
               int image_width, int image_height, const TracingConfig& cfg);
  // Whole-image session that asks `resolver` for the crops covering each
  // vertex it expands.
  TraceSession(RoadGraph graph, ConfidenceResolver resolver, int image_width, int image_height,
               const TracingConfig& cfg);

  // Runs the DFS from the given stack (last element explored first).
  void run(std::vector<std::size_t> stack);
  // Snaps or extends an incoming handoff step. Returns the new vertex to
  // explore, or nothing after a snap or a conflict.
  std::optional<std::size_t> accept_handoff(const Handoff& h);

  const RoadGraph& graph() const { return graph_; }
  RoadGraph take_graph() { return std::move(graph_); }
  const std::vector<TraceDecision>& log() const { return log_; }
  std::vector<Handoff> take_handoffs() { return std::exchange(handoffs_, {}); }
  std::size_t steps() const { return steps_; }
  bool truncated() const { return truncated_; }

 private:
  ConfidenceView view_at(Vec2 p) const;
  static double sample(const ConfidenceTensor& t, const ConfidenceView& view, Vec2 p, int k);
  bool in_window(Vec2 p) const;
  bool in_image(Vec2 p) const;
  std::optional<std::size_t> find_near(Vec2 p, double radius) const;
  std::size_t add_vertex(Vec2 p);
  bool separated(std::size_t v, double angle) const;
  std::vector<double> taken_angles(std::size_t v) const;
  // Snap attempt from v towards target; nullopt when nothing is in range.
  std::optional<TraceAction> try_snap(std::size_t v, Vec2 target, TraceDecision& d);

  RoadGraph graph_;
  std::shared_ptr<const ConfidenceTensor> present_;
  std::shared_ptr<const ConfidenceTensor> past_;
  ConfidenceResolver resolver_;
  int offset_x_;
  int offset_y_;
  PixelWindow window_;
  int image_width_;
  int image_height_;
  TracingConfig cfg_;
  double step_px_;
  double cell_px_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
  std::vector<TraceDecision> log_;
  std::vector<Handoff> handoffs_;
  // Directions already handed off, per vertex; they count as edges.
  std::unordered_map<std::size_t, std::vector<double>> reserved_;
  std::size_t steps_ = 0;
  bool truncated_ = false;
};

// Crops a confidence tensor to cover an image window plus a margin wide
// enough that bilinear lookups inside the window match the full tensor.
// Returns the crop and its offset in confidence pixels.
struct ConfidenceCrop {
  ConfidenceTensor tensor;
  int offset_x = 0;
  int offset_y = 0;
};
ConfidenceCrop crop_confidence(const ConfidenceTensor& p, const PixelWindow& image_window);

}  // namespace mapupdate
