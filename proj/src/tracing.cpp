#include "mapupdate/tracing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace mapupdate {

namespace {

long long bucket_key(long x, long y) { return (static_cast<long long>(x) << 32) ^ (y & 0xffffffffLL); }

double bilinear(const ConfidenceTensor& t, double u, double v, int k) {
  const int w = static_cast<int>(t.width());
  const int h = static_cast<int>(t.height());
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const double au = u - fu;
  const double av = v - fv;
  const int x0 = std::clamp(static_cast<int>(fu), 0, w - 1);
  const int x1 = std::clamp(static_cast<int>(fu) + 1, 0, w - 1);
  const int y0 = std::clamp(static_cast<int>(fv), 0, h - 1);
  const int y1 = std::clamp(static_cast<int>(fv) + 1, 0, h - 1);
  auto val = [&](int x, int y) {
    return static_cast<double>(t.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), k));
  };
  const double top = val(x0, y0) * (1.0 - au) + val(x1, y0) * au;
  const double bottom = val(x0, y1) * (1.0 - au) + val(x1, y1) * au;
  return top * (1.0 - av) + bottom * av;
}

// Image coordinate -> confidence coordinate.
double to_conf(double x, std::uint32_t scale) { return (x + 0.5) / scale - 0.5; }

}  // namespace

std::string_view to_string(TraceMode m) { return m == TraceMode::Forward ? "forward" : "reverse"; }

TraceMode trace_mode_from_string(std::string_view s) {
  if (s == "forward") return TraceMode::Forward;
  if (s == "reverse") return TraceMode::Reverse;
  throw std::invalid_argument("mode must be forward or reverse");
}

void TracingConfig::validate() const {
  if (!(t_new >= 0.0 && t_new <= 1.0)) throw std::invalid_argument("t_new must lie in [0, 1]");
  if (!(t_old >= 0.0 && t_old <= 1.0)) throw std::invalid_argument("t_old must lie in [0, 1]");
  if (!(step_length_m > 0.0)) throw std::invalid_argument("step_length must be positive");
  if (!(densify_spacing_m > 0.0)) throw std::invalid_argument("densify spacing must be positive");
  if (!(min_angular_sep > 0.0 && min_angular_sep < std::numbers::pi)) {
    throw std::invalid_argument("min_angular_sep must lie in (0, pi)");
  }
  if (!(snap_fraction >= 0.0 && snap_fraction < 1.0)) throw std::invalid_argument("snap_fraction must lie in [0, 1)");
  if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  if (!(meters_per_pixel > 0.0)) throw std::invalid_argument("meters_per_pixel must be positive");
}

double sample_confidence(const ConfidenceTensor& p, double i, double j, int k) {
  if (k < 0 || k >= kNumDirections) throw std::invalid_argument("channel out of range");
  if (!(i >= 0.0 && j >= 0.0 && i <= p.image_width() - 1.0 && j <= p.image_height() - 1.0)) {
    throw std::invalid_argument("sample position outside the tensor extent");
  }
  return bilinear(p, to_conf(i, p.scale_factor()), to_conf(j, p.scale_factor()), k);
}

std::string_view to_string(TraceAction a) {
  switch (a) {
    case TraceAction::Extend: return "extend";
    case TraceAction::Snap: return "snap";
    case TraceAction::PopGate: return "pop-gate";
    case TraceAction::PopNoChannel: return "pop-no-channel";
    case TraceAction::PopExtent: return "pop-extent";
    case TraceAction::PopConflict: return "pop-conflict";
    case TraceAction::Handoff: return "handoff";
  }
  return "pop-gate";
}

namespace {

TraceAction trace_action_from_string(std::string_view s) {
  for (TraceAction a : {TraceAction::Extend, TraceAction::Snap, TraceAction::PopGate, TraceAction::PopNoChannel,
                        TraceAction::PopExtent, TraceAction::PopConflict, TraceAction::Handoff}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown trace action: " + std::string(s));
}

bool has_target(TraceAction a) {
  return a == TraceAction::Extend || a == TraceAction::Snap || a == TraceAction::Handoff;
}

}  // namespace

void write_decision_log(std::ostream& out, const std::vector<TraceDecision>& log) {
  const auto old_precision = out.precision(17);
  for (const TraceDecision& d : log) {
    out << d.i << ',' << d.j << ',' << d.k << ',' << d.p_new << ',' << d.p_old << ',' << to_string(d.action);
    if (has_target(d.action)) out << ',' << d.target.i << ',' << d.target.j;
    out << '\n';
  }
  out.precision(old_precision);
}

std::vector<TraceDecision> read_decision_log(std::istream& in) {
  std::vector<TraceDecision> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 6 && fields.size() != 8) throw std::invalid_argument("malformed decision log line: " + line);
    TraceDecision d;
    d.i = std::stod(fields[0]);
    d.j = std::stod(fields[1]);
    d.k = std::stoi(fields[2]);
    d.p_new = std::stod(fields[3]);
    d.p_old = std::stod(fields[4]);
    d.action = trace_action_from_string(fields[5]);
    if (fields.size() == 8) d.target = {std::stod(fields[6]), std::stod(fields[7])};
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------

TraceSession::TraceSession(RoadGraph graph, std::shared_ptr<const ConfidenceTensor> present,
                           std::shared_ptr<const ConfidenceTensor> past, int offset_x, int offset_y,
                           PixelWindow window, int image_width, int image_height, const TracingConfig& cfg)
    : graph_(std::move(graph)),
      present_(std::move(present)),
      past_(std::move(past)),
      offset_x_(offset_x),
      offset_y_(offset_y),
      window_(window),
      image_width_(image_width),
      image_height_(image_height),
      cfg_(cfg) {
  cfg_.validate();
  step_px_ = m_to_px(cfg_.step_length_m, cfg_.meters_per_pixel);
  cell_px_ = std::max(step_px_, 1.0);
  for (std::size_t v = 0; v < graph_.vertex_count(); ++v) {
    const Vec2 p = graph_.vertex(v);
    buckets_[bucket_key(static_cast<long>(std::floor(p.i / cell_px_)), static_cast<long>(std::floor(p.j / cell_px_)))]
        .push_back(v);
  }
}

TraceSession::TraceSession(RoadGraph graph, ConfidenceResolver resolver, int image_width, int image_height,
                           const TracingConfig& cfg)
    : TraceSession(std::move(graph), nullptr, nullptr, 0, 0, PixelWindow{0, 0, image_width, image_height}, image_width,
                   image_height, cfg) {
  resolver_ = std::move(resolver);
}

ConfidenceView TraceSession::view_at(Vec2 p) const {
  if (resolver_) return resolver_(p);
  return {present_, past_, offset_x_, offset_y_};
}

double TraceSession::sample(const ConfidenceTensor& t, const ConfidenceView& view, Vec2 p, int k) {
  const std::uint32_t s = t.scale_factor();
  return bilinear(t, to_conf(p.i, s) - view.offset_x, to_conf(p.j, s) - view.offset_y, k);
}

bool TraceSession::in_window(Vec2 p) const {
  return p.i >= window_.x0 - 0.5 && p.i < window_.x0 + window_.width - 0.5 && p.j >= window_.y0 - 0.5 &&
         p.j < window_.y0 + window_.height - 0.5;
}

bool TraceSession::in_image(Vec2 p) const {
  return p.i >= 0.0 && p.j >= 0.0 && p.i <= image_width_ - 1.0 && p.j <= image_height_ - 1.0;
}

std::optional<std::size_t> TraceSession::find_near(Vec2 p, double radius) const {
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  const long cx0 = static_cast<long>(std::floor((p.i - radius) / cell_px_));
  const long cx1 = static_cast<long>(std::floor((p.i + radius) / cell_px_));
  const long cy0 = static_cast<long>(std::floor((p.j - radius) / cell_px_));
  const long cy1 = static_cast<long>(std::floor((p.j + radius) / cell_px_));
  for (long cy = cy0; cy <= cy1; ++cy) {
    for (long cx = cx0; cx <= cx1; ++cx) {
      const auto it = buckets_.find(bucket_key(cx, cy));
      if (it == buckets_.end()) continue;
      for (std::size_t v : it->second) {
        const double d = distance(p, graph_.vertex(v));
        if (d <= radius && (d < best_d || (d == best_d && best && v < *best))) {
          best_d = d;
          best = v;
        }
      }
    }
  }
  return best;
}

std::size_t TraceSession::add_vertex(Vec2 p) {
  const std::size_t v = graph_.add_vertex(p, false);
  buckets_[bucket_key(static_cast<long>(std::floor(p.i / cell_px_)), static_cast<long>(std::floor(p.j / cell_px_)))]
      .push_back(v);
  return v;
}

std::vector<double> TraceSession::taken_angles(std::size_t v) const {
  std::vector<double> out = edge_angles_at(graph_, v);
  if (const auto it = reserved_.find(v); it != reserved_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  return out;
}

bool TraceSession::separated(std::size_t v, double angle) const {
  for (double a : taken_angles(v)) {
    if (angular_distance(a, angle) < cfg_.min_angular_sep) return false;
  }
  return true;
}

std::optional<TraceAction> TraceSession::try_snap(std::size_t v, Vec2 target, TraceDecision& d) {
  const double snap_px = cfg_.snap_fraction * step_px_;
  if (!(snap_px > 0.0)) return std::nullopt;
  const auto near = find_near(target, snap_px);
  if (!near) return std::nullopt;
  const Vec2 p = graph_.vertex(v);
  const Vec2 q = graph_.vertex(*near);
  d.target = q;
  if (graph_.has_edge(v, *near) || !separated(v, std::atan2(q.j - p.j, q.i - p.i)) ||
      !separated(*near, std::atan2(p.j - q.j, p.i - q.i))) {
    return TraceAction::PopConflict;
  }
  graph_.add_edge(v, *near, false);
  return TraceAction::Snap;
}

void TraceSession::run(std::vector<std::size_t> stack) {
  auto record = [&](const TraceDecision& d) {
    if (cfg_.record_log) log_.push_back(d);
  };

  while (!stack.empty()) {
    if (steps_ >= cfg_.max_steps) {
      truncated_ = true;
      return;
    }
    ++steps_;
    const std::size_t v = stack.back();
    const Vec2 p = graph_.vertex(v);
    const std::vector<double> existing = taken_angles(v);
    const ConfidenceView view = view_at(p);

    int best_k = -1;
    double best = -1.0;
    for (int k = 0; k < kNumDirections; ++k) {
      const double a = angle_center(k);
      const bool clear = std::all_of(existing.begin(), existing.end(),
                                     [&](double e) { return angular_distance(a, e) >= cfg_.min_angular_sep; });
      if (!clear) continue;
      const double val = sample(*view.present, view, p, k);
      if (val > best) {
        best = val;
        best_k = k;
      }
    }

    TraceDecision d{p.i, p.j, best_k, 0.0, 0.0, TraceAction::PopNoChannel, {}};
    if (best_k < 0) {
      record(d);
      stack.pop_back();
      continue;
    }
    d.p_new = best;
    d.p_old = sample(*view.past, view, p, best_k);
    const bool gate = d.p_new >= cfg_.t_new && (!cfg_.compare_old || d.p_old < cfg_.t_old);
    if (!gate) {
      d.action = TraceAction::PopGate;
      record(d);
      stack.pop_back();
      continue;
    }

    const double alpha = angle_center(best_k);
    const Vec2 target{p.i + step_px_ * std::cos(alpha), p.j + step_px_ * std::sin(alpha)};
    if (!in_image(target)) {
      d.action = TraceAction::PopExtent;
      record(d);
      stack.pop_back();
      continue;
    }

    if (const auto snapped = try_snap(v, target, d)) {
      d.action = *snapped;
      record(d);
      if (d.action == TraceAction::PopConflict) stack.pop_back();
      continue;
    }

    d.target = target;
    if (!in_window(target)) {
      d.action = TraceAction::Handoff;
      handoffs_.push_back({p, target, best_k, d.p_new, d.p_old});
      reserved_[v].push_back(alpha);
      record(d);
      continue;
    }
    const std::size_t w = add_vertex(target);
    graph_.add_edge(v, w, false);
    d.action = TraceAction::Extend;
    record(d);
    stack.push_back(w);
  }
}

std::optional<std::size_t> TraceSession::accept_handoff(const Handoff& h) {
  std::size_t origin = 0;
  if (const auto v = find_near(h.origin, 0.0)) {
    origin = *v;
  } else {
    origin = add_vertex(h.origin);
  }
  TraceDecision d{h.origin.i, h.origin.j, h.k, h.p_new, h.p_old, TraceAction::Extend, h.target};
  if (const auto snapped = try_snap(origin, h.target, d)) {
    d.action = *snapped;
    if (cfg_.record_log) log_.push_back(d);
    return std::nullopt;
  }
  const std::size_t w = add_vertex(h.target);
  graph_.add_edge(origin, w, false);
  if (cfg_.record_log) log_.push_back(d);
  return w;
}

// ---------------------------------------------------------------------------

ConfidenceCrop crop_confidence(const ConfidenceTensor& p, const PixelWindow& image_window) {
  const std::uint32_t s = p.scale_factor();
  const int w = static_cast<int>(p.width());
  const int h = static_cast<int>(p.height());
  const int cx0 = std::clamp(static_cast<int>(std::floor(to_conf(image_window.x0 - 0.5, s))) - 1, 0, w - 1);
  const int cy0 = std::clamp(static_cast<int>(std::floor(to_conf(image_window.y0 - 0.5, s))) - 1, 0, h - 1);
  const int cx1 =
      std::clamp(static_cast<int>(std::floor(to_conf(image_window.x0 + image_window.width - 0.5, s))) + 2, 0, w - 1);
  const int cy1 =
      std::clamp(static_cast<int>(std::floor(to_conf(image_window.y0 + image_window.height - 0.5, s))) + 2, 0, h - 1);
  const auto cw = static_cast<std::uint32_t>(cx1 - cx0 + 1);
  const auto ch = static_cast<std::uint32_t>(cy1 - cy0 + 1);
  Tensor t(ch, cw, kNumDirections, s);
  for (std::uint32_t y = 0; y < ch; ++y) {
    const auto src = p.tensor().data().subspan(p.tensor().index(static_cast<std::uint32_t>(cy0) + y,
                                                                static_cast<std::uint32_t>(cx0), 0),
                                               static_cast<std::size_t>(cw) * kNumDirections);
    std::copy(src.begin(), src.end(), t.data().begin() + static_cast<std::ptrdiff_t>(t.index(y, 0, 0)));
  }
  return {ConfidenceTensor(std::move(t)), cx0, cy0};
}

std::vector<Proposal> proposals_from_trace(const RoadGraph& g_prime, const RoadGraph& base, ProposalKind kind) {
  std::vector<Proposal> out;
  for (const SubgraphSelection& sel : connected_components_of_difference(g_prime, base)) {
    Proposal p;
    p.kind = kind;
    p.road = extract_subgraph(g_prime, sel);
    p.bbox = sel.bbox;
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

RoadGraph as_base(const RoadGraph& g) {
  RoadGraph out;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) out.add_vertex(g.vertex(v), true);
  for (const Edge& e : g.edges()) out.add_edge(e.u, e.v, true);
  return out;
}

}  // namespace

TraceResult trace_changes(const RoadGraph& g, const ConfidenceTensor& p_new, const ConfidenceTensor& p_old,
                          const TracingConfig& cfg) {
  cfg.validate();
  if (p_new.height() != p_old.height() || p_new.width() != p_old.width() ||
      p_new.scale_factor() != p_old.scale_factor()) {
    throw std::invalid_argument("confidence tensors have mismatched extents");
  }
  TraceResult result;
  result.base = densify(as_base(g), cfg.densify_spacing_m, cfg.meters_per_pixel);
  const int iw = static_cast<int>(p_new.image_width());
  const int ih = static_cast<int>(p_new.image_height());
  for (const Vec2& v : result.base.vertices()) {
    if (!(v.i >= 0.0 && v.j >= 0.0 && v.i <= iw - 1.0 && v.j <= ih - 1.0)) {
      throw std::invalid_argument("graph extends outside the confidence tensor extent");
    }
  }

  // Non-owning handles; the session does not outlive this call.
  const bool forward = cfg.mode == TraceMode::Forward;
  std::shared_ptr<const ConfidenceTensor> present(forward ? &p_new : &p_old, [](const ConfidenceTensor*) {});
  std::shared_ptr<const ConfidenceTensor> past(forward ? &p_old : &p_new, [](const ConfidenceTensor*) {});
  TraceSession session(result.base, present, past, 0, 0, PixelWindow{0, 0, iw, ih}, iw, ih, cfg);
  std::vector<std::size_t> stack(result.base.vertex_count());
  for (std::size_t v = 0; v < stack.size(); ++v) stack[v] = v;
  session.run(std::move(stack));

  result.steps = session.steps();
  result.truncated = session.truncated();
  result.log = session.log();
  result.g_prime = session.take_graph();
  result.proposals = proposals_from_trace(result.g_prime, result.base,
                                          forward ? ProposalKind::NewRoad : ProposalKind::RemovedRoad);
  return result;
}

}  // namespace mapupdate
