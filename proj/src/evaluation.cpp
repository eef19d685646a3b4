#include "mapupdate/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mapupdate/change_filter.hpp"

namespace mapupdate {

std::string to_json_line(const PRPoint& p) {
  nlohmann::ordered_json j;
  j["threshold"] = p.threshold;
  j["precision"] = p.precision;
  j["recall"] = p.recall;
  j["matched_proposals"] = p.matched_proposals;
  j["matched_truth"] = p.matched_truth;
  j["discarded"] = p.discarded;
  j["num_proposals"] = p.num_proposals;
  j["num_truth"] = p.num_truth;
  return j.dump();
}

PRPoint match_proposals(const std::vector<Proposal>& props, const GroundTruthSet& truth) {
  PRPoint out;
  out.num_truth = truth.proposals.size();
  std::vector<bool> truth_hit(truth.proposals.size(), false);
  for (const Proposal& p : props) {
    bool hit = false;
    for (std::size_t t = 0; t < truth.proposals.size(); ++t) {
      if (p.bbox.intersects(truth.proposals[t].bbox)) {
        hit = true;
        truth_hit[t] = true;
      }
    }
    if (hit) {
      ++out.matched_proposals;
      ++out.num_proposals;
      continue;
    }
    const bool allowed = std::any_of(truth.allowlist.begin(), truth.allowlist.end(),
                                     [&](const Proposal& a) { return p.bbox.intersects(a.bbox); });
    if (allowed) {
      ++out.discarded;
    } else {
      ++out.num_proposals;
    }
  }
  out.matched_truth = static_cast<std::size_t>(std::count(truth_hit.begin(), truth_hit.end(), true));
  out.precision = out.num_proposals == 0 ? 1.0 : static_cast<double>(out.matched_proposals) / out.num_proposals;
  out.recall = out.num_truth == 0 ? 0.0 : static_cast<double>(out.matched_truth) / out.num_truth;
  return out;
}

std::vector<PRPoint> pr_curve(const std::vector<Proposal>& scored, const GroundTruthSet& truth,
                              const std::vector<double>& thresholds) {
  std::vector<PRPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    PRPoint p = match_proposals(filter_proposals(scored, t).kept, truth);
    p.threshold = t;
    out.push_back(p);
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> dijkstra(const RoadGraph& g, std::size_t from, std::optional<std::size_t> stop_at) {
  std::vector<double> dist(g.vertex_count(), kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[from] = 0.0;
  pq.push({0.0, from});
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    if (stop_at && v == *stop_at) break;
    for (std::size_t e : g.incident(v)) {
      const std::size_t w = g.other_end(e, v);
      const double nd = d + g.edge_length_px(e);
      if (nd < dist[w]) {
        dist[w] = nd;
        pq.push({nd, w});
      }
    }
  }
  return dist;
}

std::optional<std::size_t> snap(const RoadGraph& g, Vec2 p, double radius_px) {
  std::optional<std::size_t> best;
  double best_d = radius_px;
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const double d = distance(g.vertex(v), p);
    if (d < best_d || (d == best_d && !best)) {
      best_d = d;
      best = v;
    }
  }
  return best;
}

double pair_score(double l, double l_prime) {
  if (!std::isfinite(l_prime)) return 0.0;
  return 1.0 - std::min(1.0, std::fabs(l - l_prime) / l);
}

std::vector<int> component_labels(const RoadGraph& g) {
  std::vector<int> label(g.vertex_count(), -1);
  int next = 0;
  for (std::size_t s = 0; s < g.vertex_count(); ++s) {
    if (label[s] >= 0) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t e : g.incident(v)) {
        const std::size_t w = g.other_end(e, v);
        if (label[w] < 0) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

double shortest_path_length(const RoadGraph& g, std::size_t from, std::size_t to) {
  if (from >= g.vertex_count() || to >= g.vertex_count()) throw std::out_of_range("vertex index out of range");
  return dijkstra(g, from, to)[to];
}

double apls(const RoadGraph& g_truth, const RoadGraph& g_prop, const AplsOptions& opts) {
  if (g_truth.vertex_count() == 0) throw std::invalid_argument("truth graph is empty");
  if (opts.n_samples == 0) throw std::invalid_argument("APLS needs at least one sample");
  const double radius = m_to_px(opts.snap_radius_m, opts.meters_per_pixel);
  std::mt19937_64 rng(opts.seed);

  // Truth side: pairs drawn from non-trivial connected components.
  const std::vector<int> comp = component_labels(g_truth);
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t v = 0; v < comp.size(); ++v) {
    if (static_cast<std::size_t>(comp[v]) >= members.size()) members.resize(comp[v] + 1);
    members[comp[v]].push_back(v);
  }
  std::vector<std::size_t> candidates;
  for (std::size_t v = 0; v < comp.size(); ++v) {
    if (members[comp[v]].size() >= 2) candidates.push_back(v);
  }
  if (candidates.empty()) return 0.0;

  double sum_a = 0.0;
  std::size_t scored_a = 0;
  for (std::size_t n = 0; n < opts.n_samples; ++n) {
    const std::size_t u = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    const auto& group = members[comp[u]];
    std::size_t v = u;
    while (v == u) v = group[std::uniform_int_distribution<std::size_t>(0, group.size() - 1)(rng)];
    const double l = shortest_path_length(g_truth, u, v);
    if (!(l > 0.0)) continue;
    ++scored_a;
    const auto su = snap(g_prop, g_truth.vertex(u), radius);
    const auto sv = snap(g_prop, g_truth.vertex(v), radius);
    if (!su || !sv) continue;
    const double l_prime = *su == *sv ? 0.0 : shortest_path_length(g_prop, *su, *sv);
    sum_a += pair_score(l, l_prime);
  }
  const double score_a = scored_a == 0 ? 0.0 : sum_a / static_cast<double>(scored_a);

  // Proposal side: pairs of proposal vertices regardless of edges.
  if (g_prop.vertex_count() < 2) return score_a;
  double sum_b = 0.0;
  std::size_t counted = 0;
  for (std::size_t n = 0; n < opts.n_samples; ++n) {
    std::uniform_int_distribution<std::size_t> pick(0, g_prop.vertex_count() - 1);
    const std::size_t a = pick(rng);
    std::size_t b = a;
    while (b == a) b = pick(rng);
    const auto ta = snap(g_truth, g_prop.vertex(a), radius);
    const auto tb = snap(g_truth, g_prop.vertex(b), radius);
    if (!ta || !tb) {
      ++counted;
      continue;
    }
    if (*ta == *tb || comp[*ta] != comp[*tb]) continue;
    const double l = shortest_path_length(g_truth, *ta, *tb);
    if (!(l > 0.0)) continue;
    sum_b += pair_score(l, shortest_path_length(g_prop, a, b));
    ++counted;
  }
  if (counted == 0) return score_a;
  return 0.5 * (score_a + sum_b / static_cast<double>(counted));
}

}  // namespace mapupdate
