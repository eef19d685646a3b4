#include "mapupdate/mapupdate.h"

#include <new>
#include <string>

#include "mapupdate/evaluation.hpp"
#include "mapupdate/io.hpp"
#include "mapupdate/pipeline.hpp"
#include "mapupdate/tracing.hpp"

struct mu_config {
  mapupdate::Config cfg;
};
struct mu_summary {
  mapupdate::RunSummary s;
};
struct mu_graph {
  mapupdate::RoadGraph g;
};
struct mu_confidence {
  mapupdate::ConfidenceTensor t;
};
struct mu_proposals {
  std::vector<mapupdate::Proposal> p;
};

namespace {

thread_local std::string g_last_error;

mu_status fail(mu_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <typename F>
mu_status guarded(F&& f) {
  try {
    f();
    return MU_OK;
  } catch (const mapupdate::ConfigError& e) {
    return fail(MU_ERR_CONFIG, e.what());
  } catch (const mapupdate::io::IoError& e) {
    return fail(MU_ERR_IO, e.what());
  } catch (const mapupdate::io::FormatError& e) {
    return fail(MU_ERR_FORMAT, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(MU_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(MU_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MU_ERR_NO_MEMORY, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(MU_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(MU_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(MU_ERR_INTERNAL, "unknown error");
  }
}

#define MU_REQUIRE(cond)                                                 \
  do {                                                                   \
    if (!(cond)) return fail(MU_ERR_INVALID_ARGUMENT, "null argument: " #cond); \
  } while (0)

}  // namespace

extern "C" {

const char* mu_version(void) { return "1.0.0"; }

const char* mu_status_string(mu_status status) {
  switch (status) {
    case MU_OK: return "ok";
    case MU_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MU_ERR_IO: return "i/o error";
    case MU_ERR_FORMAT: return "format error";
    case MU_ERR_CONFIG: return "configuration error";
    case MU_ERR_RUNTIME: return "runtime error";
    case MU_ERR_NO_MEMORY: return "out of memory";
    case MU_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mu_last_error(void) { return g_last_error.c_str(); }

// Configuration

mu_status mu_config_new(mu_config** out) {
  MU_REQUIRE(out);
  return guarded([&] { *out = new mu_config{}; });
}

mu_status mu_config_parse(const char* text, mu_config** out) {
  MU_REQUIRE(text && out);
  return guarded([&] { *out = new mu_config{mapupdate::Config::parse(text)}; });
}

mu_status mu_config_load(const char* path, mu_config** out) {
  MU_REQUIRE(path && out);
  return guarded([&] { *out = new mu_config{mapupdate::Config::load(path)}; });
}

mu_status mu_config_set(mu_config* cfg, const char* key, const char* value) {
  MU_REQUIRE(cfg && key && value);
  return guarded([&] { cfg->cfg.set(key, value); });
}

mu_status mu_config_get(const mu_config* cfg, const char* key, const char** value) {
  MU_REQUIRE(cfg && key && value);
  const auto it = cfg->cfg.values().find(key);
  if (it == cfg->cfg.values().end()) return fail(MU_ERR_CONFIG, "key not set");
  *value = it->second.c_str();
  return MU_OK;
}

mu_status mu_config_hash(const mu_config* cfg, uint64_t* out) {
  MU_REQUIRE(cfg && out);
  *out = cfg->cfg.hash();
  return MU_OK;
}

mu_status mu_config_validate(const mu_config* cfg) {
  MU_REQUIRE(cfg);
  return guarded([&] { mapupdate::PipelineConfig::from_config(cfg->cfg); });
}

void mu_config_free(mu_config* cfg) { delete cfg; }

// Commands

mu_status mu_run_command(const char* command, const mu_config* cfg, const char* out_dir, mu_summary** out) {
  MU_REQUIRE(command && cfg && out_dir);
  return guarded([&] {
    using namespace mapupdate;
    const PipelineConfig pc = PipelineConfig::from_config(cfg->cfg);
    const std::string c = command;
    RunSummary s;
    if (c == "synth") {
      s = run_synth(pc, out_dir);
    } else if (c == "trace") {
      s = run_trace(pc, out_dir);
    } else if (c == "filter") {
      s = run_filter(pc, out_dir);
    } else if (c == "sample-pairs") {
      s = run_sample_pairs(pc, out_dir);
    } else if (c == "eval") {
      s = run_eval(pc, out_dir);
    } else if (c == "buildings") {
      s = run_buildings(pc, out_dir);
    } else if (c == "run") {
      s = run_update(pc, out_dir);
    } else {
      throw std::invalid_argument("unknown command '" + c + "'");
    }
    if (out) *out = new mu_summary{std::move(s)};
  });
}

size_t mu_summary_output_count(const mu_summary* s) { return s ? s->s.outputs.size() : 0; }
const char* mu_summary_output(const mu_summary* s, size_t index) {
  return s && index < s->s.outputs.size() ? s->s.outputs[index].c_str() : nullptr;
}
size_t mu_summary_warning_count(const mu_summary* s) { return s ? s->s.warnings.size() : 0; }
const char* mu_summary_warning(const mu_summary* s, size_t index) {
  return s && index < s->s.warnings.size() ? s->s.warnings[index].c_str() : nullptr;
}
void mu_summary_free(mu_summary* s) { delete s; }

// Graphs

mu_status mu_graph_new(mu_graph** out) {
  MU_REQUIRE(out);
  return guarded([&] { *out = new mu_graph{}; });
}

mu_status mu_graph_read(const char* path, mu_graph** out) {
  MU_REQUIRE(path && out);
  return guarded([&] { *out = new mu_graph{mapupdate::io::read_graph(path)}; });
}

mu_status mu_graph_write(const mu_graph* g, const char* path) {
  MU_REQUIRE(g && path);
  return guarded([&] { mapupdate::io::write_graph(path, g->g); });
}

mu_status mu_graph_add_vertex(mu_graph* g, double i, double j, size_t* index) {
  MU_REQUIRE(g);
  return guarded([&] {
    const std::size_t v = g->g.add_vertex({i, j});
    if (index) *index = v;
  });
}

mu_status mu_graph_add_edge(mu_graph* g, size_t u, size_t v) {
  MU_REQUIRE(g);
  return guarded([&] { g->g.add_edge(u, v); });
}

size_t mu_graph_vertex_count(const mu_graph* g) { return g ? g->g.vertex_count() : 0; }
size_t mu_graph_edge_count(const mu_graph* g) { return g ? g->g.edge_count() : 0; }

mu_status mu_graph_vertex(const mu_graph* g, size_t index, double* i, double* j) {
  MU_REQUIRE(g && i && j);
  return guarded([&] {
    const mapupdate::Vec2 p = g->g.vertex(index);
    *i = p.i;
    *j = p.j;
  });
}

mu_status mu_graph_edge(const mu_graph* g, size_t index, size_t* u, size_t* v) {
  MU_REQUIRE(g && u && v);
  return guarded([&] {
    const mapupdate::Edge& e = g->g.edge(index);
    *u = e.u;
    *v = e.v;
  });
}

void mu_graph_free(mu_graph* g) { delete g; }

// Confidence tensors

mu_status mu_confidence_read(const char* path, mu_confidence** out) {
  MU_REQUIRE(path && out);
  return guarded([&] {
    mapupdate::Tensor t = mapupdate::io::read_ctns(path);
    *out = new mu_confidence{mapupdate::ConfidenceTensor(std::move(t))};
  });
}

mu_status mu_confidence_new(uint32_t height, uint32_t width, uint32_t scale_factor, const float* data,
                            mu_confidence** out) {
  MU_REQUIRE(data && out);
  return guarded([&] {
    const std::size_t n = static_cast<std::size_t>(height) * width * mapupdate::kNumDirections;
    std::vector<float> v(data, data + n);
    mapupdate::Tensor t(height, width, mapupdate::kNumDirections, scale_factor, std::move(v));
    *out = new mu_confidence{mapupdate::ConfidenceTensor(std::move(t))};
  });
}

mu_status mu_confidence_sample(const mu_confidence* c, double i, double j, int k, double* out) {
  MU_REQUIRE(c && out);
  return guarded([&] { *out = mapupdate::sample_confidence(c->t, i, j, k); });
}

void mu_confidence_free(mu_confidence* c) { delete c; }

// Proposals

mu_status mu_proposals_read(const char* path, mu_proposals** out) {
  MU_REQUIRE(path && out);
  return guarded([&] { *out = new mu_proposals{mapupdate::io::read_proposals(path)}; });
}

mu_status mu_proposals_write(const mu_proposals* p, const char* path) {
  MU_REQUIRE(p && path);
  return guarded([&] { mapupdate::io::write_proposals(path, p->p); });
}

size_t mu_proposals_count(const mu_proposals* p) { return p ? p->p.size() : 0; }

mu_status mu_proposal_kind_at(const mu_proposals* p, size_t index, mu_proposal_kind* kind) {
  MU_REQUIRE(p && kind);
  return guarded([&] {
    switch (p->p.at(index).kind) {
      case mapupdate::ProposalKind::NewRoad: *kind = MU_NEW_ROAD; break;
      case mapupdate::ProposalKind::RemovedRoad: *kind = MU_REMOVED_ROAD; break;
      case mapupdate::ProposalKind::NewBuilding: *kind = MU_NEW_BUILDING; break;
    }
  });
}

mu_status mu_proposal_bbox(const mu_proposals* p, size_t index, double bbox[4]) {
  MU_REQUIRE(p && bbox);
  return guarded([&] {
    const mapupdate::BBox& b = p->p.at(index).bbox;
    bbox[0] = b.min_i;
    bbox[1] = b.min_j;
    bbox[2] = b.max_i;
    bbox[3] = b.max_j;
  });
}

mu_status mu_proposal_score(const mu_proposals* p, size_t index, int* has_score, double* score) {
  MU_REQUIRE(p && has_score && score);
  return guarded([&] {
    const auto& s = p->p.at(index).score;
    *has_score = s.has_value() ? 1 : 0;
    *score = s.value_or(0.0);
  });
}

void mu_proposals_free(mu_proposals* p) { delete p; }

// Tracing

void mu_trace_options_default(mu_trace_options* opts) {
  if (!opts) return;
  const mapupdate::TracingConfig d;
  opts->t_new = d.t_new;
  opts->t_old = d.t_old;
  opts->step_length_m = d.step_length_m;
  opts->densify_spacing_m = d.densify_spacing_m;
  opts->meters_per_pixel = d.meters_per_pixel;
  opts->reverse = 0;
  opts->compare_old = 1;
  opts->tile_size = 512;
  opts->threads = 0;
  opts->parallel_tiles = 0;
  opts->max_steps = d.max_steps;
}

mu_status mu_trace(const mu_graph* g, const mu_confidence* p_new, const mu_confidence* p_old,
                   const mu_trace_options* opts, mu_proposals** proposals, mu_graph** g_prime) {
  MU_REQUIRE(g && p_new && p_old && opts && proposals);
  return guarded([&] {
    mapupdate::TracingConfig cfg;
    cfg.t_new = opts->t_new;
    cfg.t_old = opts->t_old;
    cfg.step_length_m = opts->step_length_m;
    cfg.densify_spacing_m = opts->densify_spacing_m;
    cfg.meters_per_pixel = opts->meters_per_pixel;
    cfg.mode = opts->reverse ? mapupdate::TraceMode::Reverse : mapupdate::TraceMode::Forward;
    cfg.compare_old = opts->compare_old != 0;
    cfg.max_steps = opts->max_steps;
    mapupdate::TilingOptions tiling;
    tiling.tile_size = opts->tile_size;
    tiling.threads = opts->threads;
    tiling.parallel = opts->parallel_tiles != 0;
    mapupdate::TraceResult r = mapupdate::trace_tiled(g->g, p_new->t, p_old->t, cfg, tiling);
    auto* props = new mu_proposals{std::move(r.proposals)};
    if (g_prime) {
      try {
        *g_prime = new mu_graph{std::move(r.g_prime)};
      } catch (...) {
        delete props;
        throw;
      }
    }
    *proposals = props;
  });
}

// Evaluation

mu_status mu_match(const mu_proposals* props, const mu_proposals* truth, const mu_proposals* allowlist,
                   mu_pr_point* out) {
  MU_REQUIRE(props && truth && out);
  return guarded([&] {
    mapupdate::GroundTruthSet gt;
    gt.proposals = truth->p;
    if (allowlist) gt.allowlist = allowlist->p;
    const mapupdate::PRPoint r = mapupdate::match_proposals(props->p, gt);
    *out = {r.precision, r.recall, r.matched_proposals, r.matched_truth, r.discarded, r.num_proposals, r.num_truth};
  });
}

mu_status mu_apls(const mu_graph* truth, const mu_graph* prop, double snap_radius_m, size_t n_samples, uint64_t seed,
                  double meters_per_pixel, double* out) {
  MU_REQUIRE(truth && prop && out);
  return guarded([&] {
    mapupdate::AplsOptions o;
    o.snap_radius_m = snap_radius_m;
    o.n_samples = n_samples;
    o.seed = seed;
    o.meters_per_pixel = meters_per_pixel;
    *out = mapupdate::apls(truth->g, prop->g, o);
  });
}

}  // extern "C"
