#ifndef MAPUPDATE_H
#define MAPUPDATE_H

/* C interface to the map-update library. All handles are opaque. Every call
 * that can fail returns an mu_status; on failure mu_last_error() holds a
 * message for the calling thread until its next failing call. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MU_API __declspec(dllexport)
#else
#define MU_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mu_status {
  MU_OK = 0,
  MU_ERR_INVALID_ARGUMENT = 1,
  MU_ERR_IO = 2,
  MU_ERR_FORMAT = 3,
  MU_ERR_CONFIG = 4,
  MU_ERR_RUNTIME = 5,
  MU_ERR_NO_MEMORY = 6,
  MU_ERR_INTERNAL = 7
} mu_status;

MU_API const char* mu_version(void);
MU_API const char* mu_status_string(mu_status status);
MU_API const char* mu_last_error(void);

/* Configuration */

typedef struct mu_config mu_config;

MU_API mu_status mu_config_new(mu_config** out);
MU_API mu_status mu_config_parse(const char* text, mu_config** out);
MU_API mu_status mu_config_load(const char* path, mu_config** out);
MU_API mu_status mu_config_set(mu_config* cfg, const char* key, const char* value);
/* MU_ERR_CONFIG when the key is not set. */
MU_API mu_status mu_config_get(const mu_config* cfg, const char* key, const char** value);
MU_API mu_status mu_config_hash(const mu_config* cfg, uint64_t* out);
/* Fails with MU_ERR_CONFIG on unknown keys or invalid values. */
MU_API mu_status mu_config_validate(const mu_config* cfg);
MU_API void mu_config_free(mu_config* cfg);

/* Commands: "synth", "trace", "filter", "sample-pairs", "eval", "buildings"
 * and "run". Outputs land in out_dir next to a manifest.json. */

typedef struct mu_summary mu_summary;

MU_API mu_status mu_run_command(const char* command, const mu_config* cfg, const char* out_dir, mu_summary** out);
MU_API size_t mu_summary_output_count(const mu_summary* s);
MU_API const char* mu_summary_output(const mu_summary* s, size_t index);
MU_API size_t mu_summary_warning_count(const mu_summary* s);
MU_API const char* mu_summary_warning(const mu_summary* s, size_t index);
MU_API void mu_summary_free(mu_summary* s);

/* Road graphs, in image pixels */

typedef struct mu_graph mu_graph;

MU_API mu_status mu_graph_new(mu_graph** out);
MU_API mu_status mu_graph_read(const char* path, mu_graph** out);
MU_API mu_status mu_graph_write(const mu_graph* g, const char* path);
MU_API mu_status mu_graph_add_vertex(mu_graph* g, double i, double j, size_t* index);
MU_API mu_status mu_graph_add_edge(mu_graph* g, size_t u, size_t v);
MU_API size_t mu_graph_vertex_count(const mu_graph* g);
MU_API size_t mu_graph_edge_count(const mu_graph* g);
MU_API mu_status mu_graph_vertex(const mu_graph* g, size_t index, double* i, double* j);
MU_API mu_status mu_graph_edge(const mu_graph* g, size_t index, size_t* u, size_t* v);
MU_API void mu_graph_free(mu_graph* g);

/* Confidence tensors: height x width x 64 floats in (j, i, k) order */

typedef struct mu_confidence mu_confidence;

MU_API mu_status mu_confidence_read(const char* path, mu_confidence** out);
MU_API mu_status mu_confidence_new(uint32_t height, uint32_t width, uint32_t scale_factor, const float* data,
                                   mu_confidence** out);
MU_API mu_status mu_confidence_sample(const mu_confidence* c, double i, double j, int k, double* out);
MU_API void mu_confidence_free(mu_confidence* c);

/* Proposals */

typedef struct mu_proposals mu_proposals;

typedef enum mu_proposal_kind { MU_NEW_ROAD = 0, MU_REMOVED_ROAD = 1, MU_NEW_BUILDING = 2 } mu_proposal_kind;

MU_API mu_status mu_proposals_read(const char* path, mu_proposals** out);
MU_API mu_status mu_proposals_write(const mu_proposals* p, const char* path);
MU_API size_t mu_proposals_count(const mu_proposals* p);
MU_API mu_status mu_proposal_kind_at(const mu_proposals* p, size_t index, mu_proposal_kind* kind);
/* bbox: min_i, min_j, max_i, max_j */
MU_API mu_status mu_proposal_bbox(const mu_proposals* p, size_t index, double bbox[4]);
/* has_score is set to 0 for unscored proposals. */
MU_API mu_status mu_proposal_score(const mu_proposals* p, size_t index, int* has_score, double* score);
MU_API void mu_proposals_free(mu_proposals* p);

/* Tracing */

typedef struct mu_trace_options {
  double t_new;
  double t_old;
  double step_length_m;
  double densify_spacing_m;
  double meters_per_pixel;
  int reverse;      /* nonzero: look for removed roads */
  int compare_old;  /* zero: gate on the present tensor only */
  int tile_size;    /* pixels per tile side */
  int threads;      /* 0: hardware concurrency */
  int parallel_tiles; /* nonzero: trace tiles concurrently */
  size_t max_steps;
} mu_trace_options;

MU_API void mu_trace_options_default(mu_trace_options* opts);
/* g_prime may be NULL. */
MU_API mu_status mu_trace(const mu_graph* g, const mu_confidence* p_new, const mu_confidence* p_old,
                          const mu_trace_options* opts, mu_proposals** proposals, mu_graph** g_prime);

/* Evaluation */

typedef struct mu_pr_point {
  double precision;
  double recall;
  size_t matched_proposals;
  size_t matched_truth;
  size_t discarded;
  size_t num_proposals;
  size_t num_truth;
} mu_pr_point;

/* allowlist may be NULL. */
MU_API mu_status mu_match(const mu_proposals* props, const mu_proposals* truth, const mu_proposals* allowlist,
                          mu_pr_point* out);
MU_API mu_status mu_apls(const mu_graph* truth, const mu_graph* prop, double snap_radius_m, size_t n_samples,
                         uint64_t seed, double meters_per_pixel, double* out);

#ifdef __cplusplus
}
#endif

#endif
