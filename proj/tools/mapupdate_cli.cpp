// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mapupdate/mapupdate.h"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string scene;
  std::optional<long long> seed;
  std::optional<double> t_new;
  std::optional<double> t_old;
  std::optional<double> t_filter;
  std::string mode;
  std::string scorer;
  bool debug_log = false;
  std::optional<int> tile_size;
  std::optional<int> threads;
  bool parallel_tiles = false;
  std::map<std::string, std::string> inputs;  // config key -> path
  std::vector<std::string> sets;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "Configuration file (key = value with [section] headers)")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--seed", o.seed, "Random seed")->check(CLI::NonNegativeNumber);
  sub->add_option("--set", o.sets, "Override a config key: section.key=value")->take_all();
  sub->add_flag("--debug-log", o.debug_log, "Write the per-step tracing decision log");
}

void add_tracing(CLI::App* sub, Options& o) {
  sub->add_option("--t-new", o.t_new, "Present-confidence threshold");
  sub->add_option("--t-old", o.t_old, "Past-confidence threshold");
  sub->add_option("--mode", o.mode, "forward (new roads) or reverse (removed roads)")
      ->check(CLI::IsMember({"forward", "reverse"}));
  sub->add_option("--tile-size", o.tile_size, "Tile side in pixels (>= 512)");
  sub->add_option("--threads", o.threads, "Worker threads (0: all cores)");
  sub->add_flag("--parallel-tiles", o.parallel_tiles, "Trace tiles concurrently (may differ from untiled at borders)");
}

void add_filter(CLI::App* sub, Options& o) {
  sub->add_option("--t-filter", o.t_filter, "Keep proposals scoring below this");
  sub->add_option("--scorer", o.scorer, "mock or cmd:<program and arguments>");
}

void add_input(CLI::App* sub, Options& o, const std::string& flag, const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.inputs[key] = v; }, help);
}

void add_scene(CLI::App* sub, Options& o) {
  sub->add_option("--scene", o.scene, "Synthetic scene directory (fills the inputs)")->check(CLI::ExistingDirectory);
}

bool check(mu_status s) {
  if (s == MU_OK) return true;
  std::fprintf(stderr, "error: %s: %s\n", mu_status_string(s), mu_last_error());
  return false;
}

int exit_code(mu_status s) {
  switch (s) {
    case MU_OK: return 0;
    case MU_ERR_CONFIG:
    case MU_ERR_INVALID_ARGUMENT: return 2;
    case MU_ERR_IO:
    case MU_ERR_FORMAT: return 3;
    default: return 1;
  }
}

int run(const std::string& command, const Options& o) {
  mu_config* cfg = nullptr;
  mu_status s = o.config.empty() ? mu_config_new(&cfg) : mu_config_load(o.config.c_str(), &cfg);
  if (!check(s)) return exit_code(s);

  std::vector<std::pair<std::string, std::string>> kv;
  if (!o.scene.empty()) kv.emplace_back("input.scene", o.scene);
  for (const auto& [k, v] : o.inputs) kv.emplace_back(k, v);
  if (o.seed) kv.emplace_back("seed", std::to_string(*o.seed));
  if (o.t_new) kv.emplace_back("tracing.t_new", fmt_double(*o.t_new));
  if (o.t_old) kv.emplace_back("tracing.t_old", fmt_double(*o.t_old));
  if (!o.mode.empty()) kv.emplace_back("tracing.mode", o.mode);
  if (o.t_filter) kv.emplace_back("filter.t_filter", fmt_double(*o.t_filter));
  if (!o.scorer.empty()) kv.emplace_back("pipeline.scorer", o.scorer);
  if (o.debug_log) kv.emplace_back("pipeline.debug_log", "true");
  if (o.tile_size) kv.emplace_back("pipeline.tile_size", std::to_string(*o.tile_size));
  if (o.threads) kv.emplace_back("pipeline.threads", std::to_string(*o.threads));
  if (o.parallel_tiles) kv.emplace_back("pipeline.parallel_tiles", "true");
  for (const std::string& item : o.sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects section.key=value, got '%s'\n", item.c_str());
      mu_config_free(cfg);
      return 2;
    }
    kv.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  for (const auto& [k, v] : kv) {
    s = mu_config_set(cfg, k.c_str(), v.c_str());
    if (!check(s)) {
      mu_config_free(cfg);
      return exit_code(s);
    }
  }

  mu_summary* summary = nullptr;
  s = mu_run_command(command.c_str(), cfg, o.out.c_str(), &summary);
  mu_config_free(cfg);
  if (!check(s)) return exit_code(s);
  for (std::size_t i = 0; i < mu_summary_warning_count(summary); ++i) {
    std::fprintf(stderr, "warning: %s\n", mu_summary_warning(summary, i));
  }
  for (std::size_t i = 0; i < mu_summary_output_count(summary); ++i) {
    std::printf("%s/%s\n", o.out.c_str(), mu_summary_output(summary, i));
  }
  mu_summary_free(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Find new and removed roads and buildings between two imagery epochs."};
  app.set_version_flag("--version", std::string(mu_version()));
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene with known changes");
  add_common(synth, o);

  auto* trace = app.add_subcommand("trace", "Trace candidate road changes from the base map");
  add_common(trace, o);
  add_tracing(trace, o);
  add_scene(trace, o);
  add_input(trace, o, "--graph", "input.graph", "Base road graph (GeoJSON)");
  add_input(trace, o, "--p-old", "input.p_old", "Old-epoch confidence tensor (CTNS)");
  add_input(trace, o, "--p-new", "input.p_new", "New-epoch confidence tensor (CTNS)");

  auto* filter = app.add_subcommand("filter", "Score proposals and drop unchanged ones");
  add_common(filter, o);
  add_filter(filter, o);
  add_scene(filter, o);
  add_input(filter, o, "--proposals", "input.proposals", "Proposals to score (GeoJSON)");
  add_input(filter, o, "--old", "input.old_image", "Old image (PPM/PGM)");
  add_input(filter, o, "--new", "input.new_image", "New image (PPM/PGM)");

  auto* sample = app.add_subcommand("sample-pairs", "Export self-supervised training pairs");
  add_common(sample, o);
  add_scene(sample, o);
  add_input(sample, o, "--graph", "input.graph", "Base road graph (GeoJSON)");
  add_input(sample, o, "--old", "input.old_image", "Old image (PPM/PGM)");
  add_input(sample, o, "--new", "input.new_image", "New image (PPM/PGM)");
  add_input(sample, o, "--count", "sample.count", "Number of examples");

  auto* eval = app.add_subcommand("eval", "Precision/recall and APLS against ground truth");
  add_common(eval, o);
  add_scene(eval, o);
  add_input(eval, o, "--proposals", "input.proposals", "Proposals (GeoJSON)");
  add_input(eval, o, "--truth", "input.truth", "Ground-truth proposals (GeoJSON)");
  add_input(eval, o, "--allowlist", "input.allowlist", "Known-correct unlabelled changes (GeoJSON)");
  add_input(eval, o, "--truth-graph", "input.truth_graph", "Ground-truth road graph for APLS");
  add_input(eval, o, "--prop-graph", "input.prop_graph", "Proposed road graph for APLS");

  auto* buildings = app.add_subcommand("buildings", "Find new buildings from segmentation rasters");
  add_common(buildings, o);
  add_filter(buildings, o);
  add_scene(buildings, o);
  add_input(buildings, o, "--seg-old", "input.seg_old", "Old segmentation (CTNS)");
  add_input(buildings, o, "--seg-new", "input.seg_new", "New segmentation (CTNS)");
  add_input(buildings, o, "--old", "input.old_image", "Old image, enables filtering");
  add_input(buildings, o, "--new", "input.new_image", "New image, enables filtering");

  auto* runall = app.add_subcommand("run", "Trace, score and filter in one pass");
  add_common(runall, o);
  add_tracing(runall, o);
  add_filter(runall, o);
  add_scene(runall, o);
  add_input(runall, o, "--graph", "input.graph", "Base road graph (GeoJSON)");
  add_input(runall, o, "--p-old", "input.p_old", "Old-epoch confidence tensor (CTNS)");
  add_input(runall, o, "--p-new", "input.p_new", "New-epoch confidence tensor (CTNS)");
  add_input(runall, o, "--old", "input.old_image", "Old image (PPM/PGM)");
  add_input(runall, o, "--new", "input.new_image", "New image (PPM/PGM)");
  add_input(runall, o, "--truth", "input.truth", "Ground truth for a report (GeoJSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (CLI::App* sub : app.get_subcommands()) return run(sub->get_name(), o);
  return 2;
}
