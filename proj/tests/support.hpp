#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "mapupdate/core.hpp"

namespace mutest {

// Fresh directory under the build tree's scratch area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(MU_SCRATCH) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Random planar-ish graph: points on a jittered lattice, edges between
// lattice neighbours kept with probability p_edge.
inline mapupdate::RoadGraph random_lattice_graph(std::mt19937_64& rng, int nx, int ny, double spacing,
                                                 double p_edge) {
  mapupdate::RoadGraph g;
  std::uniform_real_distribution<double> jitter(-0.2 * spacing, 0.2 * spacing);
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) g.add_vertex({20.0 + x * spacing + jitter(rng), 20.0 + y * spacing + jitter(rng)});
  }
  std::bernoulli_distribution keep(p_edge);
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const std::size_t v = static_cast<std::size_t>(y * nx + x);
      if (x + 1 < nx && keep(rng)) g.add_edge(v, v + 1);
      if (y + 1 < ny && keep(rng)) g.add_edge(v, v + static_cast<std::size_t>(nx));
    }
  }
  return g;
}

}  // namespace mutest
