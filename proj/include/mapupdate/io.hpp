#pragma once

// File formats.
//
// CTNS tensor: ASCII "CTNS", then little-endian u32 version (1), height,
// width, channels, scale_factor, then height*width*channels little-endian
// f32 values in (j, i, k) order.
//
// Graphs and proposals are GeoJSON FeatureCollections. Coordinates are image
// pixels, or world meters when a transform is supplied (recorded in the
// top-level "transform" member).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mapupdate/core.hpp"

namespace mapupdate::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCtnsVersion = 1;
inline constexpr std::size_t kCtnsHeaderBytes = 4 + 5 * 4;

std::vector<std::uint8_t> encode_ctns(const Tensor& t);
Tensor decode_ctns(std::span<const std::uint8_t> bytes);
void write_ctns(const std::filesystem::path& path, const Tensor& t);
Tensor read_ctns(const std::filesystem::path& path);

std::string graph_to_geojson(const RoadGraph& g, const std::optional<GeoTransform>& transform = std::nullopt);
// Vertices sharing exact coordinates are merged into one.
RoadGraph graph_from_geojson(const std::string& text);
void write_graph(const std::filesystem::path& path, const RoadGraph& g,
                 const std::optional<GeoTransform>& transform = std::nullopt);
RoadGraph read_graph(const std::filesystem::path& path);

std::string proposals_to_geojson(const std::vector<Proposal>& props,
                                 const std::optional<GeoTransform>& transform = std::nullopt);
std::vector<Proposal> proposals_from_geojson(const std::string& text);
void write_proposals(const std::filesystem::path& path, const std::vector<Proposal>& props,
                     const std::optional<GeoTransform>& transform = std::nullopt);
std::vector<Proposal> read_proposals(const std::filesystem::path& path);

// Binary PGM (1 channel) / PPM (3 channels).
void write_netpbm(const std::filesystem::path& path, const RasterImage& img);
RasterImage read_netpbm(const std::filesystem::path& path, GeoTransform transform = {});

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mapupdate::io
