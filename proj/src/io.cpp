#include "mapupdate/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mapupdate::io {

using json = nlohmann::ordered_json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[off + b]) << (8 * b);
  return v;
}

json transform_json(const GeoTransform& t) {
  return json{{"meters_per_pixel", t.meters_per_pixel}, {"origin", {t.origin_x, t.origin_y}}};
}

std::optional<GeoTransform> transform_from(const json& doc) {
  if (!doc.contains("transform") || doc["transform"].is_null()) return std::nullopt;
  const json& t = doc["transform"];
  return GeoTransform(t.at("meters_per_pixel").get<double>(), t.at("origin").at(0).get<double>(),
                      t.at("origin").at(1).get<double>());
}

json point_json(Vec2 p, const std::optional<GeoTransform>& t) {
  const Vec2 q = t ? t->pixel_to_world(p) : p;
  return json::array({q.i, q.j});
}

Vec2 point_from(const json& c, const std::optional<GeoTransform>& t) {
  const Vec2 q{c.at(0).get<double>(), c.at(1).get<double>()};
  if (!t) return q;
  // Snap away the rounding noise of the world -> pixel division.
  const Vec2 px = t->world_to_pixel(q);
  return {std::round(px.i * 1e7) / 1e7, std::round(px.j * 1e7) / 1e7};
}

json bbox_json(const BBox& b, const std::optional<GeoTransform>& t) {
  if (b.empty()) return json::array();
  if (!t) return json::array({b.min_i, b.min_j, b.max_i, b.max_j});
  const Vec2 lo = t->pixel_to_world({b.min_i, b.max_j});
  const Vec2 hi = t->pixel_to_world({b.max_i, b.min_j});
  return json::array({lo.i, lo.j, hi.i, hi.j});
}

// Builds a graph from line strings, merging identical coordinates.
class GraphAssembler {
 public:
  std::size_t vertex(Vec2 p, bool base) {
    auto [it, inserted] = index_.try_emplace({p.i, p.j}, 0);
    if (inserted) it->second = graph_.add_vertex(p, base);
    return it->second;
  }
  void line(const std::vector<Vec2>& pts, bool base) {
    for (std::size_t n = 0; n + 1 < pts.size(); ++n) {
      const std::size_t a = vertex(pts[n], base);
      const std::size_t b = vertex(pts[n + 1], base);
      graph_.try_add_edge(a, b, base);
    }
    if (pts.size() == 1) vertex(pts[0], base);
  }
  RoadGraph take() { return std::move(graph_); }

 private:
  RoadGraph graph_;
  std::map<std::pair<double, double>, std::size_t> index_;
};

std::vector<std::vector<Vec2>> lines_of(const json& geom, const std::optional<GeoTransform>& t) {
  std::vector<std::vector<Vec2>> out;
  const std::string type = geom.at("type").get<std::string>();
  auto read_line = [&](const json& coords) {
    std::vector<Vec2> pts;
    for (const json& c : coords) pts.push_back(point_from(c, t));
    return pts;
  };
  if (type == "LineString") {
    out.push_back(read_line(geom.at("coordinates")));
  } else if (type == "MultiLineString") {
    for (const json& l : geom.at("coordinates")) out.push_back(read_line(l));
  } else if (type == "Point") {
    out.push_back({point_from(geom.at("coordinates"), t)});
  } else {
    throw FormatError("unsupported road geometry type: " + type);
  }
  return out;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_ctns(const Tensor& t) {
  std::vector<std::uint8_t> out(4);
  out.reserve(kCtnsHeaderBytes + t.data().size() * 4);
  std::memcpy(out.data(), "CTNS", 4);
  put_u32(out, kCtnsVersion);
  put_u32(out, t.height());
  put_u32(out, t.width());
  put_u32(out, t.channels());
  put_u32(out, t.scale_factor());
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_ctns(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCtnsHeaderBytes || std::memcmp(bytes.data(), "CTNS", 4) != 0) {
    throw FormatError("not a CTNS tensor");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCtnsVersion) throw FormatError("unsupported CTNS version " + std::to_string(version));
  const std::uint32_t h = get_u32(bytes, 8);
  const std::uint32_t w = get_u32(bytes, 12);
  const std::uint32_t c = get_u32(bytes, 16);
  const std::uint32_t s = get_u32(bytes, 20);
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w * c;
  if (c == 0 || s == 0) throw FormatError("CTNS header has zero channels or scale factor");
  if (bytes.size() != kCtnsHeaderBytes + n * 4) throw FormatError("CTNS payload length mismatch");
  std::vector<float> data(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < data.size(); ++k) {
    data[k] = std::bit_cast<float>(get_u32(bytes, kCtnsHeaderBytes + 4 * k));
  }
  return Tensor(h, w, c, s, std::move(data));
}

void write_ctns(const std::filesystem::path& path, const Tensor& t) { write_bytes(path, encode_ctns(t)); }

Tensor read_ctns(const std::filesystem::path& path) { return decode_ctns(read_bytes(path)); }

// ---------------------------------------------------------------------------

std::string graph_to_geojson(const RoadGraph& g, const std::optional<GeoTransform>& transform) {
  json doc;
  doc["type"] = "FeatureCollection";
  if (transform) doc["transform"] = transform_json(*transform);
  json features = json::array();
  for (const Edge& e : g.edges()) {
    json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "LineString"},
                     {"coordinates", json::array({point_json(g.vertex(e.u), transform),
                                                  point_json(g.vertex(e.v), transform)})}};
    f["properties"] = {{"base", e.base}};
    features.push_back(std::move(f));
  }
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    if (g.degree(v) != 0) continue;
    json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Point"}, {"coordinates", point_json(g.vertex(v), transform)}};
    f["properties"] = {{"base", static_cast<bool>(g.vertex_is_base(v))}};
    features.push_back(std::move(f));
  }
  doc["features"] = std::move(features);
  return doc.dump() + "\n";
}

RoadGraph graph_from_geojson(const std::string& text) {
  const json doc = parse_json(text);
  try {
    if (doc.at("type") != "FeatureCollection") throw FormatError("expected a FeatureCollection");
    const auto t = transform_from(doc);
    GraphAssembler asm_;
    for (const json& f : doc.at("features")) {
      bool base = true;
      if (f.contains("properties") && f["properties"].is_object() && f["properties"].contains("base")) {
        base = f["properties"]["base"].get<bool>();
      }
      for (const auto& line : lines_of(f.at("geometry"), t)) asm_.line(line, base);
    }
    return asm_.take();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph GeoJSON: ") + e.what());
  }
}

void write_graph(const std::filesystem::path& path, const RoadGraph& g, const std::optional<GeoTransform>& transform) {
  write_text(path, graph_to_geojson(g, transform));
}

RoadGraph read_graph(const std::filesystem::path& path) { return graph_from_geojson(read_text(path)); }

std::string proposals_to_geojson(const std::vector<Proposal>& props, const std::optional<GeoTransform>& transform) {
  json doc;
  doc["type"] = "FeatureCollection";
  if (transform) doc["transform"] = transform_json(*transform);
  json features = json::array();
  for (const Proposal& p : props) {
    json f;
    f["type"] = "Feature";
    f["bbox"] = bbox_json(p.bbox, transform);
    if (p.is_road()) {
      json lines = json::array();
      for (const Edge& e : p.road.edges()) {
        lines.push_back(json::array({point_json(p.road.vertex(e.u), transform), point_json(p.road.vertex(e.v), transform)}));
      }
      f["geometry"] = {{"type", "MultiLineString"}, {"coordinates", std::move(lines)}};
    } else {
      json rings = json::array();
      for (const Ring& r : p.rings) {
        json ring = json::array();
        for (const Vec2& v : r) ring.push_back(point_json(v, transform));
        if (!r.empty()) ring.push_back(point_json(r.front(), transform));
        rings.push_back(std::move(ring));
      }
      f["geometry"] = {{"type", "Polygon"}, {"coordinates", std::move(rings)}};
    }
    f["properties"] = {{"kind", std::string(to_string(p.kind))}};
    if (p.score) {
      f["properties"]["score"] = *p.score;
    } else {
      f["properties"]["score"] = nullptr;
    }
    features.push_back(std::move(f));
  }
  doc["features"] = std::move(features);
  return doc.dump() + "\n";
}

std::vector<Proposal> proposals_from_geojson(const std::string& text) {
  const json doc = parse_json(text);
  std::vector<Proposal> out;
  try {
    if (doc.at("type") != "FeatureCollection") throw FormatError("expected a FeatureCollection");
    const auto t = transform_from(doc);
    for (const json& f : doc.at("features")) {
      Proposal p;
      const json& props = f.at("properties");
      p.kind = proposal_kind_from_string(props.at("kind").get<std::string>());
      if (props.contains("score") && !props["score"].is_null()) p.score = props["score"].get<double>();
      const json& geom = f.at("geometry");
      if (p.is_road()) {
        GraphAssembler asm_;
        for (const auto& line : lines_of(geom, t)) asm_.line(line, false);
        p.road = asm_.take();
      } else {
        if (geom.at("type") != "Polygon") throw FormatError("building proposals must be Polygons");
        for (const json& ring : geom.at("coordinates")) {
          Ring r;
          for (const json& c : ring) r.push_back(point_from(c, t));
          if (r.size() > 1 && r.front() == r.back()) r.pop_back();
          p.rings.push_back(std::move(r));
        }
      }
      p.update_bbox();
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed proposal GeoJSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("malformed proposal GeoJSON: ") + e.what());
  }
  return out;
}

void write_proposals(const std::filesystem::path& path, const std::vector<Proposal>& props,
                     const std::optional<GeoTransform>& transform) {
  write_text(path, proposals_to_geojson(props, transform));
}

std::vector<Proposal> read_proposals(const std::filesystem::path& path) {
  return proposals_from_geojson(read_text(path));
}

// ---------------------------------------------------------------------------

void write_netpbm(const std::filesystem::path& path, const RasterImage& img) {
  if (img.channels() != 1 && img.channels() != 3) throw std::invalid_argument("netpbm supports 1 or 3 channels");
  std::string header = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                       std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), img.data().begin(), img.data().end());
  write_bytes(path, bytes);
}

RasterImage read_netpbm(const std::filesystem::path& path, GeoTransform transform) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto token = [&] {
    skip_space();
    std::string s;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) s.push_back(static_cast<char>(bytes[pos++]));
    return s;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw FormatError(path.string() + ": not a binary PGM/PPM file");
  std::uint32_t w = 0, h = 0, maxval = 0;
  try {
    w = static_cast<std::uint32_t>(std::stoul(token()));
    h = static_cast<std::uint32_t>(std::stoul(token()));
    maxval = static_cast<std::uint32_t>(std::stoul(token()));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed netpbm header");
  }
  if (maxval != 255) throw FormatError(path.string() + ": only 8-bit netpbm is supported");
  ++pos;  // single whitespace after maxval
  const std::uint32_t c = magic == "P5" ? 1 : 3;
  const std::size_t n = static_cast<std::size_t>(w) * h * c;
  if (bytes.size() < pos + n) throw FormatError(path.string() + ": truncated netpbm payload");
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return RasterImage(h, w, c, transform, std::move(data));
}

// ---------------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace mapupdate::io
