#include "reef/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "reef/error.hpp"
#include "reef/textio.hpp"

namespace reef {

using json = nlohmann::json;
namespace tio = textio;

bool operator==(const DetectionRecord& a, const DetectionRecord& b) {
  return a.frame == b.frame && a.camera == b.camera && a.bbox == b.bbox &&
         a.confidence == b.confidence && a.label == b.label &&
         a.polygon == b.polygon;
}

// ---- taxonomy ---------------------------------------------------------------

std::string_view to_string(TaxonLevel level) {
  switch (level) {
    case TaxonLevel::kSpecies: return "species";
    case TaxonLevel::kMultiSpeciesGroup: return "multi_species_group";
    case TaxonLevel::kGenus: return "genus";
    case TaxonLevel::kFamily: return "family";
  }
  return "species";
}

std::optional<TaxonLevel> parse_taxon_level(std::string_view text) {
  if (text == "species") return TaxonLevel::kSpecies;
  if (text == "multi_species_group") return TaxonLevel::kMultiSpeciesGroup;
  if (text == "genus") return TaxonLevel::kGenus;
  if (text == "family") return TaxonLevel::kFamily;
  return std::nullopt;
}

bool operator==(const SpeciesRecord& a, const SpeciesRecord& b) {
  return a.label == b.label && a.level == b.level && a.members == b.members &&
         a.lw_a == b.lw_a && a.lw_b == b.lw_b &&
         a.max_length_cm == b.max_length_cm;
}

Taxonomy::Taxonomy(std::vector<SpeciesRecord> records) {
  for (auto& r : records) {
    if (r.label.empty()) throw ValidationError("label", "empty class label");
    if (r.label == kUnidentifiedLabel || r.label == kFishLabel)
      throw ValidationError("label", "'" + r.label + "' is a reserved label");
    if (records_.count(r.label))
      throw ValidationError("label", "duplicate class label '" + r.label + "'");
    if (r.is_species()) {
      if (r.members.empty()) r.members = {r.label};
      if (r.members.size() != 1 || r.members.front() != r.label)
        throw ValidationError(
            "members", "species '" + r.label + "' must list exactly itself");
    } else if (r.members.empty()) {
      throw ValidationError("members", "higher taxon '" + r.label +
                                           "' must list at least one member");
    }
    for (auto* value : {&r.lw_a, &r.lw_b, &r.max_length_cm}) {
      if (*value && !(**value > 0.0))
        throw ValidationError("lw_a/lw_b/max_length_cm",
                              "non-positive parameter for '" + r.label + "'");
    }
    if (r.lw_b && (*r.lw_b < 2.5 || *r.lw_b > 3.5))
      warnings_.push_back("length-weight exponent of '" + r.label +
                          "' outside [2.5, 3.5]: " + tio::format_double(*r.lw_b));
    std::string key = r.label;
    records_.emplace(std::move(key), std::move(r));
  }
  for (const auto& [label, r] : records_) {
    if (r.is_species()) continue;
    for (const auto& m : r.members) {
      auto it = records_.find(m);
      if (it == records_.end())
        throw ValidationError("members", "'" + label +
                                             "' names unknown member '" + m + "'");
      if (!it->second.is_species())
        throw ValidationError("members", "member '" + m + "' of '" + label +
                                             "' is not a species entry");
    }
  }
}

bool Taxonomy::contains(std::string_view label) const {
  return records_.find(label) != records_.end();
}

const SpeciesRecord* Taxonomy::find(std::string_view label) const {
  auto it = records_.find(label);
  return it == records_.end() ? nullptr : &it->second;
}

const SpeciesRecord& Taxonomy::at(std::string_view label) const {
  if (const auto* r = find(label)) return *r;
  throw ValidationError("label",
                        "class '" + std::string(label) + "' not in species table");
}

bool Taxonomy::is_finer(std::string_view fine, std::string_view coarse) const {
  if (fine == coarse) return false;
  const auto* f = find(fine);
  const auto* c = find(coarse);
  if (!f || !c || c->is_species()) return false;
  if (f->members.size() >= c->members.size()) return false;
  std::set<std::string_view> pool(c->members.begin(), c->members.end());
  return std::all_of(f->members.begin(), f->members.end(),
                     [&](const std::string& m) { return pool.count(m) > 0; });
}

namespace ingest {
namespace {

std::string line_prefix(std::size_t line) {
  return "line " + std::to_string(line) + ": ";
}

double require_number(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError(key, line_prefix(line) + "missing field");
  if (!it->is_number())
    throw ValidationError(key, line_prefix(line) + "expected a number");
  double v = it->get<double>();
  if (!std::isfinite(v))
    throw ValidationError(key, line_prefix(line) + "non-finite value");
  return v;
}

double number_of(const json& j, const std::string& field, std::size_t line) {
  if (!j.is_number())
    throw ValidationError(field, line_prefix(line) + "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v))
    throw ValidationError(field, line_prefix(line) + "non-finite value");
  return v;
}

// Clamps `v` into [0, limit] when it is at most 1 px outside.
double clamp_coordinate(double v, double limit, const char* field,
                        std::size_t line) {
  if (v >= 0.0 && v <= limit) return v;
  if (v >= -1.0 && v < 0.0) return 0.0;
  if (v > limit && v <= limit + 1.0) return limit;
  throw ValidationError(field, line_prefix(line) + "coordinate " +
                                   tio::format_double(v) +
                                   " outside the image");
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                        const Vec2& q2) {
  double d1 = cross(q1, q2, p1), d2 = cross(q1, q2, p2);
  double d3 = cross(p1, p2, q1), d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(p1, q1, q2)) return true;
  if (d2 == 0 && on_segment(p2, q1, q2)) return true;
  if (d3 == 0 && on_segment(q1, p1, p2)) return true;
  if (d4 == 0 && on_segment(q2, p1, p2)) return true;
  return false;
}

bool is_simple_polygon(const Polygon& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    if (poly[i] == poly[(i + 1) % n]) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) {
        // Adjacent edges share one vertex; they must not overlap.
        const Vec2& shared = (j == i + 1) ? b : a;
        const Vec2& other_i = (j == i + 1) ? a : b;
        const Vec2& other_j = (j == i + 1) ? poly[(j + 1) % n] : poly[j];
        if (cross(shared, other_i, other_j) == 0 &&
            (other_i - shared).dot(other_j - shared) > 0)
          return false;
        continue;
      }
      if (segments_intersect(a, b, poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

std::string encode_point_list(const Polygon& poly) {
  std::string s = "[";
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (i) s += ',';
    s += '[' + tio::format_double(poly[i].x()) + ',' +
         tio::format_double(poly[i].y()) + ']';
  }
  return s + ']';
}

std::string encode_bbox(const BBox& b) {
  return "[" + tio::format_double(b.x0) + "," + tio::format_double(b.y0) +
         "," + tio::format_double(b.x1) + "," + tio::format_double(b.y1) + "]";
}

BBox decode_bbox(const json& j, std::size_t line) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError("bbox", line_prefix(line) + "expected [x0,y0,x1,y1]");
  return {number_of(j[0], "bbox", line), number_of(j[1], "bbox", line),
          number_of(j[2], "bbox", line), number_of(j[3], "bbox", line)};
}

Polygon decode_polygon(const json& j, std::size_t line) {
  if (!j.is_array())
    throw ValidationError("poly", line_prefix(line) + "expected [[x,y],...]");
  Polygon poly;
  poly.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_array() || v.size() != 2)
      throw ValidationError("poly", line_prefix(line) + "vertex must be [x,y]");
    poly.emplace_back(number_of(v[0], "poly", line), number_of(v[1], "poly", line));
  }
  return poly;
}

json parse_json_line(const std::string& text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("malformed JSON: ") + e.what());
  }
}

std::size_t emit(std::ostream& out, const std::string& data) {
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed");
  return data.size();
}

std::string opt_number(const std::optional<double>& v) {
  return v ? tio::format_double(*v) : "NA";
}

std::optional<double> parse_opt_number(const std::string& field,
                                       const char* name, std::size_t line) {
  auto t = tio::trim(field);
  if (t.empty() || t == "NA") return std::nullopt;
  auto v = tio::parse_double(t);
  if (!v) throw ValidationError(name, line_prefix(line) + "non-numeric value '" +
                                          std::string(t) + "'");
  return v;
}

double parse_number_field(const std::string& field, const char* name,
                          std::size_t line) {
  auto v = parse_opt_number(field, name, line);
  if (!v) throw ValidationError(name, line_prefix(line) + "missing value");
  return *v;
}

long long parse_int_field(const std::string& field, const char* name,
                          std::size_t line) {
  auto v = tio::parse_int(field);
  if (!v) throw ValidationError(name, line_prefix(line) + "expected an integer");
  return *v;
}

// Reads CSV data lines after checking the header. Calls fn(fields, line).
template <typename Fn>
void for_each_csv_row(std::istream& in, std::string_view header,
                      std::size_t ncols, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  bool seen_header = false;
  while (std::getline(in, text)) {
    ++line;
    auto t = tio::trim(text);
    if (t.empty()) continue;
    if (!seen_header) {
      if (t != header)
        throw ParseError(line, "unexpected header, expected '" +
                                   std::string(header) + "'");
      seen_header = true;
      continue;
    }
    auto fields = tio::split(t, ',');
    if (fields.size() != ncols)
      throw ParseError(line, "expected " + std::to_string(ncols) +
                                 " fields, got " + std::to_string(fields.size()));
    for (auto& f : fields) f = std::string(tio::trim(f));
    fn(fields, line);
  }
  if (!seen_header) throw ParseError(line + 1, "missing header");
}

void check_clip_id(const std::string& id) {
  if (id.empty()) throw ValidationError("clip_id", "empty clip id");
  if (id.find_first_of(",/\\\n\r\"") != std::string::npos)
    throw ValidationError("clip_id", "clip id '" + id +
                                         "' contains a reserved character");
}

void check_label(const std::string& label, const char* field) {
  if (label.empty() || label.find_first_of(",;\n\r\"") != std::string::npos)
    throw ValidationError(field, "label '" + label +
                                     "' is empty or contains a reserved character");
}

}  // namespace

// ---- detections ---------------------------------------------------------------

void validate_detection(DetectionRecord& r, ImageSize image) {
  const double w = image.width, h = image.height;
  auto& b = r.bbox;
  b.x0 = clamp_coordinate(b.x0, w, "bbox", 0);
  b.x1 = clamp_coordinate(b.x1, w, "bbox", 0);
  b.y0 = clamp_coordinate(b.y0, h, "bbox", 0);
  b.y1 = clamp_coordinate(b.y1, h, "bbox", 0);
  if (!(b.x0 < b.x1) || !(b.y0 < b.y1))
    throw ValidationError("bbox", "requires x0 < x1 and y0 < y1");
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0))
    throw ValidationError("conf", "confidence outside [0, 1]");
  if (r.label.empty()) throw ValidationError("label", "empty label");
  if (r.frame < 0) throw ValidationError("frame", "negative frame index");
  if (r.polygon) {
    auto& poly = *r.polygon;
    if (poly.size() < 3)
      throw ValidationError("poly", "polygon needs at least 3 vertices");
    for (auto& v : poly) {
      v.x() = clamp_coordinate(v.x(), w, "poly", 0);
      v.y() = clamp_coordinate(v.y(), h, "poly", 0);
    }
    // Clamping can collapse neighbouring vertices onto the border.
    poly.erase(std::unique(poly.begin(), poly.end()), poly.end());
    while (poly.size() > 1 && poly.front() == poly.back()) poly.pop_back();
    if (poly.size() < 3)
      throw ValidationError("poly", "polygon needs at least 3 distinct vertices");
    if (!is_simple_polygon(poly))
      throw ValidationError("poly", "polygon is not simple");
  }
}

FrameDetections parse_detections(std::istream& in, ImageSize image) {
  if (image.width <= 0 || image.height <= 0)
    throw ValidationError("image_size", "image size must be positive");
  FrameDetections frames;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (tio::trim(text).empty()) continue;
    json j = parse_json_line(text, line);
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    DetectionRecord r;
    auto fit = j.find("frame");
    if (fit == j.end() || !fit->is_number_integer())
      throw ValidationError("frame", line_prefix(line) + "missing or non-integer");
    r.frame = fit->get<FrameIndex>();
    auto cit = j.find("cam");
    if (cit == j.end() || !cit->is_string())
      throw ValidationError("cam", line_prefix(line) + "missing or non-string");
    const auto& cam = cit->get_ref<const std::string&>();
    if (cam == "left") r.camera = CameraSide::kLeft;
    else if (cam == "right") r.camera = CameraSide::kRight;
    else throw ValidationError("cam", line_prefix(line) + "expected left or right");
    auto bit = j.find("bbox");
    if (bit == j.end()) throw ValidationError("bbox", line_prefix(line) + "missing field");
    r.bbox = decode_bbox(*bit, line);
    r.confidence = require_number(j, "conf", line);
    auto lit = j.find("label");
    if (lit == j.end() || !lit->is_string())
      throw ValidationError("label", line_prefix(line) + "missing or non-string");
    r.label = lit->get<std::string>();
    auto pit = j.find("poly");
    if (pit != j.end() && !pit->is_null()) r.polygon = decode_polygon(*pit, line);
    try {
      validate_detection(r, image);
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), line_prefix(line) + e.what());
    }
    frames[r.frame].push_back(std::move(r));
  }
  return frames;
}

std::string encode_detection(const DetectionRecord& r) {
  std::string s = "{\"frame\":" + std::to_string(r.frame) + ",\"cam\":\"" +
                  std::string(to_string(r.camera)) + "\",\"bbox\":" +
                  encode_bbox(r.bbox) + ",\"conf\":" +
                  tio::format_double(r.confidence) +
                  ",\"label\":" + json(r.label).dump();
  if (r.polygon) s += ",\"poly\":" + encode_point_list(*r.polygon);
  return s + "}";
}

std::size_t serialize_detections(const FrameDetections& frames,
                                 std::ostream& out) {
  std::string data;
  for (const auto& [frame, records] : frames)
    for (const auto& r : records) data += encode_detection(r) + "\n";
  return emit(out, data);
}

// ---- calibration --------------------------------------------------------------

namespace {

CameraModel parse_camera(const json& j, const std::string& side,
                         ImageSize image) {
  if (!j.is_object()) throw ValidationError(side, "expected an object");
  CameraModel cam;
  auto get = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number())
      throw ValidationError(side + "." + key, "missing or non-numeric");
    return it->get<double>();
  };
  cam.fx = get("fx");
  cam.fy = get("fy");
  cam.cx = get("cx");
  cam.cy = get("cy");
  auto dit = j.find("dist");
  if (dit != j.end()) {
    if (!dit->is_array() || dit->size() != 5)
      throw ValidationError(side + ".dist", "expected 5 coefficients");
    for (int i = 0; i < 5; ++i) {
      if (!(*dit)[i].is_number())
        throw ValidationError(side + ".dist", "non-numeric coefficient");
      cam.dist[i] = (*dit)[i].get<double>();
    }
  }
  cam.image = image;
  return cam;
}

json camera_json(const CameraModel& c) {
  json j = json::object();
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["dist"] = std::vector<double>(c.dist.begin(), c.dist.end());
  return j;
}

}  // namespace

StereoRig parse_calibration(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("malformed calibration JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("", "calibration must be an object");
  ImageSize image;
  auto iit = j.find("image_size");
  if (iit == j.end() || !iit->is_array() || iit->size() != 2 ||
      !(*iit)[0].is_number_integer() || !(*iit)[1].is_number_integer())
    throw ValidationError("image_size", "expected [width, height]");
  image = {(*iit)[0].get<int>(), (*iit)[1].get<int>()};
  if (image.width <= 0 || image.height <= 0)
    throw ValidationError("image_size", "must be positive");

  StereoRig rig;
  for (const char* side : {"left", "right"}) {
    auto it = j.find(side);
    if (it == j.end()) throw ValidationError(side, "missing camera");
    (std::string(side) == "left" ? rig.left : rig.right) =
        parse_camera(*it, side, image);
  }
  auto rit = j.find("R");
  if (rit == j.end() || !rit->is_array() || rit->size() != 3)
    throw ValidationError("R", "expected a 3x3 matrix");
  for (int r = 0; r < 3; ++r) {
    const auto& row = (*rit)[r];
    if (!row.is_array() || row.size() != 3)
      throw ValidationError("R", "expected a 3x3 matrix");
    for (int c = 0; c < 3; ++c) {
      if (!row[c].is_number()) throw ValidationError("R", "non-numeric entry");
      rig.rotation(r, c) = row[c].get<double>();
    }
  }
  auto tit = j.find("t");
  if (tit == j.end() || !tit->is_array() || tit->size() != 3)
    throw ValidationError("t", "expected a 3-vector");
  for (int i = 0; i < 3; ++i) {
    if (!(*tit)[i].is_number()) throw ValidationError("t", "non-numeric entry");
    rig.t[i] = (*tit)[i].get<double>();
  }
  validate_rig(rig);
  return rig;
}

void serialize_calibration(const StereoRig& rig, std::ostream& out) {
  json j = json::object();
  j["image_size"] = {rig.left.image.width, rig.left.image.height};
  j["left"] = camera_json(rig.left);
  j["right"] = camera_json(rig.right);
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    r.push_back({rig.rotation(i, 0), rig.rotation(i, 1), rig.rotation(i, 2)});
  j["R"] = r;
  j["t"] = {rig.t[0], rig.t[1], rig.t[2]};
  emit(out, j.dump(2) + "\n");
}

// ---- species table ------------------------------------------------------------

namespace {
constexpr std::string_view kSpeciesHeader =
    "label,level,members,lw_a,lw_b,max_length_cm";
}

Taxonomy parse_species_table(std::istream& in) {
  std::vector<SpeciesRecord> records;
  std::set<std::string> seen;
  for_each_csv_row(in, kSpeciesHeader, 6, [&](const auto& f, std::size_t line) {
    SpeciesRecord r;
    r.label = f[0];
    try {
      check_label(r.label, "label");
    } catch (const ValidationError& e) {
      throw ValidationError("label", line_prefix(line) + e.what());
    }
    if (!seen.insert(r.label).second)
      throw ValidationError("label", line_prefix(line) + "duplicate label '" +
                                         r.label + "'");
    auto level = parse_taxon_level(f[1]);
    if (!level)
      throw ValidationError("level", line_prefix(line) + "unknown level '" +
                                         f[1] + "'");
    r.level = *level;
    if (!f[2].empty())
      for (auto& m : tio::split(f[2], ';')) {
        auto t = std::string(tio::trim(m));
        if (t.empty())
          throw ValidationError("members", line_prefix(line) + "empty member");
        r.members.push_back(t);
      }
    r.lw_a = parse_opt_number(f[3], "lw_a", line);
    r.lw_b = parse_opt_number(f[4], "lw_b", line);
    r.max_length_cm = parse_opt_number(f[5], "max_length_cm", line);
    records.push_back(std::move(r));
  });
  return Taxonomy(std::move(records));
}

void serialize_species_table(const Taxonomy& taxonomy, std::ostream& out) {
  std::string data = std::string(kSpeciesHeader) + "\n";
  for (const auto& [label, r] : taxonomy.records()) {
    std::string members;
    for (std::size_t i = 0; i < r.members.size(); ++i)
      members += (i ? ";" : "") + r.members[i];
    data += tio::join({label, std::string(to_string(r.level)), members,
                       opt_number(r.lw_a), opt_number(r.lw_b),
                       opt_number(r.max_length_cm)}) +
            "\n";
  }
  emit(out, data);
}

// ---- manifest ------------------------------------------------------------------

ClipManifest parse_manifest(std::istream& in,
                            const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(1, std::string("malformed manifest JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("", "manifest must be an object");
  ClipManifest m;
  auto str = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) throw ValidationError(key, "missing field");
      return {};
    }
    if (!it->is_string()) throw ValidationError(key, "expected a string");
    return it->get<std::string>();
  };
  m.clip_id = str("clip_id", true);
  check_clip_id(m.clip_id);
  m.start_timestamp = str("start_timestamp", false);
  if (auto it = j.find("frame_rate"); it != j.end()) {
    if (!it->is_number()) throw ValidationError("frame_rate", "expected a number");
    m.frame_rate = it->get<double>();
  }
  if (!(m.frame_rate > 0)) throw ValidationError("frame_rate", "must be positive");
  auto fit = j.find("frame_count");
  if (fit == j.end() || !fit->is_number_integer())
    throw ValidationError("frame_count", "missing or non-integer");
  m.frame_count = fit->get<long long>();
  if (m.frame_count <= 0) throw ValidationError("frame_count", "must be positive");
  if (auto it = j.find("image_size"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
        !(*it)[1].is_number_integer())
      throw ValidationError("image_size", "expected [width, height]");
    m.image = {(*it)[0].get<int>(), (*it)[1].get<int>()};
  }
  if (m.image.width <= 0 || m.image.height <= 0)
    throw ValidationError("image_size", "must be positive");
  auto paths = [&](const char* key, bool required, auto&& assign) {
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) throw ValidationError(key, "missing field");
      return;
    }
    if (!it->is_object()) throw ValidationError(key, "expected {left, right}");
    for (int side = 0; side < 2; ++side) {
      const char* name = side == 0 ? "left" : "right";
      auto pit = it->find(name);
      if (pit == it->end() || !pit->is_string())
        throw ValidationError(std::string(key) + "." + name, "missing path");
      std::filesystem::path p = pit->get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      assign(side, p);
    }
  };
  paths("detections", true,
        [&](int side, const std::filesystem::path& p) { m.detections[side] = p; });
  paths("species_detections", false, [&](int side, const std::filesystem::path& p) {
    m.species_detections[side] = p;
  });
  if (auto it = j.find("turbidity"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw ValidationError("turbidity", "expected a number");
    m.turbidity = it->get<double>();
  }
  return m;
}

void serialize_manifest(const ClipManifest& m, std::ostream& out) {
  json j = json::object();
  j["clip_id"] = m.clip_id;
  j["start_timestamp"] = m.start_timestamp;
  j["frame_rate"] = m.frame_rate;
  j["frame_count"] = m.frame_count;
  j["image_size"] = {m.image.width, m.image.height};
  j["detections"] = {{"left", m.detections[0].string()},
                     {"right", m.detections[1].string()}};
  if (m.species_detections[0] && m.species_detections[1])
    j["species_detections"] = {{"left", m.species_detections[0]->string()},
                               {"right", m.species_detections[1]->string()}};
  if (m.turbidity) j["turbidity"] = *m.turbidity;
  emit(out, j.dump(2) + "\n");
}

ClipManifest load_manifest(const std::filesystem::path& path) {
  auto in = tio::open_input(path);
  return parse_manifest(in, path.parent_path());
}

// ---- tracks --------------------------------------------------------------------

std::size_t write_tracks(const std::vector<Track>& tracks, std::ostream& out) {
  std::string data;
  for (const auto& t : tracks) {
    for (const auto& o : t.observations) {
      data += "{\"track_id\":" + std::to_string(t.id) +
              ",\"frame\":" + std::to_string(o.frame) +
              ",\"bbox\":" + encode_bbox(o.bbox) +
              ",\"label\":" + json(t.class_label).dump() +
              ",\"conf\":" + tio::format_double(o.confidence);
      if (o.polygon) data += ",\"poly\":" + encode_point_list(*o.polygon);
      data += "}\n";
    }
  }
  return emit(out, data);
}

std::vector<Track> read_tracks(std::istream& in) {
  std::map<TrackId, Track> by_id;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (tio::trim(text).empty()) continue;
    json j = parse_json_line(text, line);
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    auto iit = j.find("track_id");
    if (iit == j.end() || !iit->is_number_integer())
      throw ValidationError("track_id", line_prefix(line) + "missing or non-integer");
    auto fit = j.find("frame");
    if (fit == j.end() || !fit->is_number_integer())
      throw ValidationError("frame", line_prefix(line) + "missing or non-integer");
    TrackObservation o;
    o.frame = fit->get<FrameIndex>();
    auto bit = j.find("bbox");
    if (bit == j.end()) throw ValidationError("bbox", line_prefix(line) + "missing field");
    o.bbox = decode_bbox(*bit, line);
    if (!(o.bbox.x0 < o.bbox.x1 && o.bbox.y0 < o.bbox.y1))
      throw ValidationError("bbox", line_prefix(line) + "requires x0 < x1 and y0 < y1");
    o.confidence = j.contains("conf") ? require_number(j, "conf", line) : 1.0;
    if (auto pit = j.find("poly"); pit != j.end() && !pit->is_null())
      o.polygon = decode_polygon(*pit, line);
    std::string label{kUnidentifiedLabel};
    if (auto lit = j.find("label"); lit != j.end()) {
      if (!lit->is_string())
        throw ValidationError("label", line_prefix(line) + "expected a string");
      label = lit->get<std::string>();
    }
    TrackId id = iit->get<TrackId>();
    auto [it, fresh] = by_id.try_emplace(id);
    Track& t = it->second;
    if (fresh) {
      t.id = id;
      t.class_label = label;
    } else if (t.class_label != label) {
      throw ValidationError("label", line_prefix(line) +
                                         "inconsistent label within track " +
                                         std::to_string(id));
    }
    t.observations.push_back(std::move(o));
  }
  std::vector<Track> tracks;
  for (auto& [id, t] : by_id) {
    std::stable_sort(t.observations.begin(), t.observations.end(),
                     [](const auto& a, const auto& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < t.observations.size(); ++i)
      if (t.observations[i].frame == t.observations[i - 1].frame)
        throw ValidationError("frame", "track " + std::to_string(id) +
                                           " has two observations on frame " +
                                           std::to_string(t.observations[i].frame));
    tracks.push_back(std::move(t));
  }
  return tracks;
}

// ---- individuals and points ---------------------------------------------------

namespace {
constexpr std::string_view kIndividualsHeader =
    "clip,left_id,right_id,label,n_samples,length_cm,weight_g,excluded";
constexpr std::string_view kPointsHeader = "clip,frame,left_id,right_id,x,y,z";
constexpr std::string_view kCommunityHeader =
    "clip,label,category,abundance,biomass_g";
constexpr std::string_view kIndexHeader =
    "clip,richness,abundance_total,biomass_g,median_distance_m,volume_m3";
}  // namespace

std::size_t write_individuals(const std::vector<Individual>& individuals,
                              std::ostream& out) {
  std::string data = std::string(kIndividualsHeader) + "\n";
  for (const auto& ind : individuals) {
    data += tio::join({ind.clip_id, std::to_string(ind.left_id),
                       std::to_string(ind.right_id), ind.class_label,
                       std::to_string(ind.length_samples.size()),
                       opt_number(ind.length_cm), opt_number(ind.weight_g),
                       ind.excluded ? "1" : "0"}) +
            "\n";
  }
  return emit(out, data);
}

std::vector<Individual> read_individuals(std::istream& in) {
  std::vector<Individual> out;
  for_each_csv_row(in, kIndividualsHeader, 8, [&](const auto& f, std::size_t line) {
    Individual ind;
    ind.clip_id = f[0];
    ind.left_id = parse_int_field(f[1], "left_id", line);
    ind.right_id = parse_int_field(f[2], "right_id", line);
    ind.class_label = f[3];
    auto n = parse_int_field(f[4], "n_samples", line);
    if (n < 0) throw ValidationError("n_samples", line_prefix(line) + "negative");
    // Per-frame samples are not serialized; placeholders keep the count.
    ind.length_samples.assign(static_cast<std::size_t>(n), LengthSample{0, 0.0});
    ind.length_cm = parse_opt_number(f[5], "length_cm", line);
    ind.weight_g = parse_opt_number(f[6], "weight_g", line);
    if (f[7] != "0" && f[7] != "1")
      throw ValidationError("excluded", line_prefix(line) + "expected 0 or 1");
    ind.excluded = f[7] == "1";
    out.push_back(std::move(ind));
  });
  return out;
}

std::size_t write_points(const std::vector<Individual>& individuals,
                         std::ostream& out) {
  std::string data = std::string(kPointsHeader) + "\n";
  for (const auto& ind : individuals)
    for (const auto& c : ind.centers)
      data += tio::join({ind.clip_id, std::to_string(c.frame),
                         std::to_string(ind.left_id), std::to_string(ind.right_id),
                         tio::format_double(c.position.x()),
                         tio::format_double(c.position.y()),
                         tio::format_double(c.position.z())}) +
              "\n";
  return emit(out, data);
}

void read_points(std::istream& in, std::vector<Individual>& individuals) {
  std::map<std::tuple<std::string, TrackId, TrackId>, Individual*> index;
  for (auto& ind : individuals)
    index[{ind.clip_id, ind.left_id, ind.right_id}] = &ind;
  for_each_csv_row(in, kPointsHeader, 7, [&](const auto& f, std::size_t line) {
    auto key = std::make_tuple(f[0], parse_int_field(f[2], "left_id", line),
                               parse_int_field(f[3], "right_id", line));
    auto it = index.find(key);
    if (it == index.end())
      throw ValidationError("left_id/right_id",
                            line_prefix(line) + "point row for unknown individual");
    CenterSample c;
    c.frame = parse_int_field(f[1], "frame", line);
    c.position = {parse_number_field(f[4], "x", line),
                  parse_number_field(f[5], "y", line),
                  parse_number_field(f[6], "z", line)};
    it->second->centers.push_back(c);
  });
}

std::vector<Vec3> read_point_cloud(std::istream& in) {
  std::vector<Vec3> cloud;
  for_each_csv_row(in, kPointsHeader, 7, [&](const auto& f, std::size_t line) {
    cloud.emplace_back(parse_number_field(f[4], "x", line),
                       parse_number_field(f[5], "y", line),
                       parse_number_field(f[6], "z", line));
  });
  return cloud;
}

// ---- summaries -----------------------------------------------------------------

std::size_t write_community(const ClipSummary& s, std::ostream& out) {
  std::map<std::string, std::pair<const char*, double>> rows;
  for (const auto& [label, n] : s.abundance) rows[label] = {"species", n};
  for (const auto& [label, n] : s.residual) {
    if (rows.count(label))
      throw InternalError("label '" + label + "' is both species and residual");
    rows[label] = {"residual", n};
  }
  std::string data = std::string(kCommunityHeader) + "\n";
  for (const auto& [label, row] : rows) {
    auto bit = s.biomass_by_label.find(label);
    double biomass = bit == s.biomass_by_label.end() ? 0.0 : bit->second;
    data += tio::join({s.clip_id, label, row.first, tio::format_double(row.second),
                       tio::format_double(biomass)}) +
            "\n";
  }
  return emit(out, data);
}

std::size_t write_index(const std::vector<ClipSummary>& summaries,
                        std::ostream& out) {
  std::string data = std::string(kIndexHeader) + "\n";
  for (const auto& s : summaries)
    data += tio::join({s.clip_id, std::to_string(s.richness),
                       tio::format_double(s.total_abundance()),
                       tio::format_double(s.biomass_g),
                       opt_number(s.median_distance_m), opt_number(s.volume_m3)}) +
            "\n";
  return emit(out, data);
}

std::vector<ClipSummary> read_summaries(std::istream& index,
                                        std::vector<std::istream*> community) {
  std::vector<ClipSummary> out;
  for_each_csv_row(index, kIndexHeader, 6, [&](const auto& f, std::size_t line) {
    ClipSummary s;
    s.clip_id = f[0];
    s.richness = static_cast<int>(parse_int_field(f[1], "richness", line));
    s.biomass_g = parse_number_field(f[3], "biomass_g", line);
    s.median_distance_m = parse_opt_number(f[4], "median_distance_m", line);
    s.volume_m3 = parse_opt_number(f[5], "volume_m3", line);
    out.push_back(std::move(s));
  });
  if (community.size() != out.size())
    throw ValidationError("community", "expected one community stream per clip");
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    for_each_csv_row(*community[i], kCommunityHeader, 5,
                     [&](const auto& f, std::size_t line) {
                       if (f[0] != s.clip_id)
                         throw ValidationError("clip", line_prefix(line) +
                                                           "clip id mismatch");
                       double n = parse_number_field(f[3], "abundance", line);
                       if (f[2] == "species") s.abundance[f[1]] = n;
                       else if (f[2] == "residual") s.residual[f[1]] = n;
                       else
                         throw ValidationError("category", line_prefix(line) +
                                                               "unknown category");
                       s.biomass_by_label[f[1]] =
                           parse_number_field(f[4], "biomass_g", line);
                     });
  }
  return out;
}

std::size_t write_summaries(const std::vector<ClipSummary>& summaries,
                            const std::filesystem::path& dir, bool allow_empty) {
  if (summaries.empty() && !allow_empty)
    throw Error(ErrorKind::kInvalidArgument, "no summaries to write");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
  std::size_t bytes = 0;
  for (const auto& s : summaries) {
    check_clip_id(s.clip_id);
    auto out = tio::open_output(dir / (s.clip_id + "_community.csv"));
    bytes += write_community(s, out);
  }
  auto out = tio::open_output(dir / "index.csv");
  bytes += write_index(summaries, out);
  return bytes;
}

}  // namespace ingest
}  // namespace reef
