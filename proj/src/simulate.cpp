#include "reef/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "reef/error.hpp"
#include "reef/ingest.hpp"
#include "reef/textio.hpp"

namespace reef {

using json = nlohmann::json;

namespace {

constexpr int kOutlineVertices = 32;

double fold(double v, double lo, double hi) {
  const double w = hi - lo;
  if (!(w > 0)) return lo;
  double m = std::fmod(v - lo, 2 * w);
  if (m < 0) m += 2 * w;
  return m <= w ? lo + m : lo + 2 * w - m;
}

// Sutherland-Hodgman against the axis-aligned image rectangle.
Polygon clip_to_image(const Polygon& poly, ImageSize image) {
  auto clip_edge = [](const Polygon& in, auto inside, auto intersect) {
    Polygon out;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Vec2& cur = in[i];
      const Vec2& prev = in[(i + in.size() - 1) % in.size()];
      const bool ci = inside(cur), pi = inside(prev);
      if (ci) {
        if (!pi) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pi) {
        out.push_back(intersect(prev, cur));
      }
    }
    return out;
  };
  const double W = image.width, H = image.height;
  Polygon p = poly;
  for (int axis = 0; axis < 2 && !p.empty(); ++axis) {
    const double hi = axis == 0 ? W : H;
    auto cut = [axis](double bound) {
      return [axis, bound](const Vec2& a, const Vec2& b) {
        const double s = (bound - a[axis]) / (b[axis] - a[axis]);
        Vec2 r = a + s * (b - a);
        r[axis] = bound;
        return r;
      };
    };
    p = clip_edge(p, [axis](const Vec2& v) { return v[axis] >= 0; }, cut(0.0));
    if (p.empty()) break;
    p = clip_edge(p, [axis, hi](const Vec2& v) { return v[axis] <= hi; }, cut(hi));
  }
  Polygon dedup;
  for (const auto& v : p)
    if (dedup.empty() || (v - dedup.back()).norm() > 1e-9) dedup.push_back(v);
  while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() <= 1e-9) dedup.pop_back();
  return dedup;
}

BBox polygon_bbox(const Polygon& p) {
  BBox b{p[0].x(), p[0].y(), p[0].x(), p[0].y()};
  for (const auto& v : p) {
    b.x0 = std::min(b.x0, v.x());
    b.y0 = std::min(b.y0, v.y());
    b.x1 = std::max(b.x1, v.x());
    b.y1 = std::max(b.y1, v.y());
  }
  return b;
}

Polygon box_ellipse(const BBox& b) {
  Polygon p;
  const Vec2 c = b.center();
  for (int k = 0; k < kOutlineVertices; ++k) {
    const double th = 2 * std::numbers::pi * k / kOutlineVertices;
    p.push_back({c.x() + 0.5 * b.width() * std::cos(th), c.y() + 0.5 * b.height() * std::sin(th)});
  }
  return p;
}

}  // namespace

StereoRig default_sim_rig(double focal, double baseline) {
  StereoRig rig;
  CameraModel cam;
  cam.fx = cam.fy = focal;
  cam.image = {3840, 2160};
  cam.cx = 1920;
  cam.cy = 1080;
  rig.left = cam;
  rig.right = cam;
  rig.rotation = Mat3::Identity();
  rig.t = Vec3(baseline, 0, 0);
  return rig;
}

std::vector<SpeciesRecord> default_sim_species() {
  auto species = [](std::string label, double a, double b) {
    SpeciesRecord r;
    r.label = label;
    r.members = {label};
    r.lw_a = a;
    r.lw_b = b;
    r.max_length_cm = 60;
    return r;
  };
  return {species("Acanthurus_sp", 0.0251, 3.0), species("Chromis_sp", 0.0148, 3.05),
          species("Scarus_sp", 0.0191, 2.98)};
}

SceneConfig default_scene_config() {
  SceneConfig c;
  c.rig = default_sim_rig();
  c.species = default_sim_species();
  return c;
}

std::optional<FishProjection> project_individual(const Vec3& head, const Vec3& tail,
                                                 double aspect, const StereoRig& rig,
                                                 CameraSide side) {
  const CameraModel& cam = rig.camera(side);
  const Vec3 center = 0.5 * (head + tail);
  const Vec3 axis = tail - head;
  const double length = axis.norm();
  if (!(length > 0) || !(aspect > 0)) return std::nullopt;
  const Vec3 u = axis / length;
  Vec3 w = Vec3(0, -1, 0) - u.dot(Vec3(0, -1, 0)) * u;
  if (w.norm() < 1e-9) w = Vec3(0, 0, 1) - u.z() * u;
  w.normalize();

  FishProjection out;
  const auto c = rig.project(center, side);
  if (!c || !cam.contains(*c)) return std::nullopt;
  out.center = *c;
  const double a = 0.5 * length, b = 0.5 * length / aspect;
  Polygon outline;
  for (int k = 0; k < kOutlineVertices; ++k) {
    const double th = 2 * std::numbers::pi * k / kOutlineVertices;
    const auto px = rig.project(center + a * std::cos(th) * u + b * std::sin(th) * w, side);
    if (!px) return std::nullopt;
    outline.push_back(*px);
  }
  const auto h = rig.project(head, side), t = rig.project(tail, side);
  if (!h || !t) return std::nullopt;
  out.head = *h;
  out.tail = *t;
  out.polygon = clip_to_image(outline, cam.image);
  if (out.polygon.size() < 3) return std::nullopt;
  out.bbox = polygon_bbox(out.polygon);
  if (!(out.bbox.width() > 0 && out.bbox.height() > 0)) return std::nullopt;
  return out;
}

SceneOutput simulate_scene(const SceneConfig& cfg) {
  validate_rig(cfg.rig);
  const auto in_unit = [](double v) { return v >= 0 && v <= 1; };
  if (!in_unit(cfg.noise.miss_rate)) throw ValidationError("noise.miss_rate", "must be in [0, 1]");
  if (!in_unit(cfg.noise.false_positive_rate))
    throw ValidationError("noise.false_positive_rate", "must be in [0, 1]");
  if (cfg.noise.pixel_sigma < 0) throw ValidationError("noise.pixel_sigma", "must be >= 0");
  if (cfg.n_fish < 0) throw ValidationError("n_fish", "must be >= 0");
  if (cfg.frame_count < 0) throw ValidationError("frame_count", "must be >= 0");
  if (!(cfg.frame_rate > 0)) throw ValidationError("frame_rate", "must be positive");
  if (!(cfg.length_min_m > 0) || cfg.length_max_m < cfg.length_min_m)
    throw ValidationError("length_range", "need 0 < min <= max");
  if (cfg.body_aspect < 3) throw ValidationError("body_aspect", "must be >= 3");
  std::vector<std::string> labels;
  for (const auto& s : cfg.species)
    if (s.is_species()) labels.push_back(s.label);
  if (cfg.n_fish > 0 && labels.empty())
    throw ValidationError("species", "need at least one species-level label");

  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto normal = [&](double sd) { return sd > 0 ? std::normal_distribution<double>(0, sd)(rng) : 0.0; };
  auto bernoulli = [&](double p) { return p > 0 && std::bernoulli_distribution(p)(rng); };

  struct Motion {
    Vec3 start;
    Vec3 velocity;
    Vec3 axis;
    double phase;
    double lane_slope;
  };
  SceneOutput out;
  std::vector<Motion> motion;
  const CameraModel& left = cfg.rig.left;
  for (int k = 0; k < cfg.n_fish; ++k) {
    FishTruth f;
    f.id = k + 1;
    f.label = labels[static_cast<std::size_t>(k) % labels.size()];
    f.length_m = uniform(cfg.length_min_m, cfg.length_max_m);
    Motion m;
    m.start = {uniform(cfg.box_min.x(), cfg.box_max.x()), uniform(cfg.box_min.y(), cfg.box_max.y()),
               uniform(cfg.box_min.z(), cfg.box_max.z())};
    const double heading = uniform(-cfg.heading_spread_deg, cfg.heading_spread_deg) * std::numbers::pi / 180;
    const double sign = uniform(0, 1) < 0.5 ? -1.0 : 1.0;
    const double speed = uniform(cfg.speed_min, cfg.speed_max);
    m.axis = Vec3(sign * std::cos(heading), 0, std::sin(heading));
    m.velocity = speed * m.axis;
    m.phase = uniform(0, 2 * std::numbers::pi);
    const double row = left.image.height * (k + 0.5) / cfg.n_fish;
    m.lane_slope = (row - left.cy) / left.fy;
    motion.push_back(m);
    out.fish.push_back(std::move(f));
  }

  for (int side = 0; side < 2; ++side)
    for (const auto& f : out.fish) out.gt_tracks[side].push_back(Track{f.id, {}, f.label});

  const NoiseConfig& nz = cfg.noise;
  auto confidence = [&]() { return std::clamp(nz.confidence_mean + normal(nz.confidence_sd), 0.01, 1.0); };

  for (int fr = 0; fr < cfg.frame_count; ++fr) {
    const double t = fr / cfg.frame_rate;
    for (std::size_t k = 0; k < out.fish.size(); ++k) {
      const Motion& m = motion[k];
      FishTruth& f = out.fish[k];
      const double wobble = cfg.wobble_amplitude_m *
                            std::sin(2 * std::numbers::pi * t / cfg.wobble_period_s + m.phase);
      Vec3 c = m.start + t * m.velocity;
      if (cfg.row_lanes) {
        c.z() += wobble;
        c.x() = fold(c.x(), cfg.box_min.x(), cfg.box_max.x());
        c.z() = fold(c.z(), cfg.box_min.z(), cfg.box_max.z());
        c.y() = m.lane_slope * c.z();
      } else {
        c.y() += wobble;
        for (int d = 0; d < 3; ++d) c[d] = fold(c[d], cfg.box_min[d], cfg.box_max[d]);
      }
      const Vec3 half = 0.5 * f.length_m * m.axis;
      f.path.push_back({fr, c, c - half, c + half});
    }

    for (int side = 0; side < 2; ++side) {
      const auto cs = static_cast<CameraSide>(side);
      const ImageSize img = cfg.rig.camera(cs).image;
      auto clamp_pt = [&](Vec2 p) {
        p.x() = std::clamp(p.x(), 0.0, static_cast<double>(img.width));
        p.y() = std::clamp(p.y(), 0.0, static_cast<double>(img.height));
        return p;
      };
      for (std::size_t k = 0; k < out.fish.size(); ++k) {
        const FishFrame& ff = out.fish[k].path.back();
        const auto proj = project_individual(ff.head, ff.tail, cfg.body_aspect, cfg.rig, cs);
        if (!proj) continue;
        out.gt_tracks[side][k].observations.push_back({fr, proj->bbox, 1.0, proj->polygon});
        if (bernoulli(nz.miss_rate)) continue;

        DetectionRecord det;
        det.frame = fr;
        det.camera = cs;
        det.label = kFishLabel;
        det.confidence = confidence();
        Vec2 p0 = clamp_pt(Vec2(proj->bbox.x0 + normal(nz.pixel_sigma), proj->bbox.y0 + normal(nz.pixel_sigma)));
        Vec2 p1 = clamp_pt(Vec2(proj->bbox.x1 + normal(nz.pixel_sigma), proj->bbox.y1 + normal(nz.pixel_sigma)));
        det.bbox = {std::min(p0.x(), p1.x()), std::min(p0.y(), p1.y()), std::max(p0.x(), p1.x()),
                    std::max(p0.y(), p1.y())};
        Polygon poly;
        for (const auto& v : proj->polygon)
          poly.push_back(clamp_pt(v + Vec2(normal(nz.pixel_sigma), normal(nz.pixel_sigma))));
        det.polygon = std::move(poly);
        try {
          ingest::validate_detection(det, img);
        } catch (const ValidationError&) {
          continue;  // noise folded the outline onto itself
        }
        DetectionRecord sp;
        sp.frame = fr;
        sp.camera = cs;
        sp.bbox = det.bbox;
        sp.label = out.fish[k].label;
        sp.confidence = cfg.species_confidence;
        out.segmentation[side][fr].push_back(std::move(det));
        out.species[side][fr].push_back(std::move(sp));
      }
      if (bernoulli(nz.false_positive_rate)) {
        const double w = uniform(40, 400), h = w / uniform(2, 5);
        const double x0 = uniform(0, img.width - w), y0 = uniform(0, img.height - h);
        DetectionRecord fp;
        fp.frame = fr;
        fp.camera = cs;
        fp.label = kFishLabel;
        fp.confidence = confidence();
        fp.bbox = {x0, y0, x0 + w, y0 + h};
        fp.polygon = box_ellipse(fp.bbox);
        out.segmentation[side][fr].push_back(std::move(fp));
      }
    }
  }
  for (int side = 0; side < 2; ++side) {
    auto& tracks = out.gt_tracks[side];
    tracks.erase(std::remove_if(tracks.begin(), tracks.end(),
                                [](const Track& tr) { return tr.observations.empty(); }),
                 tracks.end());
  }
  return out;
}

// ---- configuration documents -----------------------------------------------

namespace {

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(field, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

SceneConfig parse_scene_config(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("scene", std::string("malformed JSON: ") + e.what());
  }
  SceneConfig c = default_scene_config();
  try {
    if (j.contains("rig")) {
      std::istringstream rs(j["rig"].dump());
      c.rig = ingest::parse_calibration(rs);
    }
    if (j.contains("species_table")) {
      std::istringstream ss(j["species_table"].get<std::string>());
      const Taxonomy tax = ingest::parse_species_table(ss);
      c.species.clear();
      for (const auto& [label, rec] : tax.records()) c.species.push_back(rec);
    }
    c.n_fish = j.value("n_fish", c.n_fish);
    c.length_min_m = j.value("length_min_m", c.length_min_m);
    c.length_max_m = j.value("length_max_m", c.length_max_m);
    c.speed_min = j.value("speed_min", c.speed_min);
    c.speed_max = j.value("speed_max", c.speed_max);
    c.body_aspect = j.value("body_aspect", c.body_aspect);
    c.heading_spread_deg = j.value("heading_spread_deg", c.heading_spread_deg);
    c.wobble_amplitude_m = j.value("wobble_amplitude_m", c.wobble_amplitude_m);
    c.wobble_period_s = j.value("wobble_period_s", c.wobble_period_s);
    if (j.contains("box_min")) c.box_min = vec3_from(j["box_min"], "box_min");
    if (j.contains("box_max")) c.box_max = vec3_from(j["box_max"], "box_max");
    c.row_lanes = j.value("row_lanes", c.row_lanes);
    c.frame_rate = j.value("frame_rate", c.frame_rate);
    c.frame_count = j.value("frame_count", c.frame_count);
    c.species_confidence = j.value("species_confidence", c.species_confidence);
    c.seed = j.value("seed", c.seed);
    if (j.contains("noise")) {
      const json& n = j["noise"];
      c.noise.pixel_sigma = n.value("pixel_sigma", c.noise.pixel_sigma);
      c.noise.miss_rate = n.value("miss_rate", c.noise.miss_rate);
      c.noise.false_positive_rate = n.value("false_positive_rate", c.noise.false_positive_rate);
      c.noise.confidence_mean = n.value("confidence_mean", c.noise.confidence_mean);
      c.noise.confidence_sd = n.value("confidence_sd", c.noise.confidence_sd);
    }
  } catch (const json::exception& e) {
    throw ValidationError("scene", e.what());
  }
  return c;
}

void serialize_scene_config(const SceneConfig& c, std::ostream& out) {
  std::ostringstream rig, species;
  ingest::serialize_calibration(c.rig, rig);
  ingest::serialize_species_table(Taxonomy(c.species), species);
  json j;
  j["rig"] = json::parse(rig.str());
  j["species_table"] = species.str();
  j["n_fish"] = c.n_fish;
  j["length_min_m"] = c.length_min_m;
  j["length_max_m"] = c.length_max_m;
  j["speed_min"] = c.speed_min;
  j["speed_max"] = c.speed_max;
  j["body_aspect"] = c.body_aspect;
  j["heading_spread_deg"] = c.heading_spread_deg;
  j["wobble_amplitude_m"] = c.wobble_amplitude_m;
  j["wobble_period_s"] = c.wobble_period_s;
  j["box_min"] = vec3_json(c.box_min);
  j["box_max"] = vec3_json(c.box_max);
  j["row_lanes"] = c.row_lanes;
  j["frame_rate"] = c.frame_rate;
  j["frame_count"] = c.frame_count;
  j["species_confidence"] = c.species_confidence;
  j["seed"] = c.seed;
  j["noise"] = {{"pixel_sigma", c.noise.pixel_sigma},
                {"miss_rate", c.noise.miss_rate},
                {"false_positive_rate", c.noise.false_positive_rate},
                {"confidence_mean", c.noise.confidence_mean},
                {"confidence_sd", c.noise.confidence_sd}};
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed to write scene config");
}

SceneFiles write_scene(const SceneOutput& scene, const SceneConfig& cfg,
                       const std::string& clip_id, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  auto write = [&](const std::string& name, auto&& body) {
    const fs::path p = dir / name;
    auto out = textio::open_output(p);
    body(out);
    out.close();
    if (!out) throw IoError("failed to write " + p.string());
    return p;
  };
  const char* side_name[2] = {"left", "right"};
  ingest::ClipManifest m;
  m.clip_id = clip_id;
  m.start_timestamp = "1970-01-01T00:00:00";
  m.frame_rate = cfg.frame_rate;
  m.frame_count = cfg.frame_count;
  m.image = cfg.rig.left.image;
  for (int s = 0; s < 2; ++s) {
    const std::string seg = clip_id + "_" + side_name[s] + ".jsonl";
    const std::string sp = clip_id + "_species_" + side_name[s] + ".jsonl";
    write(seg, [&](std::ostream& o) { ingest::serialize_detections(scene.segmentation[s], o); });
    write(sp, [&](std::ostream& o) { ingest::serialize_detections(scene.species[s], o); });
    write(clip_id + "_gt_" + side_name[s] + ".jsonl",
          [&](std::ostream& o) { ingest::write_tracks(scene.gt_tracks[s], o); });
    m.detections[s] = seg;
    m.species_detections[s] = sp;
  }
  SceneFiles files;
  files.manifest = write(clip_id + "_manifest.json",
                         [&](std::ostream& o) { ingest::serialize_manifest(m, o); });
  files.calibration = write("calibration.json",
                            [&](std::ostream& o) { ingest::serialize_calibration(cfg.rig, o); });
  files.species_table = write("species.csv", [&](std::ostream& o) {
    ingest::serialize_species_table(Taxonomy(cfg.species), o);
  });
  write(clip_id + "_truth.json", [&](std::ostream& o) {
    json fish = json::array();
    for (const auto& f : scene.fish)
      fish.push_back({{"id", f.id}, {"label", f.label}, {"length_m", f.length_m},
                      {"frames", f.path.size()}});
    o << json{{"clip_id", clip_id}, {"seed", cfg.seed}, {"fish", fish}}.dump(2) << '\n';
  });
  return files;
}

}  // namespace reef
