#include "reef/reef.h"

#include <cmath>
#include <cstring>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "reef/community.hpp"
#include "reef/config.hpp"
#include "reef/error.hpp"
#include "reef/evalmetrics.hpp"
#include "reef/hull.hpp"
#include "reef/ingest.hpp"
#include "reef/pipeline.hpp"
#include "reef/simulate.hpp"
#include "reef/stereo.hpp"
#include "reef/textio.hpp"

struct reef_context {
  std::string config_text;
  std::filesystem::path base_dir;
  std::vector<std::string> overrides;
  std::string last_error;
  bool logging = false;

  reef::PipelineConfig config() const {
    return reef::parse_pipeline_config(config_text, overrides, base_dir);
  }
};

struct reef_rig {
  reef::RectifiedRig rectified;
};

namespace {

namespace fs = std::filesystem;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename F>
reef_status guarded(reef_context* ctx, F&& body) {
  if (!ctx) return REEF_ERR_INVALID_ARGUMENT;
  ctx->last_error.clear();
  try {
    body();
    return REEF_OK;
  } catch (const reef::Error& e) {
    ctx->last_error = e.what();
    return static_cast<reef_status>(e.kind());
  } catch (const std::bad_alloc&) {
    ctx->last_error = "out of memory";
    return REEF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    ctx->last_error = std::string("internal error: ") + e.what();
    return REEF_ERR_INTERNAL;
  } catch (...) {
    ctx->last_error = "internal error";
    return REEF_ERR_INTERNAL;
  }
}

void require_arg(const void* p, const char* name) {
  if (!p) throw reef::Error(reef::ErrorKind::kInvalidArgument, std::string(name) + " is required");
}

template <typename F>
void write_file(const fs::path& path, F&& body) {
  auto out = reef::textio::open_output(path);
  body(out);
  out.close();
  if (!out) throw reef::IoError("failed to write " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw reef::IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<reef::Track> read_track_file(const char* path) {
  auto in = reef::textio::open_input(path);
  return reef::ingest::read_tracks(in);
}

std::vector<reef::DetectionRecord> flatten(const reef::FrameDetections& frames) {
  std::vector<reef::DetectionRecord> out;
  for (const auto& [frame, dets] : frames) out.insert(out.end(), dets.begin(), dets.end());
  return out;
}

}  // namespace

extern "C" {

const char* reef_version(void) { return "0.1.0"; }

const char* reef_status_name(reef_status status) {
  switch (status) {
    case REEF_OK: return "ok";
    case REEF_ERR_IO: return "io";
    case REEF_ERR_VALIDATION: return "validation";
    case REEF_ERR_INTERNAL: return "internal";
    case REEF_ERR_INSUFFICIENT_DATA: return "insufficient-data";
    case REEF_ERR_INVALID_ARGUMENT: return "invalid-argument";
  }
  return "unknown";
}

reef_status reef_context_create(reef_context** out) {
  if (!out) return REEF_ERR_INVALID_ARGUMENT;
  try {
    *out = new reef_context();
    return REEF_OK;
  } catch (...) {
    *out = nullptr;
    return REEF_ERR_INTERNAL;
  }
}

void reef_context_destroy(reef_context* ctx) { delete ctx; }

const char* reef_last_error(const reef_context* ctx) {
  return ctx ? ctx->last_error.c_str() : "no context";
}

void reef_set_logging(reef_context* ctx, int enabled) {
  if (ctx) ctx->logging = enabled != 0;
}

reef_status reef_load_config_file(reef_context* ctx, const char* path) {
  return guarded(ctx, [&] {
    require_arg(path, "path");
    const std::string text = reef::textio::read_file(path);
    const fs::path base = fs::path(path).parent_path();
    reef::parse_pipeline_config(text, ctx->overrides, base);
    ctx->config_text = text;
    ctx->base_dir = base;
  });
}

reef_status reef_load_config_string(reef_context* ctx, const char* json, const char* base_dir) {
  return guarded(ctx, [&] {
    require_arg(json, "json");
    const fs::path base = base_dir ? fs::path(base_dir) : fs::path();
    reef::parse_pipeline_config(json, ctx->overrides, base);
    ctx->config_text = json;
    ctx->base_dir = base;
  });
}

reef_status reef_set_option(reef_context* ctx, const char* key_value) {
  return guarded(ctx, [&] {
    require_arg(key_value, "key_value");
    auto next = ctx->overrides;
    next.emplace_back(key_value);
    reef::parse_pipeline_config(ctx->config_text, next, ctx->base_dir);
    ctx->overrides = std::move(next);
  });
}

reef_status reef_config_json(reef_context* ctx, char* buf, size_t capacity, size_t* needed) {
  return guarded(ctx, [&] {
    const std::string text = reef::pipeline_config_json(ctx->config());
    if (needed) *needed = text.size() + 1;
    if (buf && capacity > 0) {
      const size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

reef_status reef_run_pipeline(reef_context* ctx, size_t* n_clips) {
  return guarded(ctx, [&] {
    const auto summaries = reef::run_pipeline(ctx->config(), ctx->logging ? &std::cerr : nullptr);
    if (n_clips) *n_clips = summaries.size();
  });
}

reef_status reef_track(reef_context* ctx, const char* manifest_path, const char* out_dir) {
  return guarded(ctx, [&] {
    require_arg(manifest_path, "manifest_path");
    require_arg(out_dir, "out_dir");
    const auto cfg = ctx->config();
    const auto manifest = reef::ingest::load_manifest(manifest_path);
    const auto taxonomy = reef::load_taxonomy(cfg.species_table);
    const auto data = reef::load_clip(manifest);
    ensure_dir(out_dir);
    const char* names[2] = {"_tracks_left.jsonl", "_tracks_right.jsonl"};
    for (int s = 0; s < 2; ++s) {
      const auto tracks = reef::track_and_label(data.segmentation[s], data.species[s], taxonomy, cfg);
      write_file(fs::path(out_dir) / (manifest.clip_id + names[s]),
                 [&](std::ostream& o) { reef::ingest::write_tracks(tracks, o); });
    }
  });
}

reef_status reef_match3d(reef_context* ctx, const char* clip_id, const char* tracks_left,
                         const char* tracks_right, const char* out_dir, size_t* n_individuals) {
  return guarded(ctx, [&] {
    require_arg(clip_id, "clip_id");
    require_arg(tracks_left, "tracks_left");
    require_arg(tracks_right, "tracks_right");
    require_arg(out_dir, "out_dir");
    const auto cfg = ctx->config();
    const auto rig = reef::load_rectified_rig(cfg.calibration);
    const auto taxonomy = reef::load_taxonomy(cfg.species_table);
    auto individuals = reef::match_and_measure(clip_id, read_track_file(tracks_left),
                                               read_track_file(tracks_right), rig, taxonomy, cfg);
    reef::assign_weights(individuals, taxonomy,
                         reef::reallocate_higher_taxa(reef::clip_abundance(individuals), taxonomy),
                         cfg.biomass_cutoff);
    ensure_dir(out_dir);
    write_file(fs::path(out_dir) / (std::string(clip_id) + "_individuals.csv"),
               [&](std::ostream& o) { reef::ingest::write_individuals(individuals, o); });
    write_file(fs::path(out_dir) / (std::string(clip_id) + "_points.csv"),
               [&](std::ostream& o) { reef::ingest::write_points(individuals, o); });
    if (n_individuals) *n_individuals = individuals.size();
  });
}

reef_status reef_summarize(reef_context* ctx, const char* clip_id, const char* individuals_csv,
                           const char* points_csv, const char* out_dir) {
  return guarded(ctx, [&] {
    require_arg(clip_id, "clip_id");
    require_arg(individuals_csv, "individuals_csv");
    require_arg(out_dir, "out_dir");
    const auto cfg = ctx->config();
    const auto taxonomy = reef::load_taxonomy(cfg.species_table);
    std::vector<reef::Individual> all;
    {
      auto in = reef::textio::open_input(individuals_csv);
      all = reef::ingest::read_individuals(in);
    }
    if (points_csv) {
      auto in = reef::textio::open_input(points_csv);
      reef::ingest::read_points(in, all);
    }
    std::vector<reef::Individual> clip;
    for (auto& ind : all)
      if (ind.clip_id == clip_id) clip.push_back(std::move(ind));
    const auto summary = reef::summarize_clip(clip_id, clip, taxonomy, cfg);
    reef::ingest::write_summaries({summary}, out_dir);
  });
}

reef_status reef_volume(reef_context* ctx, const char* points_csv, double* volume_m3,
                        size_t* n_used, size_t* n_removed) {
  return guarded(ctx, [&] {
    require_arg(points_csv, "points_csv");
    const auto cfg = ctx->config();
    auto in = reef::textio::open_input(points_csv);
    const auto cloud = reef::ingest::read_point_cloud(in);
    const auto est = reef::observation_volume(cloud, cfg.volume);
    if (volume_m3) *volume_m3 = est.volume_m3;
    if (n_used) *n_used = est.n_points_used;
    if (n_removed) *n_removed = est.n_outliers_removed;
  });
}

reef_status reef_eval_detections(reef_context* ctx, const char* predictions,
                                 const char* ground_truth, int image_width, int image_height,
                                 const char* report_csv, double* map50, double* map50_95) {
  return guarded(ctx, [&] {
    require_arg(predictions, "predictions");
    require_arg(ground_truth, "ground_truth");
    if (image_width <= 0 || image_height <= 0)
      throw reef::Error(reef::ErrorKind::kInvalidArgument, "image size must be positive");
    const reef::ImageSize image{image_width, image_height};
    auto pin = reef::textio::open_input(predictions);
    auto gin = reef::textio::open_input(ground_truth);
    const auto preds = flatten(reef::ingest::parse_detections(pin, image));
    const auto gts = flatten(reef::ingest::parse_detections(gin, image));
    const auto report = reef::evaluate_detections(preds, gts);
    if (report_csv)
      write_file(report_csv, [&](std::ostream& o) { reef::write_detection_report(report, o); });
    if (map50) *map50 = report.map50.value_or(kNaN);
    if (map50_95) *map50_95 = report.map50_95.value_or(kNaN);
  });
}

reef_status reef_eval_tracks(reef_context* ctx, const char* predicted_tracks,
                             const char* gt_tracks, const char* report_csv, double* mota,
                             double* idf1, double* hota) {
  return guarded(ctx, [&] {
    require_arg(predicted_tracks, "predicted_tracks");
    require_arg(gt_tracks, "gt_tracks");
    const auto pred = reef::flatten_tracks(read_track_file(predicted_tracks));
    const auto gt = reef::flatten_tracks(read_track_file(gt_tracks));
    const auto rows = reef::evaluate_tracks(gt, pred);
    if (report_csv)
      write_file(report_csv, [&](std::ostream& o) { reef::write_tracking_report(rows, o); });
    if (mota) *mota = rows.front().clear.mota.value_or(kNaN);
    if (idf1) *idf1 = rows.front().identity.idf1;
    if (hota) *hota = rows.front().hota.hota;
  });
}

reef_status reef_simulate(reef_context* ctx, const char* scene_json, int n_clips,
                          const char* out_dir) {
  return guarded(ctx, [&] {
    require_arg(out_dir, "out_dir");
    if (n_clips < 0) throw reef::Error(reef::ErrorKind::kInvalidArgument, "n_clips must be >= 0");
    reef::SceneConfig scene = reef::default_scene_config();
    if (scene_json) {
      std::istringstream in(scene_json);
      scene = reef::parse_scene_config(in);
    }
    reef::PipelineConfig pc = ctx->config();
    pc.calibration = "calibration.json";
    pc.species_table = "species.csv";
    pc.output_dir = "out";
    pc.manifests.clear();
    const std::uint64_t base_seed = scene.seed;
    for (int c = 0; c < n_clips; ++c) {
      scene.seed = base_seed + static_cast<std::uint64_t>(c);
      std::string id = std::to_string(c + 1);
      id = "clip" + std::string(id.size() < 3 ? 3 - id.size() : 0, '0') + id;
      const auto files = reef::write_scene(reef::simulate_scene(scene), scene, id, out_dir);
      pc.manifests.push_back(files.manifest.filename());
    }
    ensure_dir(out_dir);
    scene.seed = base_seed;
    write_file(fs::path(out_dir) / "scene.json",
               [&](std::ostream& o) { reef::serialize_scene_config(scene, o); });
    write_file(fs::path(out_dir) / "pipeline.json",
               [&](std::ostream& o) { o << reef::pipeline_config_json(pc); });
  });
}

reef_status reef_rig_load(reef_context* ctx, const char* calibration_path, reef_rig** out) {
  return guarded(ctx, [&] {
    require_arg(calibration_path, "calibration_path");
    require_arg(out, "out");
    *out = new reef_rig{reef::load_rectified_rig(calibration_path)};
  });
}

void reef_rig_destroy(reef_rig* rig) { delete rig; }

reef_status reef_rig_project(reef_context* ctx, const reef_rig* rig, const double xyz[3],
                             reef_camera camera, double pixel[2]) {
  return guarded(ctx, [&] {
    require_arg(rig, "rig");
    require_arg(xyz, "xyz");
    require_arg(pixel, "pixel");
    const auto side = camera == REEF_RIGHT ? reef::CameraSide::kRight : reef::CameraSide::kLeft;
    const auto px = rig->rectified.rig.project(reef::Vec3(xyz[0], xyz[1], xyz[2]), side);
    if (!px) throw reef::ValidationError("xyz", "point is behind the camera");
    pixel[0] = px->x();
    pixel[1] = px->y();
  });
}

reef_status reef_rig_triangulate(reef_context* ctx, const reef_rig* rig, const double left_pixel[2],
                                 const double right_pixel[2], double xyz[3]) {
  return guarded(ctx, [&] {
    require_arg(rig, "rig");
    require_arg(left_pixel, "left_pixel");
    require_arg(right_pixel, "right_pixel");
    require_arg(xyz, "xyz");
    const auto& rr = rig->rectified;
    const auto l = reef::rectify_point(rr, {left_pixel[0], left_pixel[1]}, reef::CameraSide::kLeft);
    const auto r = reef::rectify_point(rr, {right_pixel[0], right_pixel[1]}, reef::CameraSide::kRight);
    const reef::Vec3 p = reef::triangulate(rr, l.point, r.point);
    xyz[0] = p.x();
    xyz[1] = p.y();
    xyz[2] = p.z();
  });
}

}  // extern "C"
