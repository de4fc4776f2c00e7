#include "reef/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <future>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "reef/biometry.hpp"
#include "reef/community.hpp"
#include "reef/error.hpp"
#include "reef/textio.hpp"
#include "reef/tracker.hpp"

namespace reef {

namespace fs = std::filesystem;

ClipData load_clip(const ingest::ClipManifest& manifest) {
  ClipData data;
  data.manifest = manifest;
  for (int s = 0; s < 2; ++s) {
    auto in = textio::open_input(manifest.detections[s]);
    FrameDetections all = ingest::parse_detections(in, manifest.image);
    const bool separate = manifest.species_detections[s].has_value();
    for (auto& [frame, dets] : all) {
      for (auto& d : dets) {
        if (d.is_segmentation()) {
          data.segmentation[s][frame].push_back(std::move(d));
        } else if (!separate) {
          data.species[s][frame].push_back(std::move(d));
        }
      }
    }
    if (separate) {
      auto sin = textio::open_input(*manifest.species_detections[s]);
      FrameDetections sp = ingest::parse_detections(sin, manifest.image);
      for (auto& [frame, dets] : sp)
        for (auto& d : dets)
          if (!d.is_segmentation()) data.species[s][frame].push_back(std::move(d));
    }
  }
  return data;
}

std::vector<Track> track_and_label(const FrameDetections& segmentation,
                                   const FrameDetections& species, const Taxonomy& taxonomy,
                                   const PipelineConfig& config) {
  FrameDetections seg;
  for (const auto& [frame, dets] : segmentation) {
    auto& kept = seg[frame];
    for (const auto& d : dets)
      if (d.is_segmentation() && d.confidence >= config.seg_confidence) kept.push_back(d);
  }
  FrameDetections sp;
  for (const auto& [frame, dets] : species) {
    for (const auto& d : dets)
      if (!d.is_segmentation() && d.confidence >= config.species_confidence)
        sp[frame].push_back(d);
  }
  std::vector<Track> tracks = track_clip(seg, config.tracker);
  for (auto& t : tracks) {
    const LabelVotes votes = collect_track_labels(t, sp, config.label_iou);
    t.class_label = assign_track_class(votes, t.observations.size(), taxonomy, config.vote);
  }
  return tracks;
}

std::string combine_labels(const std::string& left, const std::string& right,
                           const Taxonomy& taxonomy) {
  if (left == right) return left;
  if (left == kUnidentifiedLabel) return right;
  if (right == kUnidentifiedLabel) return left;
  if (taxonomy.is_finer(right, left)) return right;
  return left;
}

std::optional<BodyAxisSample> mask_body_axis(const Polygon& polygon, ImageSize image,
                                             FrameIndex frame, const PipelineConfig& config) {
  BodyAxisConfig axis = config.body_axis;
  if (config.max_grid_cells > 0 && !polygon.empty()) {
    double minx = polygon[0].x(), maxx = minx, miny = polygon[0].y(), maxy = miny;
    for (const auto& p : polygon) {
      minx = std::min(minx, p.x());
      maxx = std::max(maxx, p.x());
      miny = std::min(miny, p.y());
      maxy = std::max(maxy, p.y());
    }
    const double longest = std::max(maxx - minx, maxy - miny);
    axis.grid_resolution = std::max(axis.grid_resolution, longest / config.max_grid_cells);
  }
  return extract_body_axis(polygon, image, frame, axis);
}

std::vector<Individual> match_and_measure(const std::string& clip_id,
                                          const std::vector<Track>& left,
                                          const std::vector<Track>& right,
                                          const RectifiedRig& rig, const Taxonomy& taxonomy,
                                          const PipelineConfig& config) {
  std::map<TrackId, const Track*> lby, rby;
  for (const auto& t : left) lby[t.id] = &t;
  for (const auto& t : right) rby[t.id] = &t;

  const auto matches = resolve_stereo_identities(left, right, rig, config.stereo_tolerance,
                                                 config.min_overlap_frames);
  std::vector<Individual> out;
  for (const auto& m : matches) {
    const Track& lt = *lby.at(m.left_id);
    const Track& rt = *rby.at(m.right_id);
    AxisLookup la, ra;
    for (FrameIndex f : m.frames) {
      const auto* lo = lt.at_frame(f);
      const auto* ro = rt.at_frame(f);
      if (lo && lo->polygon)
        if (auto s = mask_body_axis(*lo->polygon, rig.rig.left.image, f, config)) la[f] = *s;
      if (ro && ro->polygon)
        if (auto s = mask_body_axis(*ro->polygon, rig.rig.right.image, f, config)) ra[f] = *s;
    }
    const Reconstruction rec =
        reconstruct_individual(m, lt, rt, rig, la, ra, config.stereo_tolerance);
    out.push_back(measure_individual(rec, clip_id,
                                     combine_labels(lt.class_label, rt.class_label, taxonomy),
                                     config.orientation, config.length_percentile));
  }
  std::sort(out.begin(), out.end(), [](const Individual& a, const Individual& b) {
    return std::tie(a.left_id, a.right_id) < std::tie(b.left_id, b.right_id);
  });
  return out;
}

ClipSummary summarize_clip(const std::string& clip_id, std::vector<Individual>& individuals,
                           const Taxonomy& taxonomy, const PipelineConfig& config) {
  const Reallocation re = reallocate_higher_taxa(clip_abundance(individuals), taxonomy);
  assign_weights(individuals, taxonomy, re, config.biomass_cutoff);
  ClipSummary s = clip_summary(clip_id, individuals, taxonomy);
  std::vector<Vec3> cloud;
  for (const auto& ind : individuals)
    for (const auto& c : ind.centers) cloud.push_back(c.position);
  try {
    s.volume_m3 = observation_volume(cloud, config.volume).volume_m3;
  } catch (const InsufficientDataError&) {
    s.volume_m3.reset();
  }
  return s;
}

ClipOutput process_clip(const ingest::ClipManifest& manifest, const RectifiedRig& rig,
                        const Taxonomy& taxonomy, const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  ClipOutput out;
  out.clip_id = manifest.clip_id;
  const ClipData data = load_clip(manifest);
  auto right = std::async(std::launch::async, [&] {
    return track_and_label(data.segmentation[1], data.species[1], taxonomy, config);
  });
  out.tracks[0] = track_and_label(data.segmentation[0], data.species[0], taxonomy, config);
  out.tracks[1] = right.get();
  out.individuals =
      match_and_measure(out.clip_id, out.tracks[0], out.tracks[1], rig, taxonomy, config);
  out.summary = summarize_clip(out.clip_id, out.individuals, taxonomy, config);
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_clip_outputs(const ClipOutput& clip, const fs::path& dir) {
  auto write = [&](const std::string& suffix, auto&& body) {
    const fs::path p = dir / (clip.clip_id + suffix);
    auto out = textio::open_output(p);
    body(out);
    out.close();
    if (!out) throw IoError("failed to write " + p.string());
  };
  write("_tracks_left.jsonl", [&](std::ostream& o) { ingest::write_tracks(clip.tracks[0], o); });
  write("_tracks_right.jsonl", [&](std::ostream& o) { ingest::write_tracks(clip.tracks[1], o); });
  write("_individuals.csv", [&](std::ostream& o) { ingest::write_individuals(clip.individuals, o); });
  write("_points.csv", [&](std::ostream& o) { ingest::write_points(clip.individuals, o); });
}

RectifiedRig load_rectified_rig(const fs::path& calibration) {
  auto in = textio::open_input(calibration);
  return build_rectification(ingest::parse_calibration(in));
}

Taxonomy load_taxonomy(const fs::path& species_table) {
  auto in = textio::open_input(species_table);
  return ingest::parse_species_table(in);
}

std::vector<ClipSummary> run_pipeline(const PipelineConfig& config, std::ostream* log) {
  validate_pipeline_config(config);
  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    *log << "[reef] " << line << '\n';
    log->flush();
  };

  std::vector<ingest::ClipManifest> manifests;
  for (const auto& p : config.manifests) manifests.push_back(ingest::load_manifest(p));
  std::set<std::string> ids;
  for (const auto& m : manifests)
    if (!ids.insert(m.clip_id).second)
      throw ValidationError("manifests", "duplicate clip id '" + m.clip_id + "'");

  std::optional<RectifiedRig> rig;
  std::optional<Taxonomy> taxonomy;
  if (!manifests.empty()) {
    rig = load_rectified_rig(config.calibration);
    taxonomy = load_taxonomy(config.species_table);
    for (const auto& w : taxonomy->warnings()) say("species table: " + w);
  }

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
  {
    auto out = textio::open_output(config.output_dir / "config_used.json");
    out << pipeline_config_json(config);
    if (!out) throw IoError("failed to write config_used.json");
  }

  std::vector<ClipOutput> results(manifests.size());
  std::vector<std::exception_ptr> errors(manifests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < manifests.size(); i = next++) {
      try {
        results[i] = process_clip(manifests[i], *rig, *taxonomy, config);
        say("clip " + results[i].clip_id + ": " + std::to_string(results[i].tracks[0].size()) +
            "/" + std::to_string(results[i].tracks[1].size()) + " tracks, " +
            std::to_string(results[i].individuals.size()) + " individuals, " +
            textio::format_double(std::round(results[i].seconds * 1000) / 1000) + " s");
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(1, manifests.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::sort(results.begin(), results.end(),
            [](const ClipOutput& a, const ClipOutput& b) { return a.clip_id < b.clip_id; });
  std::vector<ClipSummary> summaries;
  for (const auto& r : results) {
    write_clip_outputs(r, config.output_dir);
    summaries.push_back(r.summary);
  }
  ingest::write_summaries(summaries, config.output_dir, true);
  say("wrote " + std::to_string(summaries.size()) + " clip summaries to " +
      config.output_dir.string());
  return summaries;
}

}  // namespace reef
