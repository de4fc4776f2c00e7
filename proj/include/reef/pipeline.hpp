#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "reef/config.hpp"
#include "reef/individual.hpp"
#include "reef/ingest.hpp"
#include "reef/stereo.hpp"
#include "reef/summary.hpp"

namespace reef {

struct ClipData {
  ingest::ClipManifest manifest;
  FrameDetections segmentation[2];
  FrameDetections species[2];
};

// Reads both camera streams. Without separate species streams the
// non-"fish" records of the detection streams are used as species boxes.
ClipData load_clip(const ingest::ClipManifest& manifest);

// Tracks "fish" boxes at or above the segmentation threshold and assigns a
// class to every track from species boxes at or above the species threshold.
std::vector<Track> track_and_label(const FrameDetections& segmentation,
                                   const FrameDetections& species, const Taxonomy& taxonomy,
                                   const PipelineConfig& config);

// Label of a stereo pair: agreeing labels, else the resolved one over "unID",
// else the finer of two nested classes, else the left label.
std::string combine_labels(const std::string& left, const std::string& right,
                           const Taxonomy& taxonomy);

// Axis from one mask, with the grid coarsened for large masks.
std::optional<BodyAxisSample> mask_body_axis(const Polygon& polygon, ImageSize image,
                                             FrameIndex frame, const PipelineConfig& config);

// Stereo identities, per-frame 3D reconstruction and biometry. Individuals
// are sorted by (left_id, right_id); weights are not yet assigned.
std::vector<Individual> match_and_measure(const std::string& clip_id,
                                          const std::vector<Track>& left,
                                          const std::vector<Track>& right,
                                          const RectifiedRig& rig, const Taxonomy& taxonomy,
                                          const PipelineConfig& config);

// Assigns weights and builds the clip summary, including the observation
// volume when the centre cloud is dense enough.
ClipSummary summarize_clip(const std::string& clip_id, std::vector<Individual>& individuals,
                           const Taxonomy& taxonomy, const PipelineConfig& config);

struct ClipOutput {
  std::string clip_id;
  std::vector<Track> tracks[2];
  std::vector<Individual> individuals;
  ClipSummary summary;
  double seconds = 0;
};

ClipOutput process_clip(const ingest::ClipManifest& manifest, const RectifiedRig& rig,
                        const Taxonomy& taxonomy, const PipelineConfig& config);

// `<clip>_tracks_{left,right}.jsonl`, `<clip>_individuals.csv` and
// `<clip>_points.csv`. Community files come from ingest::write_summaries.
void write_clip_outputs(const ClipOutput& clip, const std::filesystem::path& dir);

// Full run over every manifest. Writes per-clip files, `index.csv` and
// `config_used.json` into the output directory. Summaries come back sorted
// by clip id. Progress lines go to `log` when given.
std::vector<ClipSummary> run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

RectifiedRig load_rectified_rig(const std::filesystem::path& calibration);
Taxonomy load_taxonomy(const std::filesystem::path& species_table);

}  // namespace reef
