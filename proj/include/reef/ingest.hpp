#pragma once

// Parsers for every input artifact and serializers for every pipeline
// output. All parsers are pure functions of their input stream and either
// return validated values or throw a located ValidationError / ParseError.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "reef/camera.hpp"
#include "reef/detection.hpp"
#include "reef/individual.hpp"
#include "reef/species.hpp"
#include "reef/summary.hpp"
#include "reef/track.hpp"

namespace reef::ingest {

// ---- detections (JSON lines) ----------------------------------------------

// One record per line: {"frame","cam","bbox":[x0,y0,x1,y1],"conf","label",
// "poly":[[x,y],...]}. Blank lines are skipped. Coordinates up to 1 px
// outside the image are clamped, anything further is rejected.
FrameDetections parse_detections(std::istream& in, ImageSize image);

// Validates a single record in place (clamping as above).
void validate_detection(DetectionRecord& record, ImageSize image);

std::string encode_detection(const DetectionRecord& record);
std::size_t serialize_detections(const FrameDetections& frames,
                                 std::ostream& out);

// ---- calibration (JSON) ---------------------------------------------------

StereoRig parse_calibration(std::istream& in);
void serialize_calibration(const StereoRig& rig, std::ostream& out);

// ---- species table (CSV) --------------------------------------------------

// Header: label,level,members,lw_a,lw_b,max_length_cm. Members are
// ';'-separated. Numeric fields may be empty or "NA".
Taxonomy parse_species_table(std::istream& in);
void serialize_species_table(const Taxonomy& taxonomy, std::ostream& out);

// ---- clip manifest (JSON) -------------------------------------------------

struct ClipManifest {
  std::string clip_id;
  std::string start_timestamp;
  double frame_rate = 15.0;
  long long frame_count = 0;
  ImageSize image{3840, 2160};
  std::filesystem::path detections[2];
  // Optional separate species-detector streams; when absent, non-"fish"
  // records in the detection streams are used.
  std::optional<std::filesystem::path> species_detections[2];
  std::optional<double> turbidity;
};

// Relative paths are resolved against `base_dir`.
ClipManifest parse_manifest(std::istream& in,
                            const std::filesystem::path& base_dir = {});
void serialize_manifest(const ClipManifest& manifest, std::ostream& out);
ClipManifest load_manifest(const std::filesystem::path& path);

// ---- tracks (JSON lines) --------------------------------------------------

// {"track_id","frame","bbox","label","conf","poly"} per observation.
std::size_t write_tracks(const std::vector<Track>& tracks, std::ostream& out);
std::vector<Track> read_tracks(std::istream& in);

// ---- individuals and 3D points (CSV) --------------------------------------

std::size_t write_individuals(const std::vector<Individual>& individuals,
                              std::ostream& out);
// Centers are not part of this file; see read_points.
std::vector<Individual> read_individuals(std::istream& in);

std::size_t write_points(const std::vector<Individual>& individuals,
                         std::ostream& out);
// Attaches point rows to the matching individuals (clip, left, right).
void read_points(std::istream& in, std::vector<Individual>& individuals);
// Bare X,Y,Z cloud from one or more points files.
std::vector<Vec3> read_point_cloud(std::istream& in);

// ---- summaries (CSV) ------------------------------------------------------

std::size_t write_community(const ClipSummary& summary, std::ostream& out);
std::size_t write_index(const std::vector<ClipSummary>& summaries,
                        std::ostream& out);

// Reads an index file and fills the per-label maps from community streams
// given in the same clip order.
std::vector<ClipSummary> read_summaries(std::istream& index,
                                        std::vector<std::istream*> community);

// Writes `<clip>_community.csv` per summary and `index.csv` into `dir`.
// Throws InvalidArgument-kind Error when `summaries` is empty and
// `allow_empty` is false. Returns the total byte count written.
std::size_t write_summaries(const std::vector<ClipSummary>& summaries,
                            const std::filesystem::path& dir,
                            bool allow_empty = false);

}  // namespace reef::ingest
