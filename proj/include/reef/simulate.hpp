#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "reef/camera.hpp"
#include "reef/detection.hpp"
#include "reef/species.hpp"
#include "reef/track.hpp"

namespace reef {

struct NoiseConfig {
  double pixel_sigma = 0;
  double miss_rate = 0;
  double false_positive_rate = 0;  // chance of one spurious box per frame and camera
  double confidence_mean = 0.95;
  double confidence_sd = 0;
};

struct SceneConfig {
  StereoRig rig;
  int n_fish = 10;
  double length_min_m = 0.15;
  double length_max_m = 0.40;
  double speed_min = 0.05;  // m/s
  double speed_max = 0.30;
  double body_aspect = 4.0;
  double heading_spread_deg = 20.0;  // yaw away from the x axis
  double wobble_amplitude_m = 0.05;
  double wobble_period_s = 4.0;
  Vec3 box_min{-2.0, -2.5, 2.0};
  Vec3 box_max{2.0, 2.5, 6.0};
  // Each fish keeps a fixed image row band (y proportional to z).
  bool row_lanes = false;
  std::vector<SpeciesRecord> species;  // fish labels drawn from species-level rows
  double frame_rate = 15.0;
  int frame_count = 150;
  double species_confidence = 0.9;
  NoiseConfig noise;
  std::uint64_t seed = 1;
};

// Rig with shared focal length, square 3840x2160 images, baseline along x.
StereoRig default_sim_rig(double focal = 3000.0, double baseline = 0.40);
std::vector<SpeciesRecord> default_sim_species();
SceneConfig default_scene_config();

struct FishProjection {
  BBox bbox;
  Polygon polygon;
  Vec2 head = Vec2::Zero();
  Vec2 tail = Vec2::Zero();
  Vec2 center = Vec2::Zero();
};

// Ellipse body of the given aspect spanning head..tail, outline of 32
// vertices clipped to the image. nullopt when the centre is behind the
// camera or outside the image.
std::optional<FishProjection> project_individual(const Vec3& head, const Vec3& tail,
                                                 double aspect, const StereoRig& rig,
                                                 CameraSide side);

struct FishFrame {
  FrameIndex frame = 0;
  Vec3 center = Vec3::Zero();
  Vec3 head = Vec3::Zero();
  Vec3 tail = Vec3::Zero();
};

struct FishTruth {
  TrackId id = 0;
  std::string label;
  double length_m = 0;
  std::vector<FishFrame> path;
};

struct SceneOutput {
  FrameDetections segmentation[2];  // indexed by CameraSide
  FrameDetections species[2];
  std::vector<Track> gt_tracks[2];  // noise-free boxes, id = fish id
  std::vector<FishTruth> fish;
};

SceneOutput simulate_scene(const SceneConfig& config);

SceneConfig parse_scene_config(std::istream& in);
void serialize_scene_config(const SceneConfig& config, std::ostream& out);

struct SceneFiles {
  std::filesystem::path manifest;
  std::filesystem::path calibration;
  std::filesystem::path species_table;
};

// Writes detection streams, ground truth, manifest, calibration and species
// table for one clip into `dir`.
SceneFiles write_scene(const SceneOutput& scene, const SceneConfig& config,
                       const std::string& clip_id, const std::filesystem::path& dir);

}  // namespace reef
