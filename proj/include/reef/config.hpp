#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "reef/biometry.hpp"
#include "reef/hull.hpp"
#include "reef/tracker.hpp"

namespace reef {

struct PipelineConfig {
  std::filesystem::path calibration;
  std::filesystem::path species_table;
  std::vector<std::filesystem::path> manifests;
  std::filesystem::path output_dir{"reef_out"};
  int workers = 1;

  double seg_confidence = 0.7;
  double species_confidence = 0.376;
  double label_iou = 0.2;
  ClassAssignmentRule vote;
  double stereo_tolerance = 0.2;
  int min_overlap_frames = 15;
  ScreeningConfig orientation;
  double length_percentile = 75.0;
  double biomass_cutoff = 1.5;

  TrackerConfig tracker;
  BodyAxisConfig body_axis;
  // Raster cells along the longer side of a mask; coarsens the grid for
  // large masks. 0 keeps body_axis.grid_resolution as is.
  int max_grid_cells = 128;
  VolumeOptions volume;
};

// Parses a JSON configuration document, applies `key=value` overrides
// (dotted keys, values parsed as JSON when possible) and validates ranges.
// Relative paths resolve against `base_dir`. Throws ValidationError.
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::vector<std::string>& overrides = {},
                                     const std::filesystem::path& base_dir = {});

// Effective configuration as a JSON document.
std::string pipeline_config_json(const PipelineConfig& config);

void validate_pipeline_config(const PipelineConfig& config);

}  // namespace reef
