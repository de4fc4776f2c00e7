#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reef/types.hpp"

namespace reef {

struct LengthSample {
  FrameIndex frame = 0;
  double length_m = 0;
  friend bool operator==(const LengthSample&, const LengthSample&) = default;
};

struct CenterSample {
  FrameIndex frame = 0;
  Vec3 position = Vec3::Zero();  // metres, left-camera frame
  friend bool operator==(const CenterSample& a, const CenterSample& b) {
    return a.frame == b.frame && a.position == b.position;
  }
};

// A stereo-matched fish after biometry.
struct Individual {
  std::string clip_id;
  TrackId left_id = 0;
  TrackId right_id = 0;
  std::string class_label;
  std::vector<LengthSample> length_samples;  // retained samples only
  std::optional<double> length_cm;           // representative length
  std::optional<double> weight_g;
  bool excluded = false;  // length above the biomass cutoff
  std::vector<CenterSample> centers;

  friend bool operator==(const Individual&, const Individual&) = default;
};

}  // namespace reef
