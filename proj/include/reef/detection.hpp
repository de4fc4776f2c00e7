#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reef/types.hpp"

namespace reef {

// One detector output on one frame.
struct DetectionRecord {
  FrameIndex frame = 0;
  CameraSide camera = CameraSide::kLeft;
  BBox bbox;
  double confidence = 0.0;
  std::string label;
  std::optional<Polygon> polygon;

  bool is_segmentation() const { return label == kFishLabel; }
};

bool operator==(const DetectionRecord& a, const DetectionRecord& b);

using FrameDetections = std::map<FrameIndex, std::vector<DetectionRecord>>;

}  // namespace reef
