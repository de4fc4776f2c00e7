#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reef/types.hpp"

namespace reef {

struct TrackObservation {
  FrameIndex frame = 0;
  BBox bbox;
  double confidence = 0;
  std::optional<Polygon> polygon;

  friend bool operator==(const TrackObservation&,
                         const TrackObservation&) = default;
};

// One tracked individual in one camera. Observation frames are strictly
// increasing.
struct Track {
  TrackId id = 0;
  std::vector<TrackObservation> observations;
  std::string class_label{kUnidentifiedLabel};

  const TrackObservation* at_frame(FrameIndex frame) const;
  FrameIndex first_frame() const { return observations.front().frame; }
  FrameIndex last_frame() const { return observations.back().frame; }

  friend bool operator==(const Track&, const Track&) = default;
};

}  // namespace reef
