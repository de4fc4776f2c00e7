#pragma once

#include "reef/types.hpp"

namespace reef {

// Head-tail axis endpoints of one segmentation polygon, in raw pixels.
// `head` is the endpoint on the negative side of the axis direction; the
// polygon alone does not tell snout from tail.
struct BodyAxisSample {
  FrameIndex frame = 0;
  Vec2 head = Vec2::Zero();
  Vec2 tail = Vec2::Zero();
  Vec2 axis_direction = Vec2::UnitX();
  bool on_image_edge = false;
};

}  // namespace reef
