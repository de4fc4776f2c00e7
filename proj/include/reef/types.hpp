#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace reef {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using FrameIndex = std::int64_t;
using TrackId = std::int64_t;

enum class CameraSide { kLeft = 0, kRight = 1 };

inline std::string_view to_string(CameraSide side) {
  return side == CameraSide::kLeft ? "left" : "right";
}

struct ImageSize {
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Axis-aligned box in pixel coordinates, (x0, y0) top-left.
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const {
    return width() > 0 && height() > 0 ? width() * height() : 0.0;
  }
  Vec2 center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

using Polygon = std::vector<Vec2>;

// Reserved class labels.
inline constexpr std::string_view kFishLabel = "fish";
inline constexpr std::string_view kUnidentifiedLabel = "unID";

}  // namespace reef
