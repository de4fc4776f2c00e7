#pragma once

#include <array>
#include <optional>

#include "reef/types.hpp"

namespace reef {

// Pinhole camera with Brown-Conrady distortion (k1, k2, p1, p2, k3).
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  std::array<double, 5> dist{};
  ImageSize image;

  Mat3 intrinsics() const;

  Vec2 distort_normalized(const Vec2& undistorted) const;
  // Iterative inverse of distort_normalized.
  Vec2 undistort_normalized(const Vec2& distorted) const;

  Vec2 pixel_to_normalized(const Vec2& pixel) const;
  Vec2 normalized_to_pixel(const Vec2& normalized) const;

  // Projects a point in this camera's frame; nullopt behind the camera.
  std::optional<Vec2> project(const Vec3& point_cam) const;

  bool contains(const Vec2& pixel) const;
};

// Two-camera rig. `t` is the right camera centre in left-camera coordinates
// (metres) and `rotation` is the right camera orientation relative to the
// left: X_left = rotation * X_right + t.
struct StereoRig {
  CameraModel left;
  CameraModel right;
  Mat3 rotation = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  double baseline() const { return t.norm(); }
  const CameraModel& camera(CameraSide side) const {
    return side == CameraSide::kLeft ? left : right;
  }
  // Left-camera frame point expressed in the given camera's frame.
  Vec3 to_camera(const Vec3& point_left, CameraSide side) const;
  std::optional<Vec2> project(const Vec3& point_left, CameraSide side) const;
};

// Throws ValidationError when the rig violates its invariants.
void validate_rig(const StereoRig& rig);

}  // namespace reef
