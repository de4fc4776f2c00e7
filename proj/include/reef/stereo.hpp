#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "reef/body_axis.hpp"
#include "reef/camera.hpp"
#include "reef/track.hpp"

namespace reef {

// Rig plus the row-aligning rotations and the shared rectified pinhole.
// Rectified coordinates put the right camera at (+baseline, 0, 0), so
// disparity x_left - x_right is positive in front of the rig.
struct RectifiedRig {
  StereoRig rig;
  Mat3 rect_left = Mat3::Identity();   // left-camera ray -> rectified frame
  Mat3 rect_right = Mat3::Identity();  // right-camera ray -> rectified frame
  double focal = 0;
  double cx = 0;
  double cy = 0;
  double baseline = 0;

  const Mat3& rectifying_rotation(CameraSide side) const {
    return side == CameraSide::kLeft ? rect_left : rect_right;
  }
  Eigen::Matrix<double, 3, 4> projection(CameraSide side) const;
};

RectifiedRig build_rectification(const StereoRig& rig);

struct RectifiedPoint {
  Vec2 point = Vec2::Zero();
  bool in_region = true;  // false outside the 2x padded image or behind
};

// Undistorts a raw pixel and maps it onto the rectified image plane.
RectifiedPoint rectify_point(const RectifiedRig& rr, const Vec2& pixel,
                             CameraSide side);
// Inverse of rectify_point.
Vec2 unrectify_point(const RectifiedRig& rr, const Vec2& rectified,
                     CameraSide side);
// Bounding box of the four rectified corners.
BBox rectify_box(const RectifiedRig& rr, const BBox& box, CameraSide side);

// Projects a left-frame point onto a rectified image; nullopt behind.
std::optional<Vec2> project_rectified(const RectifiedRig& rr,
                                      const Vec3& point_left, CameraSide side);

// Rectified boxes are candidates when top, centre and bottom rows each agree
// within tolerance * left height (inclusive) and the right box does not lie
// to the right of the left one.
bool epipolar_compatible(const BBox& left, const BBox& right,
                         double tolerance = 0.2);

std::vector<std::pair<std::size_t, std::size_t>> epipolar_match_frame(
    std::span<const BBox> left, std::span<const BBox> right,
    double tolerance = 0.2);

struct StereoMatch {
  TrackId left_id = 0;
  TrackId right_id = 0;
  int overlap_frames = 0;
  std::vector<FrameIndex> frames;  // co-candidate frames, ascending
};

using PairKey = std::pair<TrackId, TrackId>;
using CandidateFrames = std::map<PairKey, std::vector<FrameIndex>>;

// Frames on which each (left, right) pair passes the epipolar gate.
CandidateFrames collect_candidates(const std::vector<Track>& left,
                                   const std::vector<Track>& right,
                                   const RectifiedRig& rr, double tolerance = 0.2);

// Greedy one-to-one pairing by descending overlap (ties: smaller ids);
// pairs with fewer than `min_overlap` frames are dropped.
std::vector<StereoMatch> resolve_stereo_identities(const CandidateFrames& candidates,
                                                   int min_overlap = 15);

std::vector<StereoMatch> resolve_stereo_identities(const std::vector<Track>& left,
                                                   const std::vector<Track>& right,
                                                   const RectifiedRig& rr,
                                                   double tolerance = 0.2,
                                                   int min_overlap = 15);

inline constexpr double kMinDisparity = 0.25;

// Linear (DLT) triangulation of rectified pixel points. Returns metres in the
// left-camera frame. Throws ValidationError when the disparity is at or
// below `min_disparity`.
Vec3 triangulate(const RectifiedRig& rr, const Vec2& left_rect,
                 const Vec2& right_rect, double min_disparity = kMinDisparity);
std::optional<Vec3> try_triangulate(const RectifiedRig& rr, const Vec2& left_rect,
                                    const Vec2& right_rect,
                                    double min_disparity = kMinDisparity);

struct FrameReconstruction {
  FrameIndex frame = 0;
  std::optional<Vec3> center;
  // Both views supplied endpoints that satisfied the row tolerance.
  bool endpoints_matched = false;
  std::optional<Vec3> head;
  std::optional<Vec3> tail;
  bool on_image_edge = false;
  std::optional<double> length_m;
};

struct Reconstruction {
  StereoMatch match;
  std::vector<FrameReconstruction> frames;
};

using AxisLookup = std::map<FrameIndex, BodyAxisSample>;

Reconstruction reconstruct_individual(const StereoMatch& match,
                                      const Track& left, const Track& right,
                                      const RectifiedRig& rr,
                                      const AxisLookup& left_axes,
                                      const AxisLookup& right_axes,
                                      double tolerance = 0.2);

}  // namespace reef
