#pragma once

#include <Eigen/Core>
#include <optional>

#include "reef/types.hpp"

namespace reef {

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

enum class TrackStatus { kTentative, kActive, kLost, kRemoved };

// Constant-velocity box filter over (cx, cy, aspect, height) and their
// per-frame velocities. Noise scales with box height.
struct KalmanParams {
  double std_weight_position = 1.0 / 20.0;
  double std_weight_velocity = 1.0 / 160.0;
};

struct TrackState {
  Vec8 mean = Vec8::Zero();
  Mat8 covariance = Mat8::Identity();
  TrackStatus status = TrackStatus::kTentative;
  FrameIndex last_update_frame = 0;

  BBox bbox() const;
};

Vec4 to_xyah(const BBox& box);
BBox from_xyah(const Vec4& xyah);

TrackState kalman_initiate(const BBox& observation, FrameIndex frame,
                           const KalmanParams& params = {});
void kalman_predict(TrackState& state, const KalmanParams& params = {});
void kalman_update(TrackState& state, const BBox& observation,
                   const KalmanParams& params = {});

// One filter step: predict, then correct when an observation is present.
// Throws InternalError if the covariance stops being PSD.
TrackState kalman_step(TrackState state, const std::optional<BBox>& observation,
                       const KalmanParams& params = {});

}  // namespace reef
