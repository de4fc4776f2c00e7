#include "reef/kalman.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>

#include "reef/error.hpp"

namespace reef {
namespace {

using Mat48 = Eigen::Matrix<double, 4, 8>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

constexpr double kMinExtent = 1e-6;

Mat8 motion_matrix() {
  Mat8 f = Mat8::Identity();
  for (int i = 0; i < 4; ++i) f(i, 4 + i) = 1.0;
  return f;
}

Mat48 measurement_matrix() {
  Mat48 h = Mat48::Zero();
  for (int i = 0; i < 4; ++i) h(i, i) = 1.0;
  return h;
}

void symmetrize_and_check(TrackState& s) {
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Mat8> eig(s.covariance, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, s.covariance.diagonal().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-9 * scale)
    throw InternalError("track covariance is not positive semi-definite");
}

void keep_extent_positive(TrackState& s) {
  s.mean[2] = std::max(s.mean[2], kMinExtent);
  s.mean[3] = std::max(s.mean[3], kMinExtent);
}

}  // namespace

Vec4 to_xyah(const BBox& b) {
  const Vec2 c = b.center();
  return {c.x(), c.y(), b.width() / b.height(), b.height()};
}

BBox from_xyah(const Vec4& m) {
  const double h = m[3];
  const double w = m[2] * h;
  return {m[0] - 0.5 * w, m[1] - 0.5 * h, m[0] + 0.5 * w, m[1] + 0.5 * h};
}

BBox TrackState::bbox() const { return from_xyah(mean.head<4>()); }

TrackState kalman_initiate(const BBox& obs, FrameIndex frame,
                           const KalmanParams& p) {
  TrackState s;
  const Vec4 z = to_xyah(obs);
  s.mean.head<4>() = z;
  s.mean.tail<4>().setZero();
  const double h = z[3];
  Vec8 std;
  std << 2 * p.std_weight_position * h, 2 * p.std_weight_position * h, 1e-2,
      2 * p.std_weight_position * h, 10 * p.std_weight_velocity * h,
      10 * p.std_weight_velocity * h, 1e-5, 10 * p.std_weight_velocity * h;
  s.covariance = std.array().square().matrix().asDiagonal();
  s.last_update_frame = frame;
  return s;
}

void kalman_predict(TrackState& s, const KalmanParams& p) {
  const double h = s.mean[3];
  Vec8 std;
  std << p.std_weight_position * h, p.std_weight_position * h, 1e-2,
      p.std_weight_position * h, p.std_weight_velocity * h,
      p.std_weight_velocity * h, 1e-5, p.std_weight_velocity * h;
  const Mat8 f = motion_matrix();
  s.mean = f * s.mean;
  s.covariance = f * s.covariance * f.transpose();
  s.covariance.diagonal() += std.array().square().matrix();
  keep_extent_positive(s);
  symmetrize_and_check(s);
}

void kalman_update(TrackState& s, const BBox& obs, const KalmanParams& p) {
  const double h = s.mean[3];
  Vec4 std(p.std_weight_position * h, p.std_weight_position * h, 1e-1,
           p.std_weight_position * h);
  const Mat48 hm = measurement_matrix();
  const Vec4 projected = hm * s.mean;
  Mat4 innovation_cov = hm * s.covariance * hm.transpose();
  innovation_cov.diagonal() += std.array().square().matrix();

  Eigen::LLT<Mat4> llt(innovation_cov);
  if (llt.info() != Eigen::Success)
    throw InternalError("innovation covariance is not positive definite");
  // K = P H^T S^-1, solved as S K^T = H P.
  const Eigen::Matrix<double, 8, 4> gain =
      llt.solve(hm * s.covariance).transpose();
  const Vec4 innovation = to_xyah(obs) - projected;
  s.mean += gain * innovation;
  s.covariance -= gain * innovation_cov * gain.transpose();
  keep_extent_positive(s);
  symmetrize_and_check(s);
}

TrackState kalman_step(TrackState state, const std::optional<BBox>& obs,
                       const KalmanParams& params) {
  kalman_predict(state, params);
  if (obs) kalman_update(state, *obs, params);
  return state;
}

}  // namespace reef
