#include "reef/stereo.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <tuple>

#include "reef/error.hpp"

namespace reef {

// ---- camera model -------------------------------------------------------------

Mat3 CameraModel::intrinsics() const {
  Mat3 k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Vec2 CameraModel::distort_normalized(const Vec2& u) const {
  const double x = u.x(), y = u.y();
  const double k1 = dist[0], k2 = dist[1], p1 = dist[2], p2 = dist[3], k3 = dist[4];
  const double r2 = x * x + y * y;
  const double radial = 1 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2 * p1 * x * y + p2 * (r2 + 2 * x * x),
          y * radial + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y};
}

Vec2 CameraModel::undistort_normalized(const Vec2& d) const {
  if (std::all_of(dist.begin(), dist.end(), [](double c) { return c == 0.0; }))
    return d;
  const double k1 = dist[0], k2 = dist[1], p1 = dist[2], p2 = dist[3], k3 = dist[4];
  Vec2 u = d;
  for (int iter = 0; iter < 50; ++iter) {
    const double x = u.x(), y = u.y();
    const double r2 = x * x + y * y;
    const double radial = 1 + r2 * (k1 + r2 * (k2 + r2 * k3));
    const double dradial = k1 + 2 * k2 * r2 + 3 * k3 * r2 * r2;  // d radial / d r2
    Eigen::Matrix2d jac;
    jac(0, 0) = radial + x * dradial * 2 * x + 2 * p1 * y + 6 * p2 * x;
    jac(0, 1) = x * dradial * 2 * y + 2 * p1 * x + 2 * p2 * y;
    jac(1, 0) = y * dradial * 2 * x + 2 * p1 * x + 2 * p2 * y;
    jac(1, 1) = radial + y * dradial * 2 * y + 6 * p1 * y + 2 * p2 * x;
    const Vec2 residual = distort_normalized(u) - d;
    const Vec2 step = jac.partialPivLu().solve(residual);
    u -= step;
    if (step.norm() < 1e-16 * std::max(1.0, u.norm())) break;
  }
  return u;
}

Vec2 CameraModel::pixel_to_normalized(const Vec2& p) const {
  return {(p.x() - cx) / fx, (p.y() - cy) / fy};
}

Vec2 CameraModel::normalized_to_pixel(const Vec2& n) const {
  return {fx * n.x() + cx, fy * n.y() + cy};
}

std::optional<Vec2> CameraModel::project(const Vec3& pc) const {
  if (!(pc.z() > 0)) return std::nullopt;
  return normalized_to_pixel(distort_normalized(pc.head<2>() / pc.z()));
}

bool CameraModel::contains(const Vec2& p) const {
  return p.x() >= 0 && p.y() >= 0 && p.x() <= image.width && p.y() <= image.height;
}

Vec3 StereoRig::to_camera(const Vec3& point_left, CameraSide side) const {
  if (side == CameraSide::kLeft) return point_left;
  return rotation.transpose() * (point_left - t);
}

std::optional<Vec2> StereoRig::project(const Vec3& point_left,
                                       CameraSide side) const {
  return camera(side).project(to_camera(point_left, side));
}

void validate_rig(const StereoRig& rig) {
  for (auto side : {CameraSide::kLeft, CameraSide::kRight}) {
    const auto& c = rig.camera(side);
    const std::string name(to_string(side));
    if (!(c.fx > 0) || !(c.fy > 0))
      throw ValidationError(name + ".fx/fy", "focal length must be positive");
    if (c.image.width <= 0 || c.image.height <= 0)
      throw ValidationError("image_size", "must be positive");
    if (!(c.cx >= 0 && c.cx <= c.image.width && c.cy >= 0 &&
          c.cy <= c.image.height))
      throw ValidationError(name + ".cx/cy", "principal point outside the image");
    for (double d : c.dist)
      if (!std::isfinite(d))
        throw ValidationError(name + ".dist", "non-finite coefficient");
  }
  const Mat3& r = rig.rotation;
  if (!r.allFinite()) throw ValidationError("R", "non-finite entry");
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6) throw ValidationError("R", "rotation is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > 1e-6)
    throw ValidationError("R", "rotation determinant is not +1");
  if (!rig.t.allFinite()) throw ValidationError("t", "non-finite entry");
  if (!(rig.t.norm() > 1e-9))
    throw ValidationError("t", "degenerate (zero) baseline");
}

// ---- rectification --------------------------------------------------------------

Eigen::Matrix<double, 3, 4> RectifiedRig::projection(CameraSide side) const {
  Eigen::Matrix<double, 3, 4> p = Eigen::Matrix<double, 3, 4>::Zero();
  p(0, 0) = focal;
  p(1, 1) = focal;
  p(0, 2) = cx;
  p(1, 2) = cy;
  p(2, 2) = 1;
  if (side == CameraSide::kRight) p(0, 3) = -focal * baseline;
  return p;
}

RectifiedRig build_rectification(const StereoRig& rig) {
  validate_rig(rig);
  RectifiedRig rr;
  rr.rig = rig;
  rr.baseline = rig.t.norm();
  const Vec3 e1 = rig.t / rr.baseline;
  const Vec3 mean_axis = Vec3::UnitZ() + rig.rotation * Vec3::UnitZ();
  Vec3 e2 = mean_axis.cross(e1);
  if (e2.norm() < 1e-9)
    throw ValidationError("t", "baseline parallel to the optical axes");
  e2.normalize();
  const Vec3 e3 = e1.cross(e2);
  Mat3 rect;
  rect.row(0) = e1.transpose();
  rect.row(1) = e2.transpose();
  rect.row(2) = e3.transpose();
  rr.rect_left = rect;
  rr.rect_right = rect * rig.rotation;
  rr.focal = 0.25 * (rig.left.fx + rig.left.fy + rig.right.fx + rig.right.fy);
  rr.cx = 0.5 * (rig.left.cx + rig.right.cx);
  rr.cy = 0.5 * (rig.left.cy + rig.right.cy);
  return rr;
}

RectifiedPoint rectify_point(const RectifiedRig& rr, const Vec2& pixel,
                             CameraSide side) {
  const CameraModel& cam = rr.rig.camera(side);
  const Vec2 n = cam.undistort_normalized(cam.pixel_to_normalized(pixel));
  const Vec3 ray = rr.rectifying_rotation(side) * Vec3(n.x(), n.y(), 1.0);
  RectifiedPoint out;
  if (!(ray.z() > 0)) {
    out.in_region = false;
    out.point = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  out.point = {rr.focal * ray.x() / ray.z() + rr.cx,
               rr.focal * ray.y() / ray.z() + rr.cy};
  const double w = cam.image.width, h = cam.image.height;
  out.in_region = out.point.x() >= -0.5 * w && out.point.x() <= 1.5 * w &&
                  out.point.y() >= -0.5 * h && out.point.y() <= 1.5 * h;
  return out;
}

Vec2 unrectify_point(const RectifiedRig& rr, const Vec2& rectified,
                     CameraSide side) {
  const CameraModel& cam = rr.rig.camera(side);
  const Vec3 ray_rect((rectified.x() - rr.cx) / rr.focal,
                      (rectified.y() - rr.cy) / rr.focal, 1.0);
  const Vec3 ray = rr.rectifying_rotation(side).transpose() * ray_rect;
  return cam.normalized_to_pixel(cam.distort_normalized(ray.head<2>() / ray.z()));
}

BBox rectify_box(const RectifiedRig& rr, const BBox& box, CameraSide side) {
  const Vec2 corners[4] = {{box.x0, box.y0}, {box.x1, box.y0},
                           {box.x0, box.y1}, {box.x1, box.y1}};
  BBox out{std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};
  for (const auto& c : corners) {
    const Vec2 p = rectify_point(rr, c, side).point;
    out.x0 = std::min(out.x0, p.x());
    out.y0 = std::min(out.y0, p.y());
    out.x1 = std::max(out.x1, p.x());
    out.y1 = std::max(out.y1, p.y());
  }
  return out;
}

std::optional<Vec2> project_rectified(const RectifiedRig& rr,
                                      const Vec3& point_left, CameraSide side) {
  Vec3 p = rr.rect_left * point_left;
  if (side == CameraSide::kRight) p.x() -= rr.baseline;
  if (!(p.z() > 0)) return std::nullopt;
  return Vec2(rr.focal * p.x() / p.z() + rr.cx, rr.focal * p.y() / p.z() + rr.cy);
}

// ---- epipolar matching ------------------------------------------------------------

bool epipolar_compatible(const BBox& l, const BBox& r, double tolerance) {
  const double limit = tolerance * l.height() + 1e-9;
  const double center_l = 0.5 * (l.y0 + l.y1), center_r = 0.5 * (r.y0 + r.y1);
  if (std::abs(l.y0 - r.y0) > limit) return false;
  if (std::abs(center_l - center_r) > limit) return false;
  if (std::abs(l.y1 - r.y1) > limit) return false;
  return 0.5 * (r.x0 + r.x1) <= 0.5 * (l.x0 + l.x1);
}

std::vector<std::pair<std::size_t, std::size_t>> epipolar_match_frame(
    std::span<const BBox> left, std::span<const BBox> right, double tolerance) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < left.size(); ++i)
    for (std::size_t j = 0; j < right.size(); ++j)
      if (epipolar_compatible(left[i], right[j], tolerance)) out.emplace_back(i, j);
  return out;
}

CandidateFrames collect_candidates(const std::vector<Track>& left,
                                   const std::vector<Track>& right,
                                   const RectifiedRig& rr, double tolerance) {
  struct Entry {
    TrackId id;
    BBox box;
  };
  std::map<FrameIndex, std::vector<Entry>> by_frame[2];
  for (int s = 0; s < 2; ++s) {
    const auto side = s == 0 ? CameraSide::kLeft : CameraSide::kRight;
    for (const auto& t : (s == 0 ? left : right))
      for (const auto& o : t.observations)
        by_frame[s][o.frame].push_back({t.id, rectify_box(rr, o.bbox, side)});
  }
  CandidateFrames candidates;
  std::vector<BBox> lboxes, rboxes;
  for (const auto& [frame, lentries] : by_frame[0]) {
    auto it = by_frame[1].find(frame);
    if (it == by_frame[1].end()) continue;
    lboxes.clear();
    rboxes.clear();
    for (const auto& e : lentries) lboxes.push_back(e.box);
    for (const auto& e : it->second) rboxes.push_back(e.box);
    for (auto [i, j] : epipolar_match_frame(lboxes, rboxes, tolerance))
      candidates[{lentries[i].id, it->second[j].id}].push_back(frame);
  }
  return candidates;
}

std::vector<StereoMatch> resolve_stereo_identities(const CandidateFrames& candidates,
                                                   int min_overlap) {
  std::vector<const CandidateFrames::value_type*> order;
  for (const auto& entry : candidates) order.push_back(&entry);
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->second.size() != b->second.size())
      return a->second.size() > b->second.size();
    return a->first < b->first;
  });
  std::set<TrackId> used_left, used_right;
  std::vector<StereoMatch> out;
  for (const auto* entry : order) {
    const auto& [key, frames] = *entry;
    if (static_cast<int>(frames.size()) < min_overlap) break;
    if (used_left.count(key.first) || used_right.count(key.second)) continue;
    used_left.insert(key.first);
    used_right.insert(key.second);
    out.push_back({key.first, key.second, static_cast<int>(frames.size()), frames});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.left_id, a.right_id) < std::tie(b.left_id, b.right_id);
  });
  return out;
}

std::vector<StereoMatch> resolve_stereo_identities(const std::vector<Track>& left,
                                                   const std::vector<Track>& right,
                                                   const RectifiedRig& rr,
                                                   double tolerance,
                                                   int min_overlap) {
  return resolve_stereo_identities(collect_candidates(left, right, rr, tolerance),
                                   min_overlap);
}

// ---- triangulation -----------------------------------------------------------------

std::optional<Vec3> try_triangulate(const RectifiedRig& rr, const Vec2& pl,
                                    const Vec2& pr, double min_disparity) {
  if (!pl.allFinite() || !pr.allFinite()) return std::nullopt;
  if (!(pl.x() - pr.x() > min_disparity)) return std::nullopt;
  const auto p1 = rr.projection(CameraSide::kLeft);
  const auto p2 = rr.projection(CameraSide::kRight);
  Eigen::Matrix4d design;
  design.row(0) = pl.x() * p1.row(2) - p1.row(0);
  design.row(1) = pl.y() * p1.row(2) - p1.row(1);
  design.row(2) = pr.x() * p2.row(2) - p2.row(0);
  design.row(3) = pr.y() * p2.row(2) - p2.row(1);
  for (int i = 0; i < 4; ++i) design.row(i).normalize();
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(design, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x[3]) < 1e-300) return std::nullopt;
  const Vec3 rect = x.head<3>() / x[3];
  return rr.rect_left.transpose() * rect;
}

Vec3 triangulate(const RectifiedRig& rr, const Vec2& pl, const Vec2& pr,
                 double min_disparity) {
  if (!(pl.x() - pr.x() > min_disparity))
    throw ValidationError("disparity", "disparity " +
                                           std::to_string(pl.x() - pr.x()) +
                                           " px at or below the reliable floor");
  auto x = try_triangulate(rr, pl, pr, min_disparity);
  if (!x) throw ValidationError("disparity", "triangulation failed");
  return *x;
}

// ---- reconstruction ----------------------------------------------------------------

Reconstruction reconstruct_individual(const StereoMatch& match, const Track& left,
                                      const Track& right, const RectifiedRig& rr,
                                      const AxisLookup& left_axes,
                                      const AxisLookup& right_axes,
                                      double tolerance) {
  Reconstruction out;
  out.match = match;
  for (FrameIndex frame : match.frames) {
    const auto* lo = left.at_frame(frame);
    const auto* ro = right.at_frame(frame);
    if (!lo || !ro) continue;
    FrameReconstruction fr;
    fr.frame = frame;
    const auto lc = rectify_point(rr, lo->bbox.center(), CameraSide::kLeft);
    const auto rc = rectify_point(rr, ro->bbox.center(), CameraSide::kRight);
    if (lc.in_region && rc.in_region)
      fr.center = try_triangulate(rr, lc.point, rc.point);

    auto la = left_axes.find(frame);
    auto ra = right_axes.find(frame);
    if (la != left_axes.end() && ra != right_axes.end()) {
      const Vec2 l[2] = {rectify_point(rr, la->second.head, CameraSide::kLeft).point,
                         rectify_point(rr, la->second.tail, CameraSide::kLeft).point};
      const Vec2 r[2] = {rectify_point(rr, ra->second.head, CameraSide::kRight).point,
                         rectify_point(rr, ra->second.tail, CameraSide::kRight).point};
      // Pair endpoints so both disparities are positive and consistent.
      auto pairing_cost = [&](int swap) {
        const Vec2& r0 = r[swap];
        const Vec2& r1 = r[1 - swap];
        const double d0 = l[0].x() - r0.x(), d1 = l[1].x() - r1.x();
        if (!(d0 > 0 && d1 > 0)) return std::numeric_limits<double>::infinity();
        return std::abs(l[0].y() - r0.y()) + std::abs(l[1].y() - r1.y()) +
               std::abs(d0 - d1);
      };
      const double c0 = pairing_cost(0), c1 = pairing_cost(1);
      if (std::isfinite(std::min(c0, c1))) {
        const int swap = c1 < c0 ? 1 : 0;
        const Vec2& r0 = r[swap];
        const Vec2& r1 = r[1 - swap];
        const double limit =
            tolerance * rectify_box(rr, lo->bbox, CameraSide::kLeft).height() + 1e-9;
        if (std::abs(l[0].y() - r0.y()) <= limit &&
            std::abs(l[1].y() - r1.y()) <= limit) {
          fr.endpoints_matched = true;
          fr.on_image_edge = la->second.on_image_edge || ra->second.on_image_edge;
          fr.head = try_triangulate(rr, l[0], r0);
          fr.tail = try_triangulate(rr, l[1], r1);
          if (fr.head && fr.tail) fr.length_m = (*fr.head - *fr.tail).norm();
        }
      }
    }
    out.frames.push_back(std::move(fr));
  }
  return out;
}

}  // namespace reef
