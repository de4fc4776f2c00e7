#include "reef/hull.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <utility>

#include "reef/error.hpp"

namespace reef {

namespace {

struct Face {
  std::array<std::size_t, 3> v{};
  Vec3 normal = Vec3::Zero();
  double offset = 0;
  bool alive = true;
  std::vector<std::size_t> outside;

  double distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

Face make_face(std::span<const Vec3> pts, std::size_t a, std::size_t b, std::size_t c) {
  Face f;
  f.v = {a, b, c};
  Vec3 n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
  const double len = n.norm();
  if (len > 0) n /= len;
  f.normal = n;
  f.offset = n.dot(pts[a]);
  return f;
}

}  // namespace

ConvexHull convex_hull(std::span<const Vec3> pts) {
  const std::size_t n = pts.size();
  if (n < 4) throw InsufficientDataError("convex hull needs at least 4 points");

  Vec3 lo = pts[0], hi = pts[0];
  std::array<std::size_t, 6> extreme{};
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      if (pts[i][d] < pts[extreme[2 * d]][d]) extreme[2 * d] = i;
      if (pts[i][d] > pts[extreme[2 * d + 1]][d]) extreme[2 * d + 1] = i;
    }
    lo = lo.cwiseMin(pts[i]);
    hi = hi.cwiseMax(pts[i]);
  }
  const double extent = (hi - lo).maxCoeff();
  const double eps = 1e-10 * std::max(1.0, extent);

  std::size_t i0 = extreme[0], i1 = extreme[1];
  double best = -1;
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = a + 1; b < 6; ++b) {
      const double d = (pts[extreme[a]] - pts[extreme[b]]).squaredNorm();
      if (d > best) {
        best = d;
        i0 = extreme[a];
        i1 = extreme[b];
      }
    }
  if (std::sqrt(best) <= eps) throw InsufficientDataError("all points coincide");

  const Vec3 axis = (pts[i1] - pts[i0]).normalized();
  std::size_t i2 = n;
  best = eps;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).cross(axis).norm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (i2 == n) throw InsufficientDataError("points are collinear");

  const Vec3 plane_n = (pts[i1] - pts[i0]).cross(pts[i2] - pts[i0]).normalized();
  std::size_t i3 = n;
  best = eps;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(plane_n.dot(pts[i] - pts[i0]));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (i3 == n) throw InsufficientDataError("points are coplanar");

  const Vec3 inner = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
  std::vector<Face> faces;
  auto add_oriented = [&](std::size_t a, std::size_t b, std::size_t c) {
    Face f = make_face(pts, a, b, c);
    if (f.distance(inner) > 0) f = make_face(pts, a, c, b);
    faces.push_back(std::move(f));
  };
  add_oriented(i0, i1, i2);
  add_oriented(i0, i1, i3);
  add_oriented(i0, i2, i3);
  add_oriented(i1, i2, i3);

  for (std::size_t i = 0; i < n; ++i) {
    if (i == i0 || i == i1 || i == i2 || i == i3) continue;
    for (auto& f : faces) {
      if (f.distance(pts[i]) > eps) {
        f.outside.push_back(i);
        break;
      }
    }
  }

  for (;;) {
    std::size_t current = faces.size();
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      if (faces[fi].alive && !faces[fi].outside.empty()) {
        current = fi;
        break;
      }
    }
    if (current == faces.size()) break;

    const auto& out = faces[current].outside;
    const std::size_t apex = *std::max_element(out.begin(), out.end(), [&](auto a, auto b) {
      return faces[current].distance(pts[a]) < faces[current].distance(pts[b]);
    });
    const Vec3& p = pts[apex];

    std::vector<std::size_t> visible;
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      if (!faces[fi].alive) continue;
      if (fi == current || faces[fi].distance(p) > eps) {
        visible.push_back(fi);
        const auto& v = faces[fi].v;
        for (int e = 0; e < 3; ++e) edges.insert({v[e], v[(e + 1) % 3]});
      }
    }

    std::vector<std::size_t> orphans;
    for (std::size_t fi : visible) {
      faces[fi].alive = false;
      for (std::size_t q : faces[fi].outside)
        if (q != apex) orphans.push_back(q);
      faces[fi].outside.clear();
      faces[fi].outside.shrink_to_fit();
    }

    const std::size_t first_new = faces.size();
    for (const auto& [a, b] : edges) {
      if (edges.count({b, a})) continue;
      faces.push_back(make_face(pts, a, b, apex));
    }
    for (std::size_t q : orphans) {
      for (std::size_t fi = first_new; fi < faces.size(); ++fi) {
        if (faces[fi].distance(pts[q]) > eps) {
          faces[fi].outside.push_back(q);
          break;
        }
      }
    }
  }

  ConvexHull hull;
  std::set<std::size_t> verts;
  for (const auto& f : faces) {
    if (!f.alive) continue;
    hull.faces.push_back(f.v);
    verts.insert(f.v.begin(), f.v.end());
    const Vec3 a = pts[f.v[0]] - inner, b = pts[f.v[1]] - inner, c = pts[f.v[2]] - inner;
    hull.volume += a.dot(b.cross(c)) / 6.0;
  }
  hull.vertices.assign(verts.begin(), verts.end());
  return hull;
}

KnnFilterResult knn_outlier_filter(std::span<const Vec3> pts, int k, double std_mul) {
  KnnFilterResult out;
  const std::size_t n = pts.size();
  if (k <= 0 || n <= static_cast<std::size_t>(k)) {
    out.kept.assign(pts.begin(), pts.end());
    return out;
  }
  std::vector<double> stat(n);
  std::vector<double> nearest(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    // k smallest squared distances, kept sorted ascending
    std::fill(nearest.begin(), nearest.end(), std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (pts[i] - pts[j]).squaredNorm();
      if (d >= nearest.back()) continue;
      auto pos = std::upper_bound(nearest.begin(), nearest.end(), d);
      std::move_backward(pos, nearest.end() - 1, nearest.end());
      *pos = d;
    }
    double sum = 0;
    for (double d : nearest) sum += std::sqrt(d);
    stat[i] = sum / k;
  }
  const double mean = std::accumulate(stat.begin(), stat.end(), 0.0) / n;
  double var = 0;
  for (double s : stat) var += (s - mean) * (s - mean);
  const double threshold = mean + std_mul * std::sqrt(var / n);
  for (std::size_t i = 0; i < n; ++i) {
    if (stat[i] > threshold) {
      ++out.removed;
    } else {
      out.kept.push_back(pts[i]);
    }
  }
  return out;
}

VolumeEstimate observation_volume(std::span<const Vec3> points, const VolumeOptions& options) {
  if (points.size() < options.min_points)
    throw InsufficientDataError("insufficient point cloud density: " +
                                std::to_string(points.size()) + " points, need " +
                                std::to_string(options.min_points));
  VolumeEstimate est;
  std::vector<Vec3> cloud;
  if (options.remove_outliers) {
    auto filtered = knn_outlier_filter(points, options.k, options.std_mul);
    cloud = std::move(filtered.kept);
    est.n_outliers_removed = filtered.removed;
  } else {
    cloud.assign(points.begin(), points.end());
  }
  est.n_points_used = cloud.size();
  const ConvexHull hull = convex_hull(cloud);
  if (!(hull.volume > 0)) throw InsufficientDataError("degenerate hull");
  est.volume_m3 = hull.volume;
  for (std::size_t v : hull.vertices) est.hull_vertices.push_back(cloud[v]);
  return est;
}

}  // namespace reef
