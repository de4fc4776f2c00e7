#include "reef/biometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "reef/error.hpp"

namespace reef {

std::size_t RasterGrid::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1));
}

std::vector<Vec2> RasterGrid::points() const {
  std::vector<Vec2> out;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (cells[r * width + c]) out.push_back(cell_center(c, r));
  return out;
}

namespace {

double shoelace_area(const Polygon& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

}  // namespace

RasterGrid rasterize_polygon(const Polygon& poly, double resolution) {
  if (poly.size() < 3)
    throw ValidationError("polygon", "needs at least 3 vertices");
  if (!(resolution > 0))
    throw ValidationError("grid_resolution", "must be positive");
  if (std::abs(shoelace_area(poly)) < 1e-12)
    throw ValidationError("polygon", "zero-area polygon");

  double minx = poly[0].x(), maxx = minx, miny = poly[0].y(), maxy = miny;
  for (const auto& p : poly) {
    minx = std::min(minx, p.x());
    maxx = std::max(maxx, p.x());
    miny = std::min(miny, p.y());
    maxy = std::max(maxy, p.y());
  }
  RasterGrid g;
  g.cell = resolution;
  const double c0 = std::floor(minx / resolution), r0 = std::floor(miny / resolution);
  g.origin_x = (c0 - 1) * resolution;
  g.origin_y = (r0 - 1) * resolution;
  g.width = static_cast<int>(std::ceil(maxx / resolution) - c0) + 2;
  g.height = static_cast<int>(std::ceil(maxy / resolution) - r0) + 2;
  g.cells.assign(static_cast<std::size_t>(g.width) * g.height, 0);

  // Scanline fill through cell centres with half-open edge crossings.
  std::vector<double> xs;
  const std::size_t n = poly.size();
  for (int r = 0; r < g.height; ++r) {
    const double y = g.origin_y + (r + 0.5) * resolution;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % n];
      if ((a.y() <= y && y < b.y()) || (b.y() <= y && y < a.y()))
        xs.push_back(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // centre x = origin + (c + 0.5) * res, need xs[k] <= x < xs[k+1]
      const int c_begin = static_cast<int>(
          std::ceil((xs[k] - g.origin_x) / resolution - 0.5));
      const int c_end = static_cast<int>(
          std::ceil((xs[k + 1] - g.origin_x) / resolution - 0.5));
      for (int c = std::max(c_begin, 0); c < std::min(c_end, g.width); ++c)
        g.cells[r * g.width + c] = 1;
    }
  }
  return g;
}

RasterGrid thin(const RasterGrid& grid) {
  RasterGrid g = grid;
  const int w = g.width, h = g.height;
  auto px = [&](int c, int r) -> int { return g.at(c, r) ? 1 : 0; };
  std::vector<int> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      to_clear.clear();
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          if (!g.cells[r * w + c]) continue;
          // P2..P9 clockwise from north.
          const int p[8] = {px(c, r - 1), px(c + 1, r - 1), px(c + 1, r),
                            px(c + 1, r + 1), px(c, r + 1), px(c - 1, r + 1),
                            px(c - 1, r), px(c - 1, r - 1)};
          int b = 0, a = 0;
          for (int k = 0; k < 8; ++k) {
            b += p[k];
            if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const int n2 = p[0], n4 = p[2], n6 = p[4], n8 = p[6];
          if (pass == 0 && (n2 * n4 * n6 != 0 || n4 * n6 * n8 != 0)) continue;
          if (pass == 1 && (n2 * n4 * n8 != 0 || n2 * n6 * n8 != 0)) continue;
          to_clear.push_back(r * w + c);
        }
      }
      for (int idx : to_clear) g.cells[idx] = 0;
      changed = changed || !to_clear.empty();
    }
  }

  // Restore one cell for any component the parallel passes erased entirely.
  std::vector<int> label(grid.cells.size(), -1);
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(grid.cells.size()); ++start) {
    if (!grid.cells[start] || label[start] >= 0) continue;
    std::vector<int> members;
    bool survived = false;
    stack.push_back(start);
    label[start] = start;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      members.push_back(idx);
      survived = survived || g.cells[idx];
      const int c = idx % w, r = idx / w;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int nc = c + dc, nr = r + dr;
          if ((dc || dr) && grid.at(nc, nr) && label[nr * w + nc] < 0) {
            label[nr * w + nc] = start;
            stack.push_back(nr * w + nc);
          }
        }
    }
    if (survived) continue;
    Vec2 mean = Vec2::Zero();
    for (int idx : members) mean += Vec2(idx % w, idx / w);
    mean /= static_cast<double>(members.size());
    const int best = *std::min_element(members.begin(), members.end(), [&](int x, int y) {
      return (Vec2(x % w, x / w) - mean).squaredNorm() <
             (Vec2(y % w, y / w) - mean).squaredNorm();
    });
    g.cells[best] = 1;
  }
  return g;
}

std::vector<Vec2> skeletonize(const RasterGrid& grid) { return thin(grid).points(); }

PrincipalAxis principal_axis(std::span<const Vec2> points, double min_ratio) {
  if (points.size() < 2)
    throw ValidationError("shape", "principal axis needs at least 2 points");
  PrincipalAxis out;
  for (const auto& p : points) out.centroid += p;
  out.centroid /= static_cast<double>(points.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : points) {
    const Vec2 d = p - out.centroid;
    sxx += d.x() * d.x();
    sxy += d.x() * d.y();
    syy += d.y() * d.y();
  }
  const double n = static_cast<double>(points.size());
  sxx /= n;
  sxy /= n;
  syy /= n;
  const double half_trace = 0.5 * (sxx + syy);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
  out.major_variance = half_trace + disc;
  out.minor_variance = std::max(0.0, half_trace - disc);
  if (!(out.major_variance > 0))
    throw ValidationError("shape", "points are not distinct");
  if (out.minor_variance > 0 && out.major_variance / out.minor_variance < min_ratio)
    throw ValidationError("shape", "no dominant axis (eigenvalue ratio below " +
                                       std::to_string(min_ratio) + ")");
  Vec2 dir;
  if (std::abs(sxy) > 1e-15 * std::max(1.0, out.major_variance)) {
    dir = {out.major_variance - syy, sxy};
  } else {
    dir = sxx >= syy ? Vec2(1, 0) : Vec2(0, 1);
  }
  dir.normalize();
  if (dir.x() < 0 || (dir.x() == 0 && dir.y() < 0)) dir = -dir;
  out.direction = dir;
  return out;
}

std::optional<BodyAxisSample> head_tail_endpoints(const Polygon& poly,
                                                  const Vec2& centroid,
                                                  const Vec2& direction,
                                                  ImageSize image,
                                                  double edge_margin) {
  auto cross = [](const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); };
  double smin = std::numeric_limits<double>::infinity();
  double smax = -smin;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2 e = poly[(i + 1) % n] - a;
    const double denom = cross(direction, e);
    if (std::abs(denom) <= 1e-12 * e.norm()) continue;
    const Vec2 ac = a - centroid;
    const double s = cross(ac, e) / denom;
    const double u = cross(ac, direction) / denom;
    if (u < -1e-12 || u > 1 + 1e-12) continue;
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  if (!(smax - smin > 1e-9)) return std::nullopt;
  BodyAxisSample out;
  out.head = centroid + smin * direction;
  out.tail = centroid + smax * direction;
  out.axis_direction = direction;
  auto near_edge = [&](const Vec2& p) {
    return p.x() <= edge_margin || p.y() <= edge_margin ||
           p.x() >= image.width - edge_margin || p.y() >= image.height - edge_margin;
  };
  out.on_image_edge = near_edge(out.head) || near_edge(out.tail);
  return out;
}

std::optional<BodyAxisSample> extract_body_axis(const Polygon& polygon,
                                                ImageSize image, FrameIndex frame,
                                                const BodyAxisConfig& config) {
  try {
    const RasterGrid grid = rasterize_polygon(polygon, config.grid_resolution);
    const std::vector<Vec2> skeleton = skeletonize(grid);
    const PrincipalAxis axis = principal_axis(skeleton, config.min_eigen_ratio);
    auto sample = head_tail_endpoints(polygon, axis.centroid, axis.direction, image,
                                      config.edge_margin);
    if (sample) sample->frame = frame;
    return sample;
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

bool orientation_accepted(const Vec3& v, const ScreeningConfig& config) {
  const double norm = v.norm();
  if (!(norm > 0)) return false;
  const double cosine = std::clamp(v.z() / norm, -1.0, 1.0);
  const double angle = std::acos(cosine) * 180.0 / std::numbers::pi;
  constexpr double kSlack = 1e-9;
  return angle >= config.min_angle_deg - kSlack && angle <= config.max_angle_deg + kSlack;
}

std::vector<LengthSample> screen_samples(const Reconstruction& rec,
                                         const ScreeningConfig& config) {
  std::vector<LengthSample> out;
  for (const auto& f : rec.frames) {
    if (!f.endpoints_matched || f.on_image_edge || !f.length_m) continue;
    if (!orientation_accepted(*f.tail - *f.head, config)) continue;
    out.push_back({f.frame, *f.length_m});
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InsufficientDataError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::optional<double> representative_length_cm(std::span<const LengthSample> samples,
                                               double percentile_rank) {
  if (samples.empty()) return std::nullopt;
  std::vector<double> lengths;
  lengths.reserve(samples.size());
  for (const auto& s : samples) lengths.push_back(s.length_m);
  return percentile(std::move(lengths), percentile_rank / 100.0) * 100.0;
}

WeightResult length_to_weight(double length_cm, const SpeciesRecord& record,
                              double cutoff_factor) {
  if (!(length_cm > 0)) throw ValidationError("length_cm", "length must be positive");
  WeightResult out;
  if (record.max_length_cm && length_cm > cutoff_factor * *record.max_length_cm) {
    out.status = WeightResult::Status::kExcluded;
    return out;
  }
  if (!record.has_length_weight()) {
    out.status = WeightResult::Status::kNoParameters;
    return out;
  }
  out.status = WeightResult::Status::kWeighed;
  out.grams = *record.lw_a * std::pow(length_cm, *record.lw_b);
  return out;
}

Individual measure_individual(const Reconstruction& rec, const std::string& clip_id,
                              const std::string& class_label,
                              const ScreeningConfig& screening,
                              double percentile_rank) {
  Individual ind;
  ind.clip_id = clip_id;
  ind.left_id = rec.match.left_id;
  ind.right_id = rec.match.right_id;
  ind.class_label = class_label;
  ind.length_samples = screen_samples(rec, screening);
  ind.length_cm = representative_length_cm(ind.length_samples, percentile_rank);
  for (const auto& f : rec.frames)
    if (f.center) ind.centers.push_back({f.frame, *f.center});
  return ind;
}

}  // namespace reef
