#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "reef/types.hpp"

namespace reef {

struct ConvexHull {
  std::vector<std::size_t> vertices;                 // indices into the input
  std::vector<std::array<std::size_t, 3>> faces;     // outward, counter-clockwise
  double volume = 0;
};

// Quickhull. Throws InsufficientDataError when fewer than four non-coplanar
// points are given.
ConvexHull convex_hull(std::span<const Vec3> points);

struct KnnFilterResult {
  std::vector<Vec3> kept;
  std::size_t removed = 0;
};

// Drops points whose mean distance to their k nearest neighbours exceeds
// mean + std_mul * stdev of that statistic (population stdev).
KnnFilterResult knn_outlier_filter(std::span<const Vec3> points, int k = 8,
                                   double std_mul = 2.0);

struct VolumeOptions {
  int k = 8;
  double std_mul = 2.0;
  std::size_t min_points = 30;
  bool remove_outliers = true;
};

struct VolumeEstimate {
  std::vector<Vec3> hull_vertices;
  double volume_m3 = 0;
  std::size_t n_points_used = 0;
  std::size_t n_outliers_removed = 0;
};

// Throws InsufficientDataError below `min_points` or for a flat cloud.
VolumeEstimate observation_volume(std::span<const Vec3> points,
                                  const VolumeOptions& options = {});

}  // namespace reef
