#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reef/body_axis.hpp"
#include "reef/individual.hpp"
#include "reef/species.hpp"
#include "reef/stereo.hpp"

namespace reef {

// Binary raster over a polygon's padded bounding box. Cell (c, r) covers
// [origin + c*cell, origin + (c+1)*cell) horizontally, likewise vertically.
struct RasterGrid {
  double origin_x = 0;
  double origin_y = 0;
  double cell = 1;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> cells;

  bool at(int c, int r) const {
    return c >= 0 && r >= 0 && c < width && r < height && cells[r * width + c];
  }
  Vec2 cell_center(int c, int r) const {
    return {origin_x + (c + 0.5) * cell, origin_y + (r + 0.5) * cell};
  }
  std::size_t count() const;
  std::vector<Vec2> points() const;
};

// A cell is set iff its centre lies inside the polygon (even-odd rule).
// Throws ValidationError for polygons with fewer than 3 vertices or zero
// area.
RasterGrid rasterize_polygon(const Polygon& polygon, double resolution = 1.0);

// Zhang-Suen thinning. Every 8-connected foreground component keeps at
// least one cell.
RasterGrid thin(const RasterGrid& grid);
std::vector<Vec2> skeletonize(const RasterGrid& grid);

struct PrincipalAxis {
  Vec2 centroid = Vec2::Zero();
  Vec2 direction = Vec2::UnitX();  // unit, x >= 0 (y >= 0 when x == 0)
  double major_variance = 0;
  double minor_variance = 0;
};

inline constexpr double kMinAxisEigenRatio = 1.2;

// First principal component. Throws ValidationError("shape") when there are
// fewer than two distinct points or the eigenvalue ratio is below
// `min_ratio`.
PrincipalAxis principal_axis(std::span<const Vec2> points,
                             double min_ratio = kMinAxisEigenRatio);

// Extremal intersections of the line (centroid, direction) with the polygon
// boundary. nullopt when fewer than two distinct intersections exist.
std::optional<BodyAxisSample> head_tail_endpoints(const Polygon& polygon,
                                                  const Vec2& centroid,
                                                  const Vec2& direction,
                                                  ImageSize image,
                                                  double edge_margin = 2.0);

struct BodyAxisConfig {
  double grid_resolution = 1.0;
  double min_eigen_ratio = kMinAxisEigenRatio;
  double edge_margin = 2.0;
};

// rasterize -> skeletonize -> principal axis -> boundary intersections.
// nullopt when any stage finds the shape degenerate.
std::optional<BodyAxisSample> extract_body_axis(const Polygon& polygon,
                                                ImageSize image, FrameIndex frame,
                                                const BodyAxisConfig& config = {});

struct ScreeningConfig {
  double min_angle_deg = 45.0;
  double max_angle_deg = 135.0;
};

// Angle between a 3D body vector and the left optical axis within band.
bool orientation_accepted(const Vec3& body_vector,
                          const ScreeningConfig& config = {});

std::vector<LengthSample> screen_samples(const Reconstruction& reconstruction,
                                         const ScreeningConfig& config = {});

// Linear interpolation between order statistics (type 7); q in [0, 1].
double percentile(std::vector<double> values, double q);

// Representative length in cm, nullopt without samples.
std::optional<double> representative_length_cm(std::span<const LengthSample> samples,
                                               double percentile_rank = 75.0);

struct WeightResult {
  enum class Status { kWeighed, kExcluded, kNoParameters };
  Status status = Status::kNoParameters;
  double grams = 0;
};

inline constexpr double kBiomassCutoffFactor = 1.5;

WeightResult length_to_weight(double length_cm, const SpeciesRecord& record,
                              double cutoff_factor = kBiomassCutoffFactor);

// Builds the individual's samples, representative length and centre path.
// Weight is left unset; it depends on clip-level allocation.
Individual measure_individual(const Reconstruction& reconstruction,
                              const std::string& clip_id,
                              const std::string& class_label,
                              const ScreeningConfig& screening = {},
                              double percentile_rank = 75.0);

}  // namespace reef
