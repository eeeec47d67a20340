#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ovqa/frame.hpp"
#include "ovqa/geometry.hpp"

namespace ovqa {

// Near-uniform sphere point set (spherical Fibonacci lattice).
struct SampleSet {
  std::vector<SpherePoint> points;
};

inline constexpr int kDefaultSpsnrSamples = 655362;

// Continuous pixel position; pixel (x, y) has its center at
// (x + 0.5, y + 0.5) in this coordinate system.
struct PixelPos {
  double x = 0.0;
  double y = 0.0;
};

// Sphere point under the pixel center, or empty for pixels with no sphere
// preimage (CPP padding). Throws on out-of-range pixels or inconsistent
// frame geometry.
std::optional<SpherePoint> pixel_to_sphere(int x, int y, int width, int height,
                                           ProjectionKind kind);

// Continuous pixel position of a sphere point, or empty when the point has
// no image under the projection.
std::optional<PixelPos> sphere_to_pixel(const SpherePoint& p, int width, int height,
                                        ProjectionKind kind);

SampleSet uniform_samples(int n);

// Bilinear sample at a continuous position. ERP wraps horizontally and
// clamps at the poles; the other projections clamp on both axes.
double bilinear_sample(const FramePlane& frame, double cx, double cy,
                       ProjectionKind kind);

FramePlane resample_frame(const FramePlane& src, ProjectionKind src_kind,
                          ProjectionKind dst_kind, int dst_width, int dst_height);

// Per-pixel center directions for a whole raster, plus a validity flag for
// projections with padding pixels.
struct DirectionGrid {
  int width = 0;
  int height = 0;
  std::vector<Vec3> directions;
  std::vector<std::uint8_t> valid;

  static DirectionGrid make(int width, int height, ProjectionKind kind);
  bool is_valid(int x, int y) const {
    return valid[static_cast<std::size_t>(y) * width + x] != 0;
  }
  const Vec3& dir(int x, int y) const {
    return directions[static_cast<std::size_t>(y) * width + x];
  }
};

}  // namespace ovqa
