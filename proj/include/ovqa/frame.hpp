#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovqa {

enum class ProjectionKind { Erp, Rcmp, Tsp, Cpp };

const char* to_string(ProjectionKind kind);
ProjectionKind projection_from_string(const std::string& name);

// Throws when (width, height) violates the aspect constraint of the
// projection: 2:1 for ERP/CPP/TSP, 3:2 for RCMP.
void check_frame_geometry(ProjectionKind kind, int width, int height);

// Single-channel 8-bit intensity raster (the Y plane).
struct FramePlane {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> samples;  // row-major, width * height

  FramePlane() = default;
  FramePlane(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), samples(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int x, int y) const {
    return samples[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return samples[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t pixel_count() const { return samples.size(); }
};

// Per-pixel non-negative weights aligned to a FramePlane.
struct WeightMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major, width * height

  WeightMap() = default;
  WeightMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

double weight_sum(const WeightMap& map);

struct VideoMeta {
  int width = 0;
  int height = 0;
  double frame_rate = 30.0;
  int frame_count = 0;
  ProjectionKind projection = ProjectionKind::Erp;
};

// Throws when dimensions are non-positive, the frame rate is outside
// [1, 240], or the aspect ratio is inconsistent with the projection.
void validate_meta(const VideoMeta& meta);

// Plain separable bilinear resize, pixel centers aligned.
FramePlane resize_bilinear(const FramePlane& src, int dst_width, int dst_height);

}  // namespace ovqa
