#include "ovqa/frame.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovqa {

const char* to_string(ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::Erp: return "erp";
    case ProjectionKind::Rcmp: return "rcmp";
    case ProjectionKind::Tsp: return "tsp";
    case ProjectionKind::Cpp: return "cpp";
  }
  return "?";
}

ProjectionKind projection_from_string(const std::string& name) {
  if (name == "erp") return ProjectionKind::Erp;
  if (name == "rcmp") return ProjectionKind::Rcmp;
  if (name == "tsp") return ProjectionKind::Tsp;
  if (name == "cpp") return ProjectionKind::Cpp;
  throw std::invalid_argument("unknown projection: " + name);
}

void check_frame_geometry(ProjectionKind kind, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("frame dimensions must be positive");
  }
  switch (kind) {
    case ProjectionKind::Erp:
    case ProjectionKind::Cpp:
    case ProjectionKind::Tsp:
      if (width != 2 * height) {
        throw std::invalid_argument(std::string(to_string(kind)) +
                                    " frames must have a 2:1 aspect ratio");
      }
      break;
    case ProjectionKind::Rcmp:
      if (2 * width != 3 * height) {
        throw std::invalid_argument("rcmp frames must have a 3:2 aspect ratio");
      }
      break;
  }
}

double weight_sum(const WeightMap& map) {
  double total = 0.0;
  for (float v : map.values) total += v;
  return total;
}

void validate_meta(const VideoMeta& meta) {
  check_frame_geometry(meta.projection, meta.width, meta.height);
  if (!(meta.frame_rate >= 1.0 && meta.frame_rate <= 240.0)) {
    throw std::invalid_argument("frame rate must lie in [1, 240] fps");
  }
  if (meta.frame_count < 0) {
    throw std::invalid_argument("frame count must be non-negative");
  }
}

FramePlane resize_bilinear(const FramePlane& src, int dst_width, int dst_height) {
  if (dst_width <= 0 || dst_height <= 0) {
    throw std::invalid_argument("resize target must be positive");
  }
  if (dst_width == src.width && dst_height == src.height) return src;

  FramePlane dst(dst_width, dst_height);
  const double sx = static_cast<double>(src.width) / dst_width;
  const double sy = static_cast<double>(src.height) / dst_height;
  for (int y = 0; y < dst_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const double wy = fy - y0;
    const int y1 = std::min(y0 + 1, src.height - 1);
    for (int x = 0; x < dst_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const double wx = fx - x0;
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double top = (1.0 - wx) * src.at(x0, y0) + wx * src.at(x1, y0);
      const double bot = (1.0 - wx) * src.at(x0, y1) + wx * src.at(x1, y1);
      const double v = (1.0 - wy) * top + wy * bot;
      dst.at(x, y) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
    }
  }
  return dst;
}

}  // namespace ovqa
