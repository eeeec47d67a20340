#include "ovqa/projection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovqa {

namespace {

// RCMP packs the six cube faces on a 3x2 grid: top row {left, front, right}
// in their natural orientation, bottom row {bottom, back, top} rotated a
// quarter turn. Face-local coordinates (s, t) are in [-1, 1], s along the
// natural face-right direction and t downward.
enum CubeFace { kLeft, kFront, kRight, kBottom, kBack, kTop };

Vec3 cube_face_direction(int face, double s, double t) {
  switch (face) {
    case kFront: return {1.0, s, -t};
    case kBack: return {-1.0, -s, -t};
    case kLeft: return {s, -1.0, -t};
    case kRight: return {-s, 1.0, -t};
    case kTop: return {t, s, 1.0};
    case kBottom: return {-t, s, -1.0};
  }
  return {};
}

int classify_cube_face(const Vec3& d, double& s, double& t) {
  const double ax = std::abs(d.x), ay = std::abs(d.y), az = std::abs(d.z);
  if (ax >= ay && ax >= az) {
    if (d.x > 0.0) {
      s = d.y / d.x;
      t = -d.z / d.x;
      return kFront;
    }
    s = d.y / d.x;
    t = d.z / d.x;
    return kBack;
  }
  if (ay >= az) {
    s = -d.x / d.y;
    if (d.y > 0.0) {
      t = -d.z / d.y;
      return kRight;
    }
    t = d.z / d.y;
    return kLeft;
  }
  if (d.z > 0.0) {
    s = d.y / d.z;
    t = d.x / d.z;
    return kTop;
  }
  s = -d.y / d.z;
  t = d.x / d.z;
  return kBottom;
}

// Grid slot (fx, fy) of each face and whether the slot stores the face
// image rotated (bottom row).
void rcmp_face_slot(int face, int& fx, int& fy) {
  switch (face) {
    case kLeft: fx = 0; fy = 0; break;
    case kFront: fx = 1; fy = 0; break;
    case kRight: fx = 2; fy = 0; break;
    case kBottom: fx = 0; fy = 1; break;
    case kBack: fx = 1; fy = 1; break;
    case kTop: fx = 2; fy = 1; break;
  }
}

SpherePoint rcmp_pixel_to_sphere(double cx, double cy, int width) {
  const int face_size = width / 3;
  int fx = std::min(static_cast<int>(cx / face_size), 2);
  int fy = std::min(static_cast<int>(cy / face_size), 1);
  const double a = 2.0 * (cx - fx * face_size) / face_size - 1.0;
  const double b = 2.0 * (cy - fy * face_size) / face_size - 1.0;

  static constexpr int kTopRow[3] = {kLeft, kFront, kRight};
  static constexpr int kBottomRow[3] = {kBottom, kBack, kTop};
  double s, t;
  int face;
  if (fy == 0) {
    face = kTopRow[fx];
    s = a;
    t = b;
  } else {
    face = kBottomRow[fx];
    s = b;
    t = -a;
  }
  return direction_to_sphere(cube_face_direction(face, s, t).normalized());
}

PixelPos rcmp_sphere_to_pixel(const SpherePoint& p, int width) {
  const int face_size = width / 3;
  double s, t;
  const int face = classify_cube_face(sphere_to_direction(p), s, t);
  int fx, fy;
  rcmp_face_slot(face, fx, fy);
  double a, b;
  if (fy == 0) {
    a = s;
    b = t;
  } else {
    a = -t;
    b = s;
  }
  return {fx * face_size + (a + 1.0) * 0.5 * face_size,
          fy * face_size + (b + 1.0) * 0.5 * face_size};
}

// TSP: the front cube face fills the left half of the frame; the right half
// holds the remaining five faces. The back face is the central square of
// side ratio kTspBackRatio, and the four side faces map onto the trapezoids
// between the central square and the outer edge along radial lines.
constexpr double kTspBackRatio = 1.0 / 3.0;

Vec3 tsp_right_half_direction(double p, double q) {
  const double rho = kTspBackRatio;
  const double am = std::max(std::abs(p), std::abs(q));
  if (am <= rho) {
    return {-1.0, -p / rho, -q / rho};  // back face
  }
  const double m = am;
  const double g = (1.0 - m) / (1.0 - rho);
  const double big_x = 1.0 - 2.0 * g;
  if (std::abs(q) >= std::abs(p)) {
    if (q < 0.0) return {big_x, -p / m, 1.0};   // top face
    return {big_x, -p / m, -1.0};               // bottom face
  }
  if (p < 0.0) return {big_x, 1.0, -q / m};     // right cube face
  return {big_x, -1.0, -q / m};                 // left cube face
}

SpherePoint tsp_pixel_to_sphere(double cx, double cy, int height) {
  const int half = height;
  if (cx < half) {
    const double s = 2.0 * cx / half - 1.0;
    const double t = 2.0 * cy / half - 1.0;
    return direction_to_sphere(Vec3{1.0, s, -t}.normalized());
  }
  const double p = 2.0 * (cx - half) / half - 1.0;
  const double q = 2.0 * cy / half - 1.0;
  return direction_to_sphere(tsp_right_half_direction(p, q).normalized());
}

PixelPos tsp_sphere_to_pixel(const SpherePoint& sp, int height) {
  const double rho = kTspBackRatio;
  const int half = height;
  const Vec3 d = sphere_to_direction(sp);
  const double ax = std::abs(d.x), ay = std::abs(d.y), az = std::abs(d.z);

  if (d.x > 0.0 && ax >= ay && ax >= az) {
    const double s = d.y / d.x;
    const double t = -d.z / d.x;
    return {(s + 1.0) * 0.5 * half, (t + 1.0) * 0.5 * half};
  }

  double p, q;
  if (ax >= ay && ax >= az) {  // back face (d.x < 0)
    p = rho * d.y / d.x;
    q = rho * d.z / d.x;
  } else if (az >= ay) {
    const double big_x = (d.z > 0.0) ? d.x / d.z : -d.x / d.z;
    const double m = 1.0 - 0.5 * (1.0 - big_x) * (1.0 - rho);
    if (d.z > 0.0) {  // top face
      p = -m * d.y / d.z;
      q = -m;
    } else {  // bottom face
      p = m * d.y / d.z;
      q = m;
    }
  } else {
    const double big_x = (d.y > 0.0) ? d.x / d.y : -d.x / d.y;
    const double m = 1.0 - 0.5 * (1.0 - big_x) * (1.0 - rho);
    if (d.y > 0.0) {  // right cube face, left trapezoid
      q = -m * d.z / d.y;
      p = -m;
    } else {  // left cube face, right trapezoid
      q = m * d.z / d.y;
      p = m;
    }
  }
  return {half + (p + 1.0) * 0.5 * half, (q + 1.0) * 0.5 * half};
}

// Craster parabolic map, constants absorbed into the frame scaling:
// X = lon * (2*cos(2*lat/3) - 1) in [-pi, pi], Y = pi * sin(lat/3) in
// [-pi/2, pi/2]. The construction is exactly equal-area:
// (2*cos(2*lat/3) - 1) * cos(lat/3) == cos(lat).
std::optional<SpherePoint> cpp_pixel_to_sphere(double cx, double cy, int width,
                                               int height) {
  const double big_x = (2.0 * cx / width - 1.0) * kPi;
  const double big_y = (0.5 - cy / height) * kPi;
  const double lat = 3.0 * std::asin(std::clamp(big_y / kPi, -1.0, 1.0));
  const double denom = 2.0 * std::cos(2.0 * lat / 3.0) - 1.0;
  if (denom <= 0.0) {
    if (std::abs(big_x) > 1e-12) return std::nullopt;
    return SpherePoint(rad_to_deg(lat), 0.0);
  }
  const double lon = big_x / denom;
  if (std::abs(lon) > kPi) return std::nullopt;
  return SpherePoint(rad_to_deg(lat), rad_to_deg(lon));
}

PixelPos cpp_sphere_to_pixel(const SpherePoint& p, int width, int height) {
  const double lat = deg_to_rad(p.latitude);
  const double lon = deg_to_rad(p.longitude);
  const double big_x = lon * (2.0 * std::cos(2.0 * lat / 3.0) - 1.0);
  const double big_y = kPi * std::sin(lat / 3.0);
  return {(big_x / kPi + 1.0) * 0.5 * width, (0.5 - big_y / kPi) * height};
}

}  // namespace

std::optional<SpherePoint> pixel_to_sphere(int x, int y, int width, int height,
                                           ProjectionKind kind) {
  check_frame_geometry(kind, width, height);
  if (x < 0 || x >= width || y < 0 || y >= height) {
    throw std::invalid_argument("pixel index out of range");
  }
  const double cx = x + 0.5;
  const double cy = y + 0.5;
  switch (kind) {
    case ProjectionKind::Erp:
      return SpherePoint((0.5 - cy / height) * 180.0, (cx / width - 0.5) * 360.0);
    case ProjectionKind::Rcmp:
      return rcmp_pixel_to_sphere(cx, cy, width);
    case ProjectionKind::Tsp:
      return tsp_pixel_to_sphere(cx, cy, height);
    case ProjectionKind::Cpp:
      return cpp_pixel_to_sphere(cx, cy, width, height);
  }
  return std::nullopt;
}

std::optional<PixelPos> sphere_to_pixel(const SpherePoint& p, int width, int height,
                                        ProjectionKind kind) {
  check_frame_geometry(kind, width, height);
  switch (kind) {
    case ProjectionKind::Erp:
      return PixelPos{(p.longitude / 360.0 + 0.5) * width,
                      (0.5 - p.latitude / 180.0) * height};
    case ProjectionKind::Rcmp:
      return rcmp_sphere_to_pixel(p, width);
    case ProjectionKind::Tsp:
      return tsp_sphere_to_pixel(p, height);
    case ProjectionKind::Cpp:
      return cpp_sphere_to_pixel(p, width, height);
  }
  return std::nullopt;
}

SampleSet uniform_samples(int n) {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  SampleSet set;
  set.points.reserve(n);
  const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double lat = rad_to_deg(std::asin(std::clamp(z, -1.0, 1.0)));
    const double lon = wrap_degrees(rad_to_deg(i * golden_angle));
    set.points.emplace_back(lat, lon);
  }
  return set;
}

double bilinear_sample(const FramePlane& frame, double cx, double cy,
                       ProjectionKind kind) {
  const int w = frame.width;
  const int h = frame.height;
  const double fy = std::clamp(cy - 0.5, 0.0, h - 1.0);
  const int y0 = static_cast<int>(fy);
  const double wy = fy - y0;
  const int y1 = std::min(y0 + 1, h - 1);

  int x0, x1;
  double wx;
  if (kind == ProjectionKind::Erp) {
    const double fx = cx - 0.5;
    const double fl = std::floor(fx);
    wx = fx - fl;
    const int xi = static_cast<int>(fl);
    x0 = ((xi % w) + w) % w;
    x1 = (x0 + 1) % w;
  } else {
    const double fx = std::clamp(cx - 0.5, 0.0, w - 1.0);
    x0 = static_cast<int>(fx);
    wx = fx - x0;
    x1 = std::min(x0 + 1, w - 1);
  }

  const double top = (1.0 - wx) * frame.at(x0, y0) + wx * frame.at(x1, y0);
  const double bot = (1.0 - wx) * frame.at(x0, y1) + wx * frame.at(x1, y1);
  return (1.0 - wy) * top + wy * bot;
}

FramePlane resample_frame(const FramePlane& src, ProjectionKind src_kind,
                          ProjectionKind dst_kind, int dst_width, int dst_height) {
  check_frame_geometry(src_kind, src.width, src.height);
  check_frame_geometry(dst_kind, dst_width, dst_height);

  FramePlane dst(dst_width, dst_height);
  for (int y = 0; y < dst_height; ++y) {
    for (int x = 0; x < dst_width; ++x) {
      const auto sp = pixel_to_sphere(x, y, dst_width, dst_height, dst_kind);
      if (!sp) continue;
      const auto pos = sphere_to_pixel(*sp, src.width, src.height, src_kind);
      if (!pos) continue;
      const double v = bilinear_sample(src, pos->x, pos->y, src_kind);
      dst.at(x, y) = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
    }
  }
  return dst;
}

DirectionGrid DirectionGrid::make(int width, int height, ProjectionKind kind) {
  check_frame_geometry(kind, width, height);
  DirectionGrid grid;
  grid.width = width;
  grid.height = height;
  grid.directions.resize(static_cast<std::size_t>(width) * height);
  grid.valid.assign(static_cast<std::size_t>(width) * height, 0);

  if (kind == ProjectionKind::Erp) {
    std::vector<double> cos_lon(width), sin_lon(width);
    for (int x = 0; x < width; ++x) {
      const double lon = deg_to_rad(((x + 0.5) / width - 0.5) * 360.0);
      cos_lon[x] = std::cos(lon);
      sin_lon[x] = std::sin(lon);
    }
    for (int y = 0; y < height; ++y) {
      const double lat = deg_to_rad((0.5 - (y + 0.5) / height) * 180.0);
      const double cl = std::cos(lat);
      const double sl = std::sin(lat);
      for (int x = 0; x < width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        grid.directions[i] = {cl * cos_lon[x], cl * sin_lon[x], sl};
        grid.valid[i] = 1;
      }
    }
    return grid;
  }

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const auto sp = pixel_to_sphere(x, y, width, height, kind);
      if (!sp) continue;
      grid.directions[i] = sphere_to_direction(*sp);
      grid.valid[i] = 1;
    }
  }
  return grid;
}

}  // namespace ovqa
