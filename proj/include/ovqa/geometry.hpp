#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>

namespace ovqa {

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Wraps an angle in degrees into [-180, 180).
double wrap_degrees(double deg);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

// Head orientation in degrees. Pitch is latitude-like and stays in
// [-90, +90]; yaw and roll are wrapped into [-180, 180).
struct Pose {
  double pitch = 0.0;
  double yaw = 0.0;
  double roll = 0.0;

  Pose() = default;
  Pose(double pitch_deg, double yaw_deg, double roll_deg);
};

inline constexpr double kDefaultFovDeg = 110.0;

// Rectilinear viewport field of view, degrees, strictly inside (0, 180).
struct Fov {
  double horizontal = kDefaultFovDeg;
  double vertical = kDefaultFovDeg;

  Fov() = default;
  Fov(double horizontal_deg, double vertical_deg);
};

// A point on the unit sphere. Latitude in [-90, +90], longitude wrapped
// into [-180, 180).
struct SpherePoint {
  double latitude = 0.0;
  double longitude = 0.0;

  SpherePoint() = default;
  SpherePoint(double latitude_deg, double longitude_deg);
};

// Fixed axis convention: (lat 0, lon 0) -> (1,0,0), lat +90 -> (0,0,1),
// lon +90 -> (0,1,0).
Vec3 sphere_to_direction(const SpherePoint& p);
SpherePoint direction_to_sphere(const Vec3& dir);

// Unit vector of the viewport center; latitude = pitch, longitude = yaw,
// roll ignored.
Vec3 pose_to_direction(const Pose& pose);

// Orthonormal viewport basis. Composition order is yaw about the world
// vertical, then pitch about the viewport right axis, then roll about the
// forward axis.
struct ViewFrame {
  Vec3 forward;  // viewport center direction
  Vec3 right;    // grows with viewport u
  Vec3 up;       // opposite of viewport v

  static ViewFrame from_pose(const Pose& pose);
};

// Precomputed rectilinear frustum test and viewport <-> sphere mapping for
// one pose/fov pair.
class Frustum {
 public:
  Frustum(const Pose& pose, const Fov& fov);

  bool contains(const Vec3& dir) const;

  // Normalized viewport coordinates of a direction: u grows rightward,
  // v grows downward, (0.5, 0.5) is the viewport center. Empty when the
  // direction points away from the viewport half-space.
  std::optional<std::array<double, 2>> to_viewport(const Vec3& dir) const;

  // Direction of the normalized viewport point (u, v) in [0,1]^2.
  Vec3 from_viewport(double u, double v) const;

  const ViewFrame& frame() const { return frame_; }

 private:
  ViewFrame frame_;
  double tan_half_h_;
  double tan_half_v_;
};

bool in_viewport(const Vec3& dir, const Pose& pose, const Fov& fov);
Vec3 viewport_point_to_direction(double u, double v, const Pose& pose, const Fov& fov);
std::optional<std::array<double, 2>> viewport_direction_to_point(const Vec3& dir,
                                                                 const Pose& pose,
                                                                 const Fov& fov);

}  // namespace ovqa
