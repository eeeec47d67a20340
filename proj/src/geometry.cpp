#include "ovqa/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace ovqa {

double wrap_degrees(double deg) {
  double w = std::fmod(deg + 180.0, 360.0);
  if (w < 0.0) w += 360.0;
  return w - 180.0;
}

Pose::Pose(double pitch_deg, double yaw_deg, double roll_deg)
    : pitch(pitch_deg), yaw(wrap_degrees(yaw_deg)), roll(wrap_degrees(roll_deg)) {
  if (!(pitch_deg >= -90.0 && pitch_deg <= 90.0)) {
    throw std::invalid_argument("pose pitch must lie in [-90, 90] degrees");
  }
}

Fov::Fov(double horizontal_deg, double vertical_deg)
    : horizontal(horizontal_deg), vertical(vertical_deg) {
  if (!(horizontal > 0.0 && horizontal < 180.0 && vertical > 0.0 && vertical < 180.0)) {
    throw std::invalid_argument("fov angles must lie strictly inside (0, 180) degrees");
  }
}

SpherePoint::SpherePoint(double latitude_deg, double longitude_deg)
    : latitude(latitude_deg), longitude(wrap_degrees(longitude_deg)) {
  if (!(latitude >= -90.0 && latitude <= 90.0)) {
    throw std::invalid_argument("latitude must lie in [-90, 90] degrees");
  }
}

Vec3 sphere_to_direction(const SpherePoint& p) {
  const double lat = deg_to_rad(p.latitude);
  const double lon = deg_to_rad(p.longitude);
  const double c = std::cos(lat);
  return {c * std::cos(lon), c * std::sin(lon), std::sin(lat)};
}

SpherePoint direction_to_sphere(const Vec3& dir) {
  const double z = std::clamp(dir.z, -1.0, 1.0);
  const double lat = rad_to_deg(std::asin(z));
  const double lon = rad_to_deg(std::atan2(dir.y, dir.x));
  return SpherePoint(lat, lon);
}

Vec3 pose_to_direction(const Pose& pose) {
  return sphere_to_direction(SpherePoint(pose.pitch, pose.yaw));
}

ViewFrame ViewFrame::from_pose(const Pose& pose) {
  const double cy = std::cos(deg_to_rad(pose.yaw));
  const double sy = std::sin(deg_to_rad(pose.yaw));
  const double cp = std::cos(deg_to_rad(pose.pitch));
  const double sp = std::sin(deg_to_rad(pose.pitch));
  const double cr = std::cos(deg_to_rad(pose.roll));
  const double sr = std::sin(deg_to_rad(pose.roll));

  // Columns of Rz(yaw) * Ry(-pitch) * Rx(roll); the x column is the forward
  // axis, y is viewport-right, z is viewport-up.
  const Vec3 forward{cp * cy, cp * sy, sp};
  const Vec3 right{-sy * cr - cy * sp * sr, cy * cr - sy * sp * sr, cp * sr};
  const Vec3 up{sy * sr - cy * sp * cr, -cy * sr - sy * sp * cr, cp * cr};
  return {forward, right, up};
}

Frustum::Frustum(const Pose& pose, const Fov& fov)
    : frame_(ViewFrame::from_pose(pose)),
      tan_half_h_(std::tan(deg_to_rad(fov.horizontal) / 2.0)),
      tan_half_v_(std::tan(deg_to_rad(fov.vertical) / 2.0)) {}

bool Frustum::contains(const Vec3& dir) const {
  const double df = dir.dot(frame_.forward);
  if (df <= 0.0) return false;
  // The frustum is a closed set; the relative slack keeps boundary points
  // (exact viewport corners) inside despite rounding.
  constexpr double kEdge = 1.0 + 1e-12;
  const double dr = dir.dot(frame_.right);
  const double du = dir.dot(frame_.up);
  return std::abs(dr) <= df * tan_half_h_ * kEdge && std::abs(du) <= df * tan_half_v_ * kEdge;
}

std::optional<std::array<double, 2>> Frustum::to_viewport(const Vec3& dir) const {
  const double df = dir.dot(frame_.forward);
  if (df <= 0.0) return std::nullopt;
  const double dr = dir.dot(frame_.right);
  const double du = dir.dot(frame_.up);
  const double u = 0.5 * (dr / (df * tan_half_h_) + 1.0);
  const double v = 0.5 * (-du / (df * tan_half_v_) + 1.0);
  return std::array<double, 2>{u, v};
}

Vec3 Frustum::from_viewport(double u, double v) const {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument("viewport coordinates must lie in [0, 1]");
  }
  const double a = (2.0 * u - 1.0) * tan_half_h_;
  const double b = -(2.0 * v - 1.0) * tan_half_v_;
  const Vec3 p = frame_.forward + frame_.right * a + frame_.up * b;
  return p.normalized();
}

bool in_viewport(const Vec3& dir, const Pose& pose, const Fov& fov) {
  return Frustum(pose, fov).contains(dir);
}

Vec3 viewport_point_to_direction(double u, double v, const Pose& pose, const Fov& fov) {
  return Frustum(pose, fov).from_viewport(u, v);
}

std::optional<std::array<double, 2>> viewport_direction_to_point(const Vec3& dir,
                                                                 const Pose& pose,
                                                                 const Fov& fov) {
  return Frustum(pose, fov).to_viewport(dir);
}

}  // namespace ovqa
