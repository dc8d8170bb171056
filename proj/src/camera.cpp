#include "graspcheck/camera.hpp"

#include <cmath>

#include "graspcheck/error.hpp"

namespace graspcheck {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorKind::kInvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorKind::kInvalidArgument, "image size must be positive");
  if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height)) {
    throw Error(ErrorKind::kInvalidArgument, "principal point outside the image");
  }
  if (!world_to_camera.is_proper_rotation(1e-9)) {
    throw Error(ErrorKind::kInvalidArgument, "camera rotation is not orthonormal with det +1");
  }
}

std::optional<Eigen::Vector2d> CameraModel::project(const Vec3& world_point) const {
  const Vec3 p = world_to_camera.apply(world_point);
  if (!(p.z() > 1e-9)) return std::nullopt;
  return Eigen::Vector2d(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

bool CameraModel::in_frustum(const Vec3& world_point) const {
  const auto px = project(world_point);
  return px && px->x() >= 0.0 && px->x() <= width && px->y() >= 0.0 && px->y() <= height;
}

RigidTransform camera_pose_from_pan_tilt(const Vec3& eye, double pan, double tilt) {
  const Vec3 forward(std::cos(tilt) * std::cos(pan), std::cos(tilt) * std::sin(pan), -std::sin(tilt));
  // Right stays horizontal; for |tilt| < pi/2 this is well defined.
  const Vec3 right(std::sin(pan), -std::cos(pan), 0.0);
  const Vec3 down = forward.cross(right);
  Mat3 camera_to_world;
  camera_to_world.col(0) = right;
  camera_to_world.col(1) = down;
  camera_to_world.col(2) = forward;
  RigidTransform cam_to_world{camera_to_world, eye};
  return cam_to_world.inverse();
}

std::pair<double, double> pan_tilt_towards(const Vec3& eye, const Vec3& target) {
  const Vec3 d = target - eye;
  const double pan = std::atan2(d.y(), d.x());
  const double tilt = std::atan2(-d.z(), std::hypot(d.x(), d.y()));
  return {pan, tilt};
}

}  // namespace graspcheck
