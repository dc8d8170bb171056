#pragma once

#include <optional>

#include "graspcheck/geometry.hpp"

namespace graspcheck {

/// Pinhole camera. `world_to_camera` maps world points into the optical frame
/// (x right, y down, z forward).
struct CameraModel {
  double fx = 530.0;
  double fy = 530.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  RigidTransform world_to_camera;

  // Throws kInvalidArgument on bad intrinsics or a non-proper rotation.
  void validate() const;

  /// Pixel coordinates of a world point in front of the camera (z > 0).
  std::optional<Eigen::Vector2d> project(const Vec3& world_point) const;

  /// In front of the camera and inside the image rectangle.
  bool in_frustum(const Vec3& world_point) const;

  Vec3 position() const { return world_to_camera.inverse().translation; }
};

/// Optical frame whose forward axis has the given yaw (about world z) and
/// downward pitch, with no roll.
RigidTransform camera_pose_from_pan_tilt(const Vec3& eye, double pan, double tilt);

/// Pan/tilt angles that point the optical axis from `eye` at `target`.
std::pair<double, double> pan_tilt_towards(const Vec3& eye, const Vec3& target);

}  // namespace graspcheck
