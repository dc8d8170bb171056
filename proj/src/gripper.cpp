#include "graspcheck/gripper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "graspcheck/error.hpp"

namespace graspcheck {

ConvexHullMesh palm_hull(const GripperDimensions& d) {
  return ConvexHullMesh::box({-d.palm_depth, -d.palm_width / 2, -d.palm_height / 2},
                             {0.0, d.palm_width / 2, d.palm_height / 2});
}

ConvexHullMesh finger_hull(const GripperDimensions& d, int side) {
  const double hz = d.finger_width / 2.0;
  if (side > 0) return ConvexHullMesh::box({0.0, 0.0, -hz}, {d.finger_length, d.finger_thickness, hz});
  return ConvexHullMesh::box({0.0, -d.finger_thickness, -hz}, {d.finger_length, 0.0, hz});
}

GripperGeometry GripperGeometry::parallel_jaw(const GripperDimensions& d) {
  return GripperGeometry{
      .palm = palm_hull(d),
      .finger_left = finger_hull(d, +1),
      .finger_right = finger_hull(d, -1),
      .max_gap = d.max_gap,
      .finger_length = d.finger_length,
      .aperture = 1.0,
      .base_pose = RigidTransform::identity(),
  };
}

RigidTransform GripperGeometry::finger_left_pose(double at_aperture) const {
  return base_pose * RigidTransform::from_translation({0.0, at_aperture * max_gap / 2.0, 0.0});
}

RigidTransform GripperGeometry::finger_right_pose(double at_aperture) const {
  return base_pose * RigidTransform::from_translation({0.0, -at_aperture * max_gap / 2.0, 0.0});
}

std::array<PosedHull, 3> GripperGeometry::parts(double at_aperture) const {
  return {PosedHull{palm, base_pose}, PosedHull{finger_left, finger_left_pose(at_aperture)},
          PosedHull{finger_right, finger_right_pose(at_aperture)}};
}

Vec3 GripperGeometry::grasp_point() const { return base_pose.apply({finger_length / 2.0, 0.0, 0.0}); }

std::array<Vec3, 2> GripperGeometry::fingertips() const {
  auto tip = [&](const ConvexHullMesh& finger, const RigidTransform& pose) {
    // Center of the finger's far face (max x) in the finger frame.
    Vec3 sum = Vec3::Zero();
    int count = 0;
    for (const auto& v : finger.vertices()) {
      if (v.x() >= finger_length - 1e-12) sum += v, ++count;
    }
    return pose.apply(sum / std::max(count, 1));
  };
  return {tip(finger_left, finger_left_pose(aperture)), tip(finger_right, finger_right_pose(aperture))};
}

CloseResult close_gripper_on_object(const GripperGeometry& gripper, const ConvexHullMesh& object_hull,
                                    const RigidTransform& object_pose, const CloseConfig& config) {
  const double step = config.aperture_step;
  if (!(step > 0.0 && step <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "aperture step must be in (0, 1]");
  }
  const int last = static_cast<int>(std::ceil(1.0 / step - 1e-9));
  auto collides = [&](double a) {
    return convex_hulls_intersect(gripper.finger_left, gripper.finger_left_pose(a), object_hull, object_pose) ||
           convex_hulls_intersect(gripper.finger_right, gripper.finger_right_pose(a), object_hull, object_pose);
  };

  CloseResult result;
  double previous = 1.0;
  for (int k = 0; k <= last; ++k) {
    const double a = std::max(0.0, 1.0 - k * step);
    result.tested_apertures.push_back(a);
    if (collides(a)) {
      if (k == 0) {
        throw Error(ErrorKind::kPreconditionViolation, "object intersects the fingers at aperture 1");
      }
      result.final_aperture = previous;
      result.contact = true;
      return result;
    }
    previous = a;
  }
  result.final_aperture = 0.0;
  result.contact = false;
  return result;
}

Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
  if (q.norm() < 1e-12) return Mat3::Identity();
  q.normalize();
  return q.toRotationMatrix();
}

RigidTransform place_object_in_gripper(const GripperGeometry& gripper, const ConvexHullMesh& object_hull,
                                       Rng& rng, const PlaceConfig& config) {
  const double max_width = config.max_width_fraction * gripper.max_gap;
  const Vec3 centroid = object_hull.centroid();
  double radius = 0.0;
  for (const auto& v : object_hull.vertices()) radius = std::max(radius, (v - centroid).norm());

  for (int attempt = 0; attempt < config.orientation_tries; ++attempt) {
    const Mat3 rot = random_rotation(rng);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& v : object_hull.vertices()) {
      const double y = (rot * v).y();
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    if (hi - lo > max_width) continue;

    const Vec3 grasp_local(gripper.finger_length / 2.0, 0.0, 0.0);
    const Vec3 base_translation = grasp_local - rot * centroid;
    const auto open = gripper.parts(1.0);
    for (double shift = 0.0; shift <= gripper.finger_length + 2.0 * radius; shift += config.clearance_step) {
      const RigidTransform pose =
          gripper.base_pose * RigidTransform{rot, base_translation + Vec3(shift, 0.0, 0.0)};
      const bool blocked = std::any_of(open.begin(), open.end(), [&](const PosedHull& part) {
        return convex_hulls_intersect(part.hull, part.pose, object_hull, pose);
      });
      if (!blocked) return pose;
    }
  }
  throw Error(ErrorKind::kObjectTooLarge, "object does not fit between the open fingers");
}

BoundingBox enforce_min_box_size(BoundingBox box, int width, int height, double min_side) {
  auto fix_axis = [min_side](double& lo, double& hi, double limit) {
    if (hi - lo < min_side) {
      const double c = 0.5 * (lo + hi);
      lo = c - min_side / 2.0;
      hi = c + min_side / 2.0;
    }
    if (lo < 0.0) hi -= lo, lo = 0.0;
    if (hi > limit) lo -= hi - limit, hi = limit;
    lo = std::max(lo, 0.0);
  };
  fix_axis(box.x_min, box.x_max, width);
  fix_axis(box.y_min, box.y_max, height);
  return box;
}

BoundingBox project_gripper_bbox(const CameraModel& camera, const GripperGeometry& gripper,
                                 const std::optional<PosedHull>& held_object) {
  double x_lo = std::numeric_limits<double>::infinity(), y_lo = x_lo;
  double x_hi = -x_lo, y_hi = -x_lo;
  bool any = false;
  auto accumulate = [&](const PosedHull& part) {
    for (const auto& v : part.hull.vertices()) {
      const Vec3 w = part.pose.apply(v);
      if (!camera.in_frustum(w)) continue;
      const auto px = *camera.project(w);
      x_lo = std::min(x_lo, px.x());
      x_hi = std::max(x_hi, px.x());
      y_lo = std::min(y_lo, px.y());
      y_hi = std::max(y_hi, px.y());
      any = true;
    }
  };
  for (const auto& part : gripper.parts()) accumulate(part);
  if (held_object) accumulate(*held_object);
  if (!any) throw Error(ErrorKind::kGripperOutOfView, "no gripper vertex inside the camera frustum");

  BoundingBox box{std::clamp(x_lo, 0.0, double(camera.width)), std::clamp(y_lo, 0.0, double(camera.height)),
                  std::clamp(x_hi, 0.0, double(camera.width)), std::clamp(y_hi, 0.0, double(camera.height))};
  return enforce_min_box_size(box, camera.width, camera.height);
}

}  // namespace graspcheck
