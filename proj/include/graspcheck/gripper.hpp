#pragma once

#include <array>
#include <optional>
#include <random>
#include <vector>

#include "graspcheck/camera.hpp"
#include "graspcheck/dataset.hpp"
#include "graspcheck/geometry.hpp"

namespace graspcheck {

using Rng = std::mt19937_64;

struct PosedHull {
  ConvexHullMesh hull;
  RigidTransform pose;
};

// Desk-scale parallel-jaw dimensions in meters.
struct GripperDimensions {
  double palm_depth = 0.04;
  double palm_width = 0.13;
  double palm_height = 0.06;
  double finger_length = 0.07;
  double finger_thickness = 0.012;
  double finger_width = 0.025;
  double max_gap = 0.10;  // inner distance between finger pads at aperture 1
};

ConvexHullMesh palm_hull(const GripperDimensions& dims);
// side = +1 for the left finger (extends towards +y), -1 for the right one.
ConvexHullMesh finger_hull(const GripperDimensions& dims, int side);

/// Two-finger parallel-jaw gripper.
///
/// Gripper frame: +x is the approach axis (palm face at x = 0, fingertips at
/// x = finger_length), +y is the closing axis, +z completes the frame. Each
/// finger hull is expressed in its own frame with the pad face on y = 0; the
/// finger frames sit at y = +-aperture * max_gap / 2, so the pads touch at
/// aperture 0.
struct GripperGeometry {
  ConvexHullMesh palm = palm_hull(GripperDimensions{});
  ConvexHullMesh finger_left = finger_hull(GripperDimensions{}, +1);
  ConvexHullMesh finger_right = finger_hull(GripperDimensions{}, -1);
  double max_gap = 0.10;
  double finger_length = 0.07;
  double aperture = 1.0;
  RigidTransform base_pose;  // gripper frame -> world

  static GripperGeometry parallel_jaw(const GripperDimensions& dims = {});

  RigidTransform finger_left_pose(double at_aperture) const;
  RigidTransform finger_right_pose(double at_aperture) const;

  /// Palm and both fingers posed in the world at the given aperture.
  std::array<PosedHull, 3> parts(double at_aperture) const;
  std::array<PosedHull, 3> parts() const { return parts(aperture); }

  /// Midpoint between the finger pads, in the world frame.
  Vec3 grasp_point() const;

  /// Tip-end centers of the two fingers, in the world frame.
  std::array<Vec3, 2> fingertips() const;
};

struct CloseConfig {
  double aperture_step = 0.02;
};

struct CloseResult {
  double final_aperture = 0.0;
  bool contact = false;
  std::vector<double> tested_apertures;  // strictly decreasing, starts at 1
};

/// Steps the fingers shut over 1, 1-step, 1-2*step, ..., 0 and returns the last
/// aperture before the first finger/object collision. Throws
/// kPreconditionViolation if the object already collides at aperture 1.
CloseResult close_gripper_on_object(const GripperGeometry& gripper, const ConvexHullMesh& object_hull,
                                    const RigidTransform& object_pose, const CloseConfig& config = {});

struct PlaceConfig {
  double max_width_fraction = 0.9;  // of max_gap, measured along the closing axis
  int orientation_tries = 16;
  double clearance_step = 0.002;    // meters along the approach axis
};

/// Random orientation for the object centered on the grasp point, pushed out
/// along the approach axis until it clears the open gripper. Returns the
/// object pose in the world. Throws kObjectTooLarge when no tried orientation
/// fits between the open fingers.
RigidTransform place_object_in_gripper(const GripperGeometry& gripper, const ConvexHullMesh& object_hull,
                                       Rng& rng, const PlaceConfig& config = {});

/// Tight box around every gripper (and held-object) vertex that lies inside the
/// camera frustum. Boxes thinner than 2 px are widened to 2 px around their
/// center. No occlusion reasoning. Throws kGripperOutOfView.
BoundingBox project_gripper_bbox(const CameraModel& camera, const GripperGeometry& gripper,
                                 const std::optional<PosedHull>& held_object);

/// Expands a box to at least `min_side` pixels per side and clamps it to the image.
BoundingBox enforce_min_box_size(BoundingBox box, int width, int height, double min_side = 2.0);

Mat3 random_rotation(Rng& rng);

}  // namespace graspcheck
