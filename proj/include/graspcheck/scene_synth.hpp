#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "graspcheck/camera.hpp"
#include "graspcheck/dataset.hpp"
#include "graspcheck/geometry.hpp"
#include "graspcheck/gripper.hpp"

namespace graspcheck {

// ---------------------------------------------------------------------------
// Assets
// ---------------------------------------------------------------------------

enum class AssetPool { kTrain, kValidation };

std::string_view to_string(AssetPool pool);
AssetPool asset_pool_from_string(std::string_view s);

struct Asset {
  std::string id;       // "<pool>/<nnn>"
  ConvexHullMesh hull;  // unit-scale, centered on its vertex mean
};

/// Procedural convex polyhedra standing in for the mesh libraries. The two
/// pools are disjoint and their contents depend only on the asset ids.
std::span<const Asset> asset_pool(AssetPool pool);
const Asset& find_asset(std::string_view id);

// ---------------------------------------------------------------------------
// Robot
// ---------------------------------------------------------------------------

struct JointSpec {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;
  double nominal = 0.0;
  double delta = 0.0;  // half-width of the uniform perturbation
};

struct ArmPose {
  std::vector<double> joints;                      // ordered as RobotConfig::joints
  std::array<double, 2> camera_offset{0.0, 0.0};  // pan, tilt (rad)

  friend bool operator==(const ArmPose&, const ArmPose&) = default;
};

/// Simplified mobile manipulator: a lift joint, shoulder pitch, upper-arm
/// roll, wrist pitch and wrist roll, with a head camera that looks at the
/// gripper.
struct RobotConfig {
  std::vector<JointSpec> joints = {
      {"arm_lift", 0.0, 0.69, 0.35, 0.05},
      {"arm_flex", -0.5, 1.2, 0.30, 0.10},
      {"arm_roll", -1.0, 1.0, 0.0, 0.15},
      {"wrist_flex", -1.2, 1.2, 0.20, 0.15},
      {"wrist_roll", -3.0, 3.0, 0.0, 0.60},
  };
  std::array<double, 2> camera_offset_delta{0.08, 0.06};
  std::array<double, 2> camera_offset_limit{0.30, 0.30};
  Vec3 shoulder_offset{0.10, 0.0, 0.34};
  double upper_arm_length = 0.35;
  double wrist_length = 0.08;
  Vec3 head_camera_offset{0.05, 0.0, 1.10};
  GripperDimensions gripper;
  double fx = 530.0, fy = 530.0, cx = 320.0, cy = 240.0;
  int image_width = 640, image_height = 480;

  ArmPose nominal_pose() const;
  void validate() const;
};

/// Each joint moves by uniform(-delta, +delta) and is clamped to its limits;
/// the camera pan/tilt offset is perturbed the same way.
ArmPose perturb_arm_pose(const ArmPose& base, Rng& rng, const RobotConfig& robot);

RigidTransform gripper_base_pose(const RobotConfig& robot, const RigidTransform& robot_base,
                                 const ArmPose& pose);

/// Head camera aimed at the gripper's grasp point, then offset by the pose's
/// pan/tilt perturbation.
CameraModel head_camera(const RobotConfig& robot, const RigidTransform& robot_base, const ArmPose& pose,
                        const Vec3& look_target);

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

struct RoomExtents {
  Vec3 min{-2.0, -2.0, 0.0};
  Vec3 max{2.0, 2.0, 2.5};
};

struct Placement {
  std::string asset_id;
  RigidTransform pose;  // applied after uniform scaling
  double scale = 1.0;
};

struct DistractorConfig {
  int min_count = 2;
  int max_count = 15;
  double scale_min = 0.08;
  double scale_max = 0.30;
  int max_attempts = 4000;  // total rejections allowed per scene
  double robot_exclusion_radius = 0.35;
};

/// Draws a count uniformly in [min_count, max_count] and drops each asset onto
/// the floor at a random position and yaw, rejecting positions that leave the
/// room, whose center falls outside the camera frustum, that intrude on the
/// robot footprint, or whose hull intersects an earlier placement.
/// Throws kPlacementFailure once max_attempts rejections accumulate.
std::vector<Placement> place_distractors(Rng& rng, const DistractorConfig& config, std::span<const Asset> pool,
                                         const RoomExtents& room, const CameraModel& camera);

struct GenConfig {
  int batch_size = 10;
  double p_grasp = 0.5;
  double aperture_step = 0.02;
  AssetPool asset_pool = AssetPool::kTrain;
  DistractorConfig distractors;
  double grasp_scale_min = 0.04;
  double grasp_scale_max = 0.10;
  int grasp_attempts = 32;
  int pose_attempts = 32;
  RoomExtents room;
  RobotConfig robot;

  void validate() const;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int batch_id = 0;
  int index_in_batch = 0;
  RoomExtents room;
  RigidTransform robot_base;
  ArmPose arm;
  CameraModel camera;
  std::vector<Placement> distractors;
  std::optional<Placement> grasped_object;
  GripperGeometry gripper;
};

struct GeneratedExample {
  SceneSpec scene;
  Annotation annotation;
  std::array<std::optional<Eigen::Vector2d>, 2> fingertips_px;  // synthetic ground truth
};

struct Batch {
  std::uint64_t scene_seed = 0;
  int batch_id = 0;
  std::vector<GeneratedExample> examples;
};

/// Pure function of (scene_seed, config): one shared distractor layout and
/// batch_size examples with independently perturbed arm/camera poses.
Batch generate_batch(std::uint64_t scene_seed, const GenConfig& config, int batch_id = 0);

/// Seed of batch `batch_index` in a dataset generated from `base_seed`.
std::uint64_t batch_seed(std::uint64_t base_seed, int batch_index);

/// Reference implementation: batches generated one after another.
std::vector<Batch> generate_batches_serial(std::uint64_t base_seed, int num_batches, const GenConfig& config);

/// OpenMP over batches. Output is identical to generate_batches_serial.
std::vector<Batch> generate_batches_parallel(std::uint64_t base_seed, int num_batches, const GenConfig& config,
                                             int threads = 0);

std::string scene_file_name(int batch_id, int index_in_batch);

/// One JSON document per example, SI units.
std::string serialize_scene(const GeneratedExample& example);
std::string serialize_batch(const Batch& batch);

/// Writes scene_<batch>_<index>.json files, assets.json and manifest.jsonl.
Dataset write_generated_dataset(const std::vector<Batch>& batches, const GenConfig& config,
                                const std::filesystem::path& out_dir);

}  // namespace graspcheck
