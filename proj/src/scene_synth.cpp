#include "graspcheck/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "graspcheck/error.hpp"
#include "json_util.hpp"

namespace graspcheck {

namespace fs = std::filesystem;
using detail::Json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::vector<Asset> build_pool(AssetPool pool, int count) {
  std::vector<Asset> assets;
  assets.reserve(count);
  for (int i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s/%03d", std::string(to_string(pool)).c_str(), i);
    const std::string id = buf;
    std::seed_seq seq(id.begin(), id.end());
    Rng rng(seq);
    const int n_points = uniform_int(rng, 8, 14);
    const Vec3 radii(uniform(rng, 0.3, 0.6), uniform(rng, 0.3, 0.6), uniform(rng, 0.3, 0.6));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec3> pts;
    while (static_cast<int>(pts.size()) < n_points) {
      Vec3 d(normal(rng), normal(rng), normal(rng));
      if (d.norm() < 1e-6) continue;
      pts.push_back(d.normalized().cwiseProduct(radii));
    }
    ConvexHullMesh hull = ConvexHullMesh::from_points(pts);
    hull = hull.transformed(RigidTransform::from_translation(-hull.centroid()));
    assets.push_back({id, std::move(hull)});
  }
  return assets;
}

}  // namespace

std::string_view to_string(AssetPool pool) { return pool == AssetPool::kTrain ? "train" : "validation"; }

AssetPool asset_pool_from_string(std::string_view s) {
  if (s == "train") return AssetPool::kTrain;
  if (s == "validation") return AssetPool::kValidation;
  throw Error(ErrorKind::kInvalidArgument, "unknown asset pool '" + std::string(s) + "'");
}

std::span<const Asset> asset_pool(AssetPool pool) {
  static const std::vector<Asset> train = build_pool(AssetPool::kTrain, 64);
  static const std::vector<Asset> validation = build_pool(AssetPool::kValidation, 32);
  return pool == AssetPool::kTrain ? std::span<const Asset>(train) : std::span<const Asset>(validation);
}

const Asset& find_asset(std::string_view id) {
  for (AssetPool pool : {AssetPool::kTrain, AssetPool::kValidation}) {
    for (const auto& a : asset_pool(pool)) {
      if (a.id == id) return a;
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown asset '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------

ArmPose RobotConfig::nominal_pose() const {
  ArmPose pose;
  for (const auto& j : joints) pose.joints.push_back(j.nominal);
  return pose;
}

void RobotConfig::validate() const {
  if (joints.size() != 5) throw Error(ErrorKind::kInvalidArgument, "robot needs exactly 5 arm joints");
  for (const auto& j : joints) {
    if (!(j.lower <= j.nominal && j.nominal <= j.upper)) {
      throw Error(ErrorKind::kInvalidArgument, "joint " + j.name + ": nominal outside limits");
    }
    if (!(j.delta >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "joint " + j.name + ": negative delta");
  }
  for (int k = 0; k < 2; ++k) {
    if (!(camera_offset_delta[k] >= 0.0) || !(camera_offset_limit[k] >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "camera offset delta/limit must be non-negative");
    }
  }
  if (!(upper_arm_length > 0.0) || !(wrist_length >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "link lengths must be positive");
  }
  if (!(gripper.max_gap > 0.0) || !(gripper.finger_length > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "gripper dimensions must be positive");
  }
  CameraModel probe{fx, fy, cx, cy, image_width, image_height, {}};
  probe.validate();
}

ArmPose perturb_arm_pose(const ArmPose& base, Rng& rng, const RobotConfig& robot) {
  if (base.joints.size() != robot.joints.size()) {
    throw Error(ErrorKind::kInvalidArgument, "arm pose has the wrong number of joints");
  }
  ArmPose out = base;
  for (std::size_t i = 0; i < robot.joints.size(); ++i) {
    const auto& spec = robot.joints[i];
    if (base.joints[i] < spec.lower || base.joints[i] > spec.upper) {
      throw Error(ErrorKind::kInvalidArgument, "joint " + spec.name + " starts outside its limits");
    }
    const double value = base.joints[i] + uniform(rng, -spec.delta, spec.delta);
    out.joints[i] = std::clamp(value, spec.lower, spec.upper);
  }
  for (int k = 0; k < 2; ++k) {
    const double lim = robot.camera_offset_limit[k];
    const double value = base.camera_offset[k] + uniform(rng, -robot.camera_offset_delta[k], robot.camera_offset_delta[k]);
    out.camera_offset[k] = std::clamp(value, -lim, lim);
  }
  return out;
}

RigidTransform gripper_base_pose(const RobotConfig& robot, const RigidTransform& robot_base, const ArmPose& pose) {
  const auto& q = pose.joints;
  if (q.size() != 5) throw Error(ErrorKind::kInvalidArgument, "arm pose needs 5 joint values");
  const RigidTransform shoulder = RigidTransform::from_translation(robot.shoulder_offset + Vec3(0.0, 0.0, q[0]));
  const RigidTransform flex{rotation_y(q[1]), Vec3::Zero()};
  const RigidTransform upper = RigidTransform::from_translation({robot.upper_arm_length, 0.0, 0.0});
  const RigidTransform roll{rotation_x(q[2]), Vec3::Zero()};
  const RigidTransform wrist_flex{rotation_y(q[3]), Vec3::Zero()};
  const RigidTransform wrist_roll{rotation_x(q[4]), Vec3::Zero()};
  const RigidTransform wrist = RigidTransform::from_translation({robot.wrist_length, 0.0, 0.0});
  return robot_base * shoulder * flex * upper * roll * wrist_flex * wrist_roll * wrist;
}

CameraModel head_camera(const RobotConfig& robot, const RigidTransform& robot_base, const ArmPose& pose,
                        const Vec3& look_target) {
  const Vec3 eye = robot_base.apply(robot.head_camera_offset);
  auto [pan, tilt] = pan_tilt_towards(eye, look_target);
  pan += pose.camera_offset[0];
  tilt += pose.camera_offset[1];
  return CameraModel{robot.fx,          robot.fy,           robot.cx, robot.cy,
                     robot.image_width, robot.image_height, camera_pose_from_pan_tilt(eye, pan, tilt)};
}

// ---------------------------------------------------------------------------

std::vector<Placement> place_distractors(Rng& rng, const DistractorConfig& config, std::span<const Asset> pool,
                                         const RoomExtents& room, const CameraModel& camera) {
  if (pool.empty()) throw Error(ErrorKind::kInvalidArgument, "empty asset pool");
  if (config.min_count < 0 || config.min_count > config.max_count) {
    throw Error(ErrorKind::kInvalidArgument, "bad distractor count range");
  }
  const int count = uniform_int(rng, config.min_count, config.max_count);
  const Vec3 robot_center = 0.5 * (room.min + room.max);

  std::vector<Placement> placed;
  std::vector<ConvexHullMesh> placed_hulls;
  int rejections = 0;
  while (static_cast<int>(placed.size()) < count) {
    const Asset& asset = pool[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];
    const double scale = uniform(rng, config.scale_min, config.scale_max);
    const double yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double x = uniform(rng, room.min.x(), room.max.x());
    const double y = uniform(rng, room.min.y(), room.max.y());

    ConvexHullMesh hull = asset.hull.scaled(scale);
    const Mat3 rot = rotation_z(yaw);
    double min_z = std::numeric_limits<double>::infinity();
    for (const auto& v : hull.vertices()) min_z = std::min(min_z, (rot * v).z());
    const RigidTransform pose{rot, Vec3(x, y, -min_z)};

    bool ok = true;
    double xy_radius = 0.0;
    Vec3 center = Vec3::Zero();
    for (const auto& v : hull.vertices()) {
      const Vec3 w = pose.apply(v);
      center += w;
      ok = ok && w.x() >= room.min.x() && w.x() <= room.max.x() && w.y() >= room.min.y() &&
           w.y() <= room.max.y() && w.z() <= room.max.z();
      xy_radius = std::max(xy_radius, std::hypot(w.x() - x, w.y() - y));
    }
    center /= static_cast<double>(hull.vertices().size());
    ok = ok && camera.in_frustum(center);
    ok = ok && std::hypot(x - robot_center.x(), y - robot_center.y()) > config.robot_exclusion_radius + xy_radius;
    for (std::size_t k = 0; ok && k < placed.size(); ++k) {
      ok = !convex_hulls_intersect(placed_hulls[k], placed[k].pose, hull, pose);
    }
    if (!ok) {
      if (++rejections > config.max_attempts) {
        throw Error(ErrorKind::kPlacementFailure, "placed " + std::to_string(placed.size()) + " of " +
                                                      std::to_string(count) + " distractors before giving up");
      }
      continue;
    }
    placed.push_back({asset.id, pose, scale});
    placed_hulls.push_back(std::move(hull));
  }
  return placed;
}

void GenConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorKind::kInvalidArgument, "batch_size must be >= 1");
  if (!(p_grasp >= 0.0 && p_grasp <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "p_grasp must be in [0, 1]");
  if (!(aperture_step > 0.0 && aperture_step <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "aperture_step must be in (0, 1]");
  }
  if (distractors.min_count < 2 || distractors.max_count > 15 || distractors.min_count > distractors.max_count) {
    throw Error(ErrorKind::kInvalidArgument, "distractor count range must lie within [2, 15]");
  }
  if (!(distractors.scale_min > 0.0 && distractors.scale_min <= distractors.scale_max)) {
    throw Error(ErrorKind::kInvalidArgument, "bad distractor scale range");
  }
  if (!(grasp_scale_min > 0.0 && grasp_scale_min <= grasp_scale_max)) {
    throw Error(ErrorKind::kInvalidArgument, "bad grasp scale range");
  }
  if (distractors.max_attempts < 1 || grasp_attempts < 1 || pose_attempts < 1) {
    throw Error(ErrorKind::kInvalidArgument, "attempt budgets must be positive");
  }
  if (!((room.max - room.min).minCoeff() > 0.0)) throw Error(ErrorKind::kInvalidArgument, "empty room");
  robot.validate();
}

namespace {

struct GraspAttempt {
  Placement placement;
  ConvexHullMesh hull;
  double aperture;
};

std::optional<GraspAttempt> try_grasp(Rng& rng, const GenConfig& config, std::span<const Asset> pool,
                                      const GripperGeometry& gripper) {
  for (int attempt = 0; attempt < config.grasp_attempts; ++attempt) {
    const Asset& asset = pool[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];
    const double scale = uniform(rng, config.grasp_scale_min, config.grasp_scale_max);
    ConvexHullMesh hull = asset.hull.scaled(scale);
    RigidTransform pose;
    try {
      pose = place_object_in_gripper(gripper, hull, rng);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kObjectTooLarge) continue;
      throw;
    }
    const CloseResult closed = close_gripper_on_object(gripper, hull, pose, {config.aperture_step});
    if (!closed.contact) continue;
    return GraspAttempt{{asset.id, pose, scale}, std::move(hull), closed.final_aperture};
  }
  return std::nullopt;
}

GeneratedExample generate_example(std::uint64_t scene_seed, int batch_id, int index, const GenConfig& config,
                                  const RigidTransform& robot_base, const std::vector<Placement>& distractors) {
  Rng rng = make_rng(scene_seed, static_cast<std::uint64_t>(index) + 1);
  const bool grasp = std::bernoulli_distribution(config.p_grasp)(rng);
  const std::span<const Asset> pool = asset_pool(config.asset_pool);
  const ArmPose nominal = config.robot.nominal_pose();

  for (int attempt = 0; attempt < config.pose_attempts; ++attempt) {
    GeneratedExample ex;
    SceneSpec& s = ex.scene;
    s.seed = scene_seed;
    s.batch_id = batch_id;
    s.index_in_batch = index;
    s.room = config.room;
    s.robot_base = robot_base;
    s.distractors = distractors;
    s.arm = perturb_arm_pose(nominal, rng, config.robot);
    s.gripper = GripperGeometry::parallel_jaw(config.robot.gripper);
    s.gripper.base_pose = gripper_base_pose(config.robot, robot_base, s.arm);
    s.camera = head_camera(config.robot, robot_base, s.arm, s.gripper.grasp_point());

    std::optional<PosedHull> held;
    if (grasp) {
      auto g = try_grasp(rng, config, pool, s.gripper);
      if (!g) continue;
      s.gripper.aperture = g->aperture;
      s.grasped_object = g->placement;
      held = PosedHull{std::move(g->hull), g->placement.pose};
    } else {
      s.gripper.aperture = 0.0;
    }

    try {
      ex.annotation.gripper_box = project_gripper_bbox(s.camera, s.gripper, held);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kGripperOutOfView) continue;
      throw;
    }
    if (grasp) {
      ex.annotation.label = GraspLabel::kObject;
      ex.annotation.category = Category::kRigid;
      ex.annotation.object_id = s.grasped_object->asset_id;
    } else {
      ex.annotation.label = GraspLabel::kNoObject;
      ex.annotation.category = Category::kNoObject;
    }
    const auto tips = s.gripper.fingertips();
    for (int k = 0; k < 2; ++k) ex.fingertips_px[k] = s.camera.project(tips[k]);
    return ex;
  }
  throw Error(ErrorKind::kPlacementFailure,
              "no valid arm pose / grasp for example " + std::to_string(index) + " of batch " +
                  std::to_string(batch_id));
}

}  // namespace

Batch generate_batch(std::uint64_t scene_seed, const GenConfig& config, int batch_id) {
  config.validate();
  Rng scene_rng = make_rng(scene_seed, 0);
  const RigidTransform robot_base = RigidTransform::from_translation(
      {0.5 * (config.room.min.x() + config.room.max.x()), 0.5 * (config.room.min.y() + config.room.max.y()),
       config.room.min.z()});

  // The shared layout is placed in view of the unperturbed pose.
  const ArmPose nominal = config.robot.nominal_pose();
  const RigidTransform nominal_gripper = gripper_base_pose(config.robot, robot_base, nominal);
  GripperGeometry g = GripperGeometry::parallel_jaw(config.robot.gripper);
  g.base_pose = nominal_gripper;
  const CameraModel nominal_camera = head_camera(config.robot, robot_base, nominal, g.grasp_point());
  const std::vector<Placement> distractors =
      place_distractors(scene_rng, config.distractors, asset_pool(config.asset_pool), config.room, nominal_camera);

  Batch batch;
  batch.scene_seed = scene_seed;
  batch.batch_id = batch_id;
  batch.examples.reserve(config.batch_size);
  for (int i = 0; i < config.batch_size; ++i) {
    batch.examples.push_back(generate_example(scene_seed, batch_id, i, config, robot_base, distractors));
  }
  return batch;
}

std::uint64_t batch_seed(std::uint64_t base_seed, int batch_index) {
  return splitmix64(base_seed ^ splitmix64(static_cast<std::uint64_t>(batch_index)));
}

std::vector<Batch> generate_batches_serial(std::uint64_t base_seed, int num_batches, const GenConfig& config) {
  std::vector<Batch> out;
  out.reserve(std::max(num_batches, 0));
  for (int b = 0; b < num_batches; ++b) out.push_back(generate_batch(batch_seed(base_seed, b), config, b));
  return out;
}

std::vector<Batch> generate_batches_parallel(std::uint64_t base_seed, int num_batches, const GenConfig& config,
                                             int threads) {
  config.validate();
  if (num_batches <= 0) return {};
  (void)asset_pool(config.asset_pool);  // build the pool before the parallel region
  std::vector<Batch> out(num_batches);
  std::vector<std::exception_ptr> errors(num_batches);
#ifdef _OPENMP
  const int team = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(team)
#endif
  for (int b = 0; b < num_batches; ++b) {
    try {
      out[b] = generate_batch(batch_seed(base_seed, b), config, b);
    } catch (...) {
      errors[b] = std::current_exception();
    }
  }
  (void)threads;
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json pose_json(const RigidTransform& t) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(Json::array({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)}));
  Json j;
  j["rotation"] = rows;
  j["translation"] = vec_json(t.translation);
  return j;
}

Json hull_json(const ConvexHullMesh& h) {
  Json verts = Json::array();
  for (const auto& v : h.vertices()) verts.push_back(vec_json(v));
  Json faces = Json::array();
  for (const auto& f : h.faces()) faces.push_back(Json::array({f[0], f[1], f[2]}));
  Json j;
  j["vertices"] = verts;
  j["faces"] = faces;
  return j;
}

Json placement_json(const Placement& p) {
  Json j;
  j["asset_id"] = p.asset_id;
  j["scale"] = p.scale;
  j["pose"] = pose_json(p.pose);
  return j;
}

Json scene_json(const GeneratedExample& ex) {
  const SceneSpec& s = ex.scene;
  Json j;
  j["seed"] = s.seed;
  j["batch"] = s.batch_id;
  j["index"] = s.index_in_batch;
  j["room"] = Json{{"min", vec_json(s.room.min)}, {"max", vec_json(s.room.max)}};
  j["robot"] = Json{{"base_pose", pose_json(s.robot_base)},
                    {"joint_values", s.arm.joints},
                    {"camera_offset", Json::array({s.arm.camera_offset[0], s.arm.camera_offset[1]})}};
  j["camera"] = Json{{"fx", s.camera.fx},       {"fy", s.camera.fy},         {"cx", s.camera.cx},
                     {"cy", s.camera.cy},       {"width", s.camera.width}, {"height", s.camera.height},
                     {"world_to_camera", pose_json(s.camera.world_to_camera)}};
  j["gripper"] = Json{{"model", "parallel_jaw_prismatic"},
                      {"max_gap", s.gripper.max_gap},
                      {"finger_length", s.gripper.finger_length},
                      {"aperture", s.gripper.aperture},
                      {"base_pose", pose_json(s.gripper.base_pose)},
                      {"palm", hull_json(s.gripper.palm)},
                      {"finger_left", hull_json(s.gripper.finger_left)},
                      {"finger_right", hull_json(s.gripper.finger_right)},
                      {"finger_left_pose", pose_json(s.gripper.finger_left_pose(s.gripper.aperture))},
                      {"finger_right_pose", pose_json(s.gripper.finger_right_pose(s.gripper.aperture))}};
  Json distractors = Json::array();
  for (const auto& d : s.distractors) distractors.push_back(placement_json(d));
  j["distractors"] = distractors;
  j["grasped_object"] = s.grasped_object ? placement_json(*s.grasped_object) : Json(nullptr);

  const Annotation& a = ex.annotation;
  j["annotation"] = Json{{"label", static_cast<int>(a.label)},
                         {"category", std::string(to_string(a.category))},
                         {"object_id", a.object_id ? Json(*a.object_id) : Json(nullptr)},
                         {"bbox", detail::box_to_json(a.gripper_box)}};
  Json tips = Json::array();
  for (const auto& t : ex.fingertips_px) tips.push_back(t ? Json::array({t->x(), t->y()}) : Json(nullptr));
  j["ground_truth"] = Json{{"fingertips_px", tips}};
  return j;
}

}  // namespace

std::string scene_file_name(int batch_id, int index_in_batch) {
  return "scene_" + std::to_string(batch_id) + "_" + std::to_string(index_in_batch) + ".json";
}

std::string serialize_scene(const GeneratedExample& example) { return scene_json(example).dump(1) + "\n"; }

std::string serialize_batch(const Batch& batch) {
  std::string out;
  for (const auto& ex : batch.examples) out += serialize_scene(ex);
  return out;
}

Dataset write_generated_dataset(const std::vector<Batch>& batches, const GenConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  Dataset d;
  d.root = out_dir;
  d.split = config.asset_pool == AssetPool::kTrain ? Split::kTrain : Split::kValidation;
  d.image_size = {config.robot.image_width, config.robot.image_height};
  std::set<std::string> used_assets;
  for (const auto& batch : batches) {
    for (const auto& ex : batch.examples) {
      const std::string name = scene_file_name(ex.scene.batch_id, ex.scene.index_in_batch);
      detail::write_file(out_dir / name, serialize_scene(ex));
      d.examples.push_back({name, ex.annotation, ex.scene.batch_id, ex.scene.index_in_batch});
      for (const auto& p : ex.scene.distractors) used_assets.insert(p.asset_id);
      if (ex.scene.grasped_object) used_assets.insert(ex.scene.grasped_object->asset_id);
    }
  }
  Json assets = Json::object();
  for (const auto& id : used_assets) assets[id] = hull_json(find_asset(id).hull);
  detail::write_file(out_dir / "assets.json", assets.dump(1) + "\n");
  save_manifest(d, out_dir);
  return d;
}

}  // namespace graspcheck
