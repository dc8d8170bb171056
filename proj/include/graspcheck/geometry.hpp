#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace graspcheck {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kHullTolerance = 1e-9;  // meters

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  RigidTransform inverse() const {
    Mat3 rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
  // Orthonormal with det +1 within `tol`.
  bool is_proper_rotation(double tol = 1e-9) const;
};

Mat3 rotation_x(double angle);
Mat3 rotation_y(double angle);
Mat3 rotation_z(double angle);

/// Closed convex polyhedron with outward-oriented triangular faces.
///
/// Construction validates convexity (every vertex on or behind every face
/// plane within kHullTolerance) and rejects hulls without four non-coplanar
/// vertices with ErrorKind::kDegenerateHull. Instances are therefore always
/// valid.
class ConvexHullMesh {
 public:
  using Face = std::array<int, 3>;

  ConvexHullMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  /// Convex hull of an arbitrary point cloud (incremental construction).
  /// Interior and coplanar points are dropped.
  static ConvexHullMesh from_points(std::span<const Vec3> points);
  static ConvexHullMesh box(const Vec3& min_corner, const Vec3& max_corner);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }

  Vec3 centroid() const;  // vertex mean
  ConvexHullMesh scaled(double factor) const;
  ConvexHullMesh transformed(const RigidTransform& pose) const;

  /// Point containment against every face plane.
  bool contains(const Vec3& p, double tol = kHullTolerance) const;

  /// Unique undirected edges as index pairs.
  std::vector<std::array<int, 2>> edges() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
};

/// Signed separation distance along the best separating axis (face normals of
/// both hulls plus pairwise edge cross products). Positive means a gap of that
/// width exists; zero or negative means the hulls touch or overlap, and the
/// magnitude is then the smallest overlap over all tested axes.
double hull_separation(const ConvexHullMesh& a, const RigidTransform& pose_a,
                       const ConvexHullMesh& b, const RigidTransform& pose_b);

/// True iff the posed hulls share at least one point (touching counts).
bool convex_hulls_intersect(const ConvexHullMesh& a, const RigidTransform& pose_a,
                            const ConvexHullMesh& b, const RigidTransform& pose_b,
                            double tol = kHullTolerance);

}  // namespace graspcheck
