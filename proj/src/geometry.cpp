#include "graspcheck/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "graspcheck/error.hpp"

namespace graspcheck {

bool RigidTransform::is_proper_rotation(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat3 rotation_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rotation_y(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rotation_z(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix(); }

namespace {

struct Plane {
  Vec3 normal;
  double offset;  // normal . x == offset on the plane
};

Plane face_plane(const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  if (len == 0.0) return {Vec3::Zero(), 0.0};
  n /= len;
  return {n, n.dot(a)};
}

double extent_of(std::span<const Vec3> pts) {
  Vec3 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

}  // namespace

ConvexHullMesh::ConvexHullMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  if (vertices_.size() < 4 || faces_.size() < 4) {
    throw Error(ErrorKind::kDegenerateHull, "hull needs at least 4 vertices and 4 faces");
  }
  for (const auto& v : vertices_) {
    if (!v.allFinite()) throw Error(ErrorKind::kDegenerateHull, "non-finite vertex");
  }
  const int n = static_cast<int>(vertices_.size());
  bool has_depth = false;
  for (const auto& f : faces_) {
    for (int idx : f) {
      if (idx < 0 || idx >= n) throw Error(ErrorKind::kDegenerateHull, "face index out of range");
    }
    const Plane pl = face_plane(vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
    if (pl.normal.isZero()) throw Error(ErrorKind::kDegenerateHull, "zero-area face");
    for (const auto& v : vertices_) {
      const double d = pl.normal.dot(v) - pl.offset;
      if (d > kHullTolerance) {
        throw Error(ErrorKind::kDegenerateHull, "vertex in front of a face plane (not convex)");
      }
      if (d < -kHullTolerance) has_depth = true;
    }
  }
  if (!has_depth) throw Error(ErrorKind::kDegenerateHull, "all vertices coplanar");
}

ConvexHullMesh ConvexHullMesh::from_points(std::span<const Vec3> points) {
  if (points.size() < 4) {
    throw Error(ErrorKind::kDegenerateHull, "fewer than 4 points");
  }
  const double scale = std::max(1.0, extent_of(points));
  const double eps = 1e-12 * scale;

  // Initial tetrahedron from extreme points.
  const int n = static_cast<int>(points.size());
  int i0 = 0;
  for (int i = 1; i < n; ++i) {
    if (points[i].x() < points[i0].x()) i0 = i;
  }
  int i1 = -1;
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (points[i] - points[i0]).squaredNorm();
    if (d > best) best = d, i1 = i;
  }
  if (i1 < 0 || std::sqrt(best) <= eps) throw Error(ErrorKind::kDegenerateHull, "coincident points");
  const Vec3 axis = (points[i1] - points[i0]).normalized();
  int i2 = -1;
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec3 r = points[i] - points[i0];
    const double d = (r - axis * axis.dot(r)).norm();
    if (d > best) best = d, i2 = i;
  }
  if (i2 < 0 || best <= eps) throw Error(ErrorKind::kDegenerateHull, "collinear points");
  const Plane base = face_plane(points[i0], points[i1], points[i2]);
  int i3 = -1;
  best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(base.normal.dot(points[i]) - base.offset);
    if (d > best) best = d, i3 = i;
  }
  if (i3 < 0 || best <= eps) throw Error(ErrorKind::kDegenerateHull, "coplanar points");

  const Vec3 interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;

  struct WorkFace {
    Face idx;
    Plane plane;
    bool alive;
  };
  std::vector<WorkFace> work;
  auto add_face = [&](int a, int b, int c) {
    Plane pl = face_plane(points[a], points[b], points[c]);
    if (pl.normal.dot(interior) - pl.offset > 0.0) {
      std::swap(b, c);
      pl = face_plane(points[a], points[b], points[c]);
    }
    work.push_back({{a, b, c}, pl, true});
  };
  add_face(i0, i1, i2);
  add_face(i0, i1, i3);
  add_face(i0, i2, i3);
  add_face(i1, i2, i3);

  for (int p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    std::set<std::pair<int, int>> visible_edges;
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < work.size(); ++f) {
      if (!work[f].alive) continue;
      if (work[f].plane.normal.dot(points[p]) - work[f].plane.offset > eps) {
        visible.push_back(f);
        const auto& idx = work[f].idx;
        for (int e = 0; e < 3; ++e) visible_edges.insert({idx[e], idx[(e + 1) % 3]});
      }
    }
    if (visible.empty()) continue;
    std::vector<std::pair<int, int>> horizon;
    for (const auto& [a, b] : visible_edges) {
      if (!visible_edges.contains({b, a})) horizon.emplace_back(a, b);
    }
    for (std::size_t f : visible) work[f].alive = false;
    for (const auto& [a, b] : horizon) {
      const Plane pl = face_plane(points[a], points[b], points[p]);
      work.push_back({{a, b, p}, pl, true});
    }
  }

  std::vector<int> remap(points.size(), -1);
  std::vector<Vec3> verts;
  std::vector<Face> faces;
  for (const auto& wf : work) {
    if (!wf.alive) continue;
    Face out{};
    for (int k = 0; k < 3; ++k) {
      int& slot = remap[wf.idx[k]];
      if (slot < 0) {
        slot = static_cast<int>(verts.size());
        verts.push_back(points[wf.idx[k]]);
      }
      out[k] = slot;
    }
    faces.push_back(out);
  }
  return ConvexHullMesh(std::move(verts), std::move(faces));
}

ConvexHullMesh ConvexHullMesh::box(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> corners;
  for (int i = 0; i < 8; ++i) {
    corners.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  return from_points(corners);
}

Vec3 ConvexHullMesh::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& v : vertices_) sum += v;
  return sum / static_cast<double>(vertices_.size());
}

ConvexHullMesh ConvexHullMesh::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw Error(ErrorKind::kInvalidArgument, "hull scale must be positive and finite");
  }
  std::vector<Vec3> verts = vertices_;
  for (auto& v : verts) v *= factor;
  return ConvexHullMesh(std::move(verts), faces_);
}

ConvexHullMesh ConvexHullMesh::transformed(const RigidTransform& pose) const {
  std::vector<Vec3> verts = vertices_;
  for (auto& v : verts) v = pose.apply(v);
  return ConvexHullMesh(std::move(verts), faces_);
}

bool ConvexHullMesh::contains(const Vec3& p, double tol) const {
  for (const auto& f : faces_) {
    const Plane pl = face_plane(vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
    if (pl.normal.dot(p) - pl.offset > tol) return false;
  }
  return true;
}

std::vector<std::array<int, 2>> ConvexHullMesh::edges() const {
  std::set<std::pair<int, int>> seen;
  for (const auto& f : faces_) {
    for (int e = 0; e < 3; ++e) {
      int a = f[e], b = f[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      seen.insert({a, b});
    }
  }
  std::vector<std::array<int, 2>> out;
  out.reserve(seen.size());
  for (const auto& [a, b] : seen) out.push_back({a, b});
  return out;
}

namespace {

struct WorldHull {
  std::vector<Vec3> verts;
  std::vector<Vec3> normals;
  std::vector<Vec3> edge_dirs;
  Vec3 center;
  double radius;
};

WorldHull to_world(const ConvexHullMesh& hull, const RigidTransform& pose) {
  WorldHull w;
  w.verts.reserve(hull.vertices().size());
  for (const auto& v : hull.vertices()) w.verts.push_back(pose.apply(v));
  for (const auto& f : hull.faces()) {
    const Vec3 n = (w.verts[f[1]] - w.verts[f[0]]).cross(w.verts[f[2]] - w.verts[f[0]]);
    const double len = n.norm();
    if (len > 0.0) w.normals.push_back(n / len);
  }
  for (const auto& e : hull.edges()) {
    const Vec3 d = w.verts[e[1]] - w.verts[e[0]];
    const double len = d.norm();
    if (len > 0.0) w.edge_dirs.push_back(d / len);
  }
  w.center = Vec3::Zero();
  for (const auto& v : w.verts) w.center += v;
  w.center /= static_cast<double>(w.verts.size());
  w.radius = 0.0;
  for (const auto& v : w.verts) w.radius = std::max(w.radius, (v - w.center).norm());
  return w;
}

std::pair<double, double> project(const std::vector<Vec3>& verts, const Vec3& axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& v : verts) {
    const double d = axis.dot(v);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

// Visits every candidate axis; stops early when `visit` returns true.
template <typename Visit>
void for_each_axis(const WorldHull& a, const WorldHull& b, Visit&& visit) {
  for (const auto& n : a.normals) {
    if (visit(n)) return;
  }
  for (const auto& n : b.normals) {
    if (visit(n)) return;
  }
  for (const auto& ea : a.edge_dirs) {
    for (const auto& eb : b.edge_dirs) {
      const Vec3 c = ea.cross(eb);
      const double len = c.norm();
      if (len < 1e-9) continue;  // parallel edges are covered by face normals
      if (visit(Vec3(c / len))) return;
    }
  }
}

double axis_gap(const WorldHull& a, const WorldHull& b, const Vec3& axis) {
  const auto [alo, ahi] = project(a.verts, axis);
  const auto [blo, bhi] = project(b.verts, axis);
  return std::max(blo - ahi, alo - bhi);
}

}  // namespace

double hull_separation(const ConvexHullMesh& a, const RigidTransform& pose_a,
                       const ConvexHullMesh& b, const RigidTransform& pose_b) {
  const WorldHull wa = to_world(a, pose_a);
  const WorldHull wb = to_world(b, pose_b);
  double best = -std::numeric_limits<double>::infinity();
  for_each_axis(wa, wb, [&](const Vec3& axis) {
    best = std::max(best, axis_gap(wa, wb, axis));
    return false;
  });
  return best;
}

bool convex_hulls_intersect(const ConvexHullMesh& a, const RigidTransform& pose_a,
                            const ConvexHullMesh& b, const RigidTransform& pose_b, double tol) {
  const WorldHull wa = to_world(a, pose_a);
  const WorldHull wb = to_world(b, pose_b);
  if ((wa.center - wb.center).norm() > wa.radius + wb.radius + tol) return false;
  bool separated = false;
  for_each_axis(wa, wb, [&](const Vec3& axis) {
    separated = axis_gap(wa, wb, axis) > tol;
    return separated;
  });
  return !separated;
}

}  // namespace graspcheck
