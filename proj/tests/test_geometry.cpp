#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "graspcheck/error.hpp"
#include "graspcheck/geometry.hpp"
#include "test_support.hpp"

using namespace graspcheck;
using graspcheck::testing::error_kind_of;

namespace {

using Tetra = std::array<Vec3, 4>;

// Outward half-spaces of a tetrahedron, built directly from its corners.
struct Plane {
  Vec3 n;
  double d;
};

std::array<Plane, 4> tetra_planes(const Tetra& t) {
  std::array<Plane, 4> out;
  for (int skip = 0; skip < 4; ++skip) {
    std::array<Vec3, 3> f;
    int k = 0;
    for (int i = 0; i < 4; ++i)
      if (i != skip) f[k++] = t[i];
    Vec3 n = (f[1] - f[0]).cross(f[2] - f[0]).normalized();
    if (n.dot(t[skip] - f[0]) > 0) n = -n;
    out[skip] = {n, n.dot(f[0])};
  }
  return out;
}

bool inside(const std::array<Plane, 4>& planes, const Vec3& p, double tol) {
  for (const auto& pl : planes)
    if (pl.n.dot(p) - pl.d > tol) return false;
  return true;
}

// Segment against triangle, closed.
bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 dir = q - p;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-18) return false;
  const double inv = 1.0 / det;
  const Vec3 s = p - a;
  const double u = inv * s.dot(h);
  if (u < 0 || u > 1) return false;
  const Vec3 qv = s.cross(e1);
  const double v = inv * dir.dot(qv);
  if (v < 0 || u + v > 1) return false;
  const double t = inv * e2.dot(qv);
  return t >= 0 && t <= 1;
}

// Exact test: convex solids meet iff a vertex of one lies in the other or an
// edge of one crosses a face of the other.
bool tetra_oracle_intersect(const Tetra& a, const Tetra& b) {
  const auto pa = tetra_planes(a), pb = tetra_planes(b);
  for (const auto& v : a)
    if (inside(pb, v, 0.0)) return true;
  for (const auto& v : b)
    if (inside(pa, v, 0.0)) return true;
  auto edges_vs_faces = [](const Tetra& s, const Tetra& t) {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        for (int skip = 0; skip < 4; ++skip) {
          std::array<Vec3, 3> f;
          int k = 0;
          for (int m = 0; m < 4; ++m)
            if (m != skip) f[k++] = t[m];
          if (segment_hits_triangle(s[i], s[j], f[0], f[1], f[2])) return true;
        }
    return false;
  };
  return edges_vs_faces(a, b) || edges_vs_faces(b, a);
}

// Grid sampling at 1 mm: a shared sample proves overlap.
bool sampling_finds_overlap(const Tetra& a, const Tetra& b) {
  Vec3 alo = a[0], ahi = a[0], blo = b[0], bhi = b[0];
  for (int i = 1; i < 4; ++i) {
    alo = alo.cwiseMin(a[i]);
    ahi = ahi.cwiseMax(a[i]);
    blo = blo.cwiseMin(b[i]);
    bhi = bhi.cwiseMax(b[i]);
  }
  const Vec3 lo = alo.cwiseMax(blo);
  const Vec3 hi = ahi.cwiseMin(bhi);
  if ((hi.array() < lo.array()).any()) return false;
  const auto pa = tetra_planes(a), pb = tetra_planes(b);
  const double step = 1e-3;
  for (double x = lo.x(); x <= hi.x(); x += step)
    for (double y = lo.y(); y <= hi.y(); y += step)
      for (double z = lo.z(); z <= hi.z(); z += step) {
        const Vec3 p(x, y, z);
        if (inside(pa, p, 0.0) && inside(pb, p, 0.0)) return true;
      }
  return false;
}

Tetra random_tetra(std::mt19937_64& rng, const Vec3& offset) {
  std::uniform_real_distribution<double> u(0.0, 0.03);
  for (;;) {
    Tetra t;
    for (auto& v : t) v = Vec3(u(rng), u(rng), u(rng)) + offset;
    const double vol = std::abs((t[1] - t[0]).dot((t[2] - t[0]).cross(t[3] - t[0]))) / 6.0;
    if (vol > 2e-7) return t;
  }
}

}  // namespace

TEST_CASE("box hull contains its centre and not outside points") {
  const auto cube = ConvexHullMesh::box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  CHECK(cube.vertices().size() == 8);
  CHECK(cube.faces().size() == 12);
  CHECK(cube.edges().size() == 18);
  CHECK(cube.contains(Vec3::Zero()));
  CHECK(cube.contains(Vec3(1, 1, 1)));
  CHECK_FALSE(cube.contains(Vec3(1.01, 0, 0)));
  CHECK(cube.centroid().norm() < 1e-12);
}

TEST_CASE("from_points drops interior points") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1 ? 1.0 : 0.0, i & 2 ? 1.0 : 0.0, i & 4 ? 1.0 : 0.0);
  pts.emplace_back(0.5, 0.5, 0.5);
  pts.emplace_back(0.2, 0.7, 0.4);
  const auto hull = ConvexHullMesh::from_points(pts);
  CHECK(hull.vertices().size() == 8);
  for (const auto& p : pts) CHECK(hull.contains(p));
}

TEST_CASE("degenerate inputs raise DegenerateHull") {
  std::vector<Vec3> coplanar{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {0.5, 0.5, 0}};
  CHECK(error_kind_of([&] { ConvexHullMesh::from_points(coplanar); }) == ErrorKind::kDegenerateHull);
  std::vector<Vec3> collinear{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  CHECK(error_kind_of([&] { ConvexHullMesh::from_points(collinear); }) == ErrorKind::kDegenerateHull);
  std::vector<Vec3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  CHECK(error_kind_of([&] { ConvexHullMesh::from_points(three); }) == ErrorKind::kDegenerateHull);

  // A face wound so that another vertex lies in front of it.
  std::vector<Vec3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<ConvexHullMesh::Face> bad{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  CHECK(error_kind_of([&] { ConvexHullMesh(v, bad); }) == ErrorKind::kDegenerateHull);
  std::vector<ConvexHullMesh::Face> out_of_range{{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 7}};
  CHECK(error_kind_of([&] { ConvexHullMesh(v, out_of_range); }) == ErrorKind::kDegenerateHull);
}

TEST_CASE("axis-aligned boxes: gap, touching, overlap") {
  const auto unit = ConvexHullMesh::box(Vec3::Zero(), Vec3::Ones());
  const auto id = RigidTransform::identity();
  CHECK(hull_separation(unit, id, unit, RigidTransform::from_translation(Vec3(1.5, 0, 0))) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(convex_hulls_intersect(unit, id, unit, RigidTransform::from_translation(Vec3(1.5, 0, 0))));
  CHECK(convex_hulls_intersect(unit, id, unit, RigidTransform::from_translation(Vec3(1.0, 0, 0))));
  CHECK_FALSE(convex_hulls_intersect(unit, id, unit, RigidTransform::from_translation(Vec3(1.0 + 1e-6, 0, 0))));
  CHECK(convex_hulls_intersect(unit, id, unit, RigidTransform::from_translation(Vec3(0.3, 0.2, -0.4))));
  CHECK(hull_separation(unit, id, unit, id) < 0.0);
}

TEST_CASE("rotated cubes: edge against face") {
  // Cube A turned about z leads with a vertical edge; B keeps its x faces.
  const auto cube = ConvexHullMesh::box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  const RigidTransform a{rotation_z(M_PI / 4), Vec3::Zero()};
  const double reach = std::sqrt(0.5);
  const RigidTransform near{rotation_x(M_PI / 4), Vec3(reach + 0.5 - 0.01, 0, 0)};
  const RigidTransform far{rotation_x(M_PI / 4), Vec3(reach + 0.5 + 0.01, 0, 0)};
  CHECK(convex_hulls_intersect(cube, a, cube, near) == true);
  CHECK_FALSE(convex_hulls_intersect(cube, a, cube, far));
  CHECK(hull_separation(cube, a, cube, far) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("intersection is symmetric and pose-invariant") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> off(-0.03, 0.03), ang(-M_PI, M_PI);
  for (int i = 0; i < 200; ++i) {
    const Tetra ta = random_tetra(rng, Vec3::Zero());
    const Tetra tb = random_tetra(rng, Vec3(off(rng), off(rng), off(rng)));
    const auto a = ConvexHullMesh::from_points(ta), b = ConvexHullMesh::from_points(tb);
    const auto id = RigidTransform::identity();
    const bool ab = convex_hulls_intersect(a, id, b, id);
    CHECK(ab == convex_hulls_intersect(b, id, a, id));
    const RigidTransform g{rotation_z(ang(rng)) * rotation_x(ang(rng)), Vec3(off(rng), off(rng), off(rng))};
    const double s = hull_separation(a, id, b, id);
    if (std::abs(s) > 1e-9) CHECK(ab == convex_hulls_intersect(a, g, b, g));
    CHECK(hull_separation(a, g, b, g) == doctest::Approx(s).epsilon(1e-9).scale(1e-6));
  }
}

TEST_CASE("500 tetrahedron pairs agree with exact and sampling oracles") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> off(-0.015, 0.015);
  int hits = 0, sampled_hits = 0;
  for (int i = 0; i < 500; ++i) {
    const Tetra ta = random_tetra(rng, Vec3::Zero());
    const Tetra tb = random_tetra(rng, Vec3(off(rng), off(rng), off(rng)));
    const auto a = ConvexHullMesh::from_points(ta), b = ConvexHullMesh::from_points(tb);
    const auto id = RigidTransform::identity();
    const bool got = convex_hulls_intersect(a, id, b, id);
    const double sep = hull_separation(a, id, b, id);
    CAPTURE(i);
    CAPTURE(sep);
    CHECK(got == (sep <= kHullTolerance));
    if (std::abs(sep) > 1e-6) CHECK(got == tetra_oracle_intersect(ta, tb));
    // One-sided: a common 1 mm sample proves overlap; the converse is only
    // required outside a 2 mm band, where the sample grid cannot miss it.
    const bool sampled = sampling_finds_overlap(ta, tb);
    if (sampled) {
      CHECK(got);
      ++sampled_hits;
    }
    if (sep > 2e-3) CHECK_FALSE(sampled);
    hits += got;
  }
  // The offset range is chosen so both outcomes are well represented.
  CHECK(hits > 100);
  CHECK(hits < 400);
  CHECK(sampled_hits > 50);
}

TEST_CASE("scaled and transformed hulls") {
  const auto cube = ConvexHullMesh::box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  const auto half = cube.scaled(0.5);
  CHECK(half.contains(Vec3(0.5, 0.5, 0.5)));
  CHECK_FALSE(half.contains(Vec3(0.6, 0, 0)));
  CHECK(error_kind_of([&] { cube.scaled(0.0); }) == ErrorKind::kInvalidArgument);
  const auto moved = cube.transformed(RigidTransform::from_translation(Vec3(5, 0, 0)));
  CHECK(moved.contains(Vec3(5, 0, 0)));
  CHECK_FALSE(moved.contains(Vec3::Zero()));
  CHECK(RigidTransform{rotation_y(0.3), Vec3::Zero()}.is_proper_rotation());
  Mat3 mirror = Mat3::Identity();
  mirror(0, 0) = -1;
  CHECK_FALSE(RigidTransform{mirror, Vec3::Zero()}.is_proper_rotation());
}
