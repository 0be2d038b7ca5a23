#pragma once

#include <memory>

#include "ssm/mesh.hpp"
#include "ssm/types.hpp"

namespace ssm {

// Result of a closest-point query against a triangle mesh.
// feature: 0 = face interior, 1 = edge, 2 = vertex.
// feature_index: for edges, the corner index e such that the edge runs from
// corner e to corner (e+1)%3 of `face`; for vertices, the corner index.
struct SurfacePoint {
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
  int face = -1;
  int feature = 0;
  int feature_index = 0;
};

// Closest point on triangle abc to p (Ericson). Optionally reports which
// feature of the triangle the closest point lies on (see SurfacePoint).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, int* feature = nullptr,
                               int* feature_index = nullptr);

// Solid angle subtended at the origin by triangle abc (van Oosterom-Strackee).
double triangle_solid_angle(const Vec3& a, const Vec3& b, const Vec3& c);

// Accelerated distance queries against a fixed triangle mesh. Builds an AABB
// tree once at construction; queries are thread-safe afterwards.
class MeshQuery {
 public:
  explicit MeshQuery(const TriangleMesh& mesh);
  ~MeshQuery();
  MeshQuery(MeshQuery&&) noexcept;
  MeshQuery& operator=(MeshQuery&&) noexcept;
  MeshQuery(const MeshQuery&) = delete;
  MeshQuery& operator=(const MeshQuery&) = delete;

  SurfacePoint closest(const Vec3& p) const;

  // Unsigned distance from closest(); sign from the angle-weighted
  // pseudonormal at the closest feature (negative inside a watertight,
  // outward-oriented mesh).
  double signed_distance(const Vec3& p) const;

  // Generalized winding number (~1 inside, ~0 outside). Exact sum over all
  // faces; O(#faces) per call.
  double winding_number(const Vec3& p) const;

  const TriangleMesh& mesh() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ssm
