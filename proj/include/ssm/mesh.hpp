#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssm/types.hpp"

namespace ssm {

/// Closed triangle surface in mm. Faces are vertex-index triples wound
/// counter-clockwise seen from outside, so face normals point outward.
struct TriangleMesh {
  Points vertices;
  Faces faces;

  int n_vertices() const { return static_cast<int>(vertices.rows()); }
  int n_faces() const { return static_cast<int>(faces.rows()); }

  Vec3 vertex(int i) const { return vertices.row(i).transpose(); }

  Vec3 face_normal(int f) const;       // unit length
  double face_area(int f) const;
  Vec3 face_centroid(int f) const;

  double total_area() const;
  /// Volume by the divergence theorem; positive for outward orientation.
  double signed_volume() const;
  /// Area-weighted centroid of the surface.
  Vec3 surface_centroid() const;

  std::pair<Vec3, Vec3> bounding_box() const;  // {lo, hi} corners
};

/// Undirected boundary edges (edges not shared by exactly two faces).
std::vector<std::pair<int, int>> boundary_edges(const TriangleMesh& mesh);

bool is_watertight(const TriangleMesh& mesh);

/// V - E + F of the surface complex (2 for a sphere, 0 for a torus).
int euler_characteristic(const TriangleMesh& mesh);

/// Throws std::runtime_error on out-of-range indices, degenerate faces,
/// or open boundaries; the message lists offending boundary edges.
void validate_mesh(const TriangleMesh& mesh, const std::string& name = "mesh");

// OBJ subset: "v x y z" and "f i j k" lines only (1-based), ASCII.
TriangleMesh read_obj(const std::string& path);
void write_obj(const TriangleMesh& mesh, const std::string& path);

/// Subdivided icosahedron with 10*4^level + 2 vertices. The construction is
/// deterministic: vertex ordering depends only on `level`, and the vertex set
/// is antipodally symmetric.
TriangleMesh make_icosphere(int level, double radius = 1.0,
                            const Vec3& center = Vec3::Zero());

/// Axis-aligned box with each edge split into `divisions` segments.
TriangleMesh make_box(const Vec3& lo, const Vec3& hi, int divisions);

}  // namespace ssm
