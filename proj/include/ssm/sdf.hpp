#pragma once

#include <string>
#include <vector>

#include "ssm/mesh.hpp"
#include "ssm/types.hpp"

namespace ssm {

// Signed distance sampled on a regular isotropic grid. Values are negative
// inside the surface, positive outside, stored x-fastest.
struct SignedDistanceVolume {
  Vec3i dims = Vec3i::Zero();
  double spacing = 1.0;
  Vec3 origin = Vec3::Zero();  // world position of voxel (0,0,0)
  std::vector<float> values;

  std::size_t n_voxels() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (j + static_cast<std::size_t>(dims[1]) * k);
  }
  float value(int i, int j, int k) const { return values[index(i, j, k)]; }
  float& value(int i, int j, int k) { return values[index(i, j, k)]; }
  Vec3 voxel_center(int i, int j, int k) const {
    return origin + spacing * Vec3(i, j, k);
  }
  Vec3 world_to_grid(const Vec3& p) const { return (p - origin) / spacing; }

  // True if p lies where trilinear interpolation is defined (strictly inside
  // the outermost voxel centers, shrunk by margin_voxels).
  bool contains(const Vec3& p, double margin_voxels = 0.0) const;

  double interpolate(const Vec3& p) const;

  // Gradient of the trilinear interpolant at p (discontinuous across cell
  // faces; evaluated on the cell containing p).
  Vec3 gradient(const Vec3& p) const;

  // interpolate() with the query clamped to the grid; points outside get the
  // clamped value plus the Euclidean distance to the grid, which keeps the
  // exterior positive and monotone.
  double sample_extrapolated(const Vec3& p) const;
};

// Signed distance of a watertight, outward-oriented mesh on a grid covering
// its bounding box plus `padding` on every side. Distances are exact
// point-to-triangle; the sign comes from angle-weighted pseudonormals and is
// then audited per connected component against the generalized winding
// number.
SignedDistanceVolume mesh_to_sdf(const TriangleMesh& mesh, double spacing,
                                 double padding);

// Moves a point onto the zero level set by damped Newton steps along the
// interpolated gradient (step clamped to one voxel). Throws if the gradient
// vanishes repeatedly or 100 iterations do not converge.
Vec3 project_to_surface(const Vec3& point, const SignedDistanceVolume& sdf);

// Gaussian smoothing of the narrow band (|value| <= 3*spacing). After each
// iteration the zero level set is extracted and its Euler characteristic
// compared with the input's; a topology-changing iteration is rolled back
// and smoothing stops there.
SignedDistanceVolume smooth_sdf(const SignedDistanceVolume& sdf, int iterations);

// Resamples every volume onto one shared grid: the union of the zero level
// set bounding boxes plus `padding`, at the common spacing. All inputs must
// agree on spacing. `names` (parallel to `volumes`, optional) labels error
// messages, e.g. when a volume has an empty zero level set.
std::vector<SignedDistanceVolume> crop_to_common_box(
    const std::vector<SignedDistanceVolume>& volumes, double padding,
    const std::vector<std::string>* names = nullptr);

// Triangulates the `iso` level set by marching tetrahedra (6 tets per cell).
// Vertices are welded; the result is watertight for level sets that do not
// touch the grid boundary, with normals pointing toward increasing values.
TriangleMesh extract_level_set(const SignedDistanceVolume& sdf, double iso = 0.0);

// Trilinear resampling onto an arbitrary grid (extrapolation as in
// sample_extrapolated).
SignedDistanceVolume resample_volume(const SignedDistanceVolume& sdf,
                                     const Vec3i& dims, double spacing,
                                     const Vec3& origin);

// Raw little-endian float32 array (x-fastest) at base + ".raw" and a JSON
// sidecar {dims, spacing, origin} at base + ".json".
void write_volume(const SignedDistanceVolume& vol, const std::string& base_path);
SignedDistanceVolume read_volume(const std::string& base_path);

}  // namespace ssm
