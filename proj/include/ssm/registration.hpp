#pragma once

#include "ssm/mesh.hpp"
#include "ssm/types.hpp"

namespace ssm {

struct RegistrationResult {
  RigidTransform transform;  // maps moving-frame points into the reference frame
  double residual = 0.0;     // RMS closest-point distance at the returned transform
  bool converged = true;
  int iterations = 0;
};

// Rigid transform minimizing sum ||R*source_i + t - target_i||^2 over
// paired points (Kabsch / orthogonal Procrustes, no scaling).
RigidTransform kabsch(const Points& source, const Points& target);

// Iterative closest point between surfaces: each round pairs the moving
// vertices with their closest points on the reference surface and solves the
// paired problem with kabsch(). Stops when the RMS residual improves by less
// than `tol`; returns best-so-far with converged=false if max_iterations is
// exhausted first.
RegistrationResult rigid_register(const TriangleMesh& moving,
                                  const TriangleMesh& reference,
                                  int max_iterations = 500, double tol = 1e-10);

}  // namespace ssm
