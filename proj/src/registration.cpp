#include "ssm/registration.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "ssm/mesh_query.hpp"

namespace ssm {

RigidTransform kabsch(const Points& source, const Points& target) {
  if (source.rows() != target.rows() || source.rows() < 3)
    throw std::runtime_error("kabsch: needs at least 3 point pairs of equal count");
  Vec3 sc = source.colwise().mean();
  Vec3 tc = target.colwise().mean();
  Mat3 h = (source.rowwise() - sc.transpose()).transpose() *
           (target.rowwise() - tc.transpose());
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  Vec3 d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  RigidTransform out;
  out.rotation = v * d.asDiagonal() * u.transpose();
  out.translation = tc - out.rotation * sc;
  return out;
}

RegistrationResult rigid_register(const TriangleMesh& moving,
                                  const TriangleMesh& reference,
                                  int max_iterations, double tol) {
  if (moving.n_vertices() == 0 || reference.n_vertices() == 0)
    throw std::runtime_error("rigid_register: empty mesh");
  MeshQuery query(reference);

  RegistrationResult result;
  result.transform = RigidTransform::identity();
  Points matched(moving.n_vertices(), 3);

  auto rms = [&](const RigidTransform& t) {
    double acc = 0.0;
    for (int v = 0; v < moving.n_vertices(); ++v) {
      SurfacePoint sp = query.closest(t.apply(Vec3(moving.vertices.row(v))));
      matched.row(v) = sp.point;
      acc += sp.distance * sp.distance;
    }
    return std::sqrt(acc / moving.n_vertices());
  };

  double prev = rms(result.transform);
  result.residual = prev;
  result.converged = false;
  for (int iter = 0; iter < max_iterations; ++iter) {
    // matched currently holds the pairing for result.transform
    RigidTransform candidate = kabsch(moving.vertices, matched);
    double r = rms(candidate);
    result.iterations = iter + 1;
    if (r < result.residual) {
      result.transform = candidate;
      result.residual = r;
    }
    if (std::abs(prev - r) < tol) {
      result.converged = true;
      break;
    }
    prev = r;
  }
  return result;
}

}  // namespace ssm
