#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssm/types.hpp"

namespace ssm {

// Corresponding surface points across an ensemble: row n holds sample n's
// M points, and point index m marks the same locus on every shape.
struct CorrespondenceModel {
  std::vector<std::string> ids;  // per-sample, parallel to points
  std::vector<Points> points;    // N entries, each M x 3
  std::string method;

  int n() const { return static_cast<int>(points.size()); }
  int m() const { return points.empty() ? 0 : static_cast<int>(points[0].rows()); }

  // sample i as a dM vector (x0 y0 z0 x1 y1 z1 ...)
  VecX flatten(int i) const;
  static Points unflatten(const VecX& v);

  void validate() const;  // shape/NaN checks, throws on violation
};

// Mean plus principal modes of the correspondence covariance.
struct PDM {
  VecX mean;          // dM
  VecX eigenvalues;   // K entries, descending, >= 0 (mm^2)
  MatX eigenvectors;  // dM x K, orthonormal columns
  int n_samples = 0;
  int n_points = 0;

  int k() const { return static_cast<int>(eigenvalues.size()); }
};

// Generalized Procrustes alignment, rigid only (no scaling): iterates
// align-each-to-mean until the mean stops moving. Returns the aligned model
// and the per-sample transform that was applied.
std::pair<CorrespondenceModel, std::vector<RigidTransform>> procrustes_align(
    const CorrespondenceModel& model);

// PCA of the aligned correspondences with covariance divisor N-1, computed
// through the N x N Gram matrix (N << dM). Keeps K = min(N-1, dM) modes;
// columns for zero eigenvalues are deterministic orthonormal fill so the
// basis stays orthonormal. Column signs make the largest-magnitude entry
// positive.
PDM build_pdm(const CorrespondenceModel& model);

// mean + t * sqrt(lambda_k) * v_k; k is 1-based. A zero eigenvalue with
// t != 0 returns the mean and sets *warned.
VecX sample_mode(const PDM& pdm, int k, double t, bool* warned = nullptr);

// Projections of each aligned sample onto the modes: row i holds
// v_k . (x_i - mean) for k = 1..K.
MatX mode_coefficients(const PDM& pdm, const CorrespondenceModel& aligned);

// One "<id>_world.particles" file per sample (ASCII, one "x y z" per line)
// plus model.json recording the method tag and sample order.
void write_correspondences(const CorrespondenceModel& model, const std::string& dir);
CorrespondenceModel read_correspondences(const std::string& dir);

// JSON {mean, eigenvalues, eigenvectors (row-major), N, M}.
void write_pdm(const PDM& pdm, const std::string& path);
PDM read_pdm(const std::string& path);

}  // namespace ssm
