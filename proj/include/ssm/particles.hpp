#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssm/ensemble.hpp"
#include "ssm/pdm.hpp"
#include "ssm/types.hpp"

namespace ssm {

struct PbmConfig {
  int target_particles = 128;     // must be a power of two, >= 4 for real runs
  int iterations_per_level = 60;  // optimization budget between splits
  double relative_weight = 1.0;   // weight of the surface-sampling term
  double alpha0 = -1.0;           // covariance regularization; < 0 selects (0.1*spacing)^2
  uint64_t seed = 0;
  // per-particle kernel bandwidths are nearest-neighbor distances clamped to
  // [lo, hi] * sqrt(area/M), refreshed at each split level
  double bandwidth_clamp_lo = 0.5;
  double bandwidth_clamp_hi = 2.0;
};

// One particle set per shape; index m is the correspondence.
struct ParticleSystem {
  std::vector<Points> positions;
  int n() const { return static_cast<int>(positions.size()); }
  int m() const { return positions.empty() ? 0 : static_cast<int>(positions[0].rows()); }
};

struct ParticleTraceRow {
  int iter;
  int level;  // split level the row belongs to (not written to CSV)
  double ensemble_entropy;
  double sampling_term;
  double objective;
};
using ParticleTrace = std::vector<ParticleTraceRow>;

// H(Z): 0.5 * sum log(lambda_i + alpha) over all dM covariance eigenvalues
// (divisor N-1), computed through the N x N Gram matrix; the dM - rank zero
// eigenvalues contribute log(alpha) each.
double ensemble_entropy(const ParticleSystem& system, double alpha);

// Per-shape spreading cost: sum_m [ log sum_{m' != m} exp(-|x_m - x_m'|^2 /
// (2 sigma_m^2)) - 3 log sigma_m ]. This is -M * (Parzen entropy estimate)
// up to dropped constants: lower means better-spread particles. sigmas holds
// one bandwidth per particle.
double sampling_entropy(const Points& particles, const VecX& sigmas);

// Convenience overload with sigma_m = nearest-neighbor distance.
double sampling_entropy(const Points& particles);

// Analytic d(ensemble_entropy)/d(positions), one gradient block per shape.
// The optimizer steps along these; exposed so they can be checked against
// finite differences.
std::vector<Points> ensemble_entropy_gradients(const ParticleSystem& system, double alpha);

// Analytic d(sampling_entropy)/d(particles) with the bandwidths held fixed.
Points sampling_entropy_gradient(const Points& particles, const VecX& sigmas);

// Splitting initialization: one particle per shape nearest the ensemble-mean
// surface centroid, then duplicate-with-offset rounds (offsets shared across
// shapes) with optimization between rounds, until target_particles.
ParticleSystem initialize_particles(const Ensemble& ensemble, const PbmConfig& config);

// Full groupwise optimization: projected gradient descent with backtracking
// line search on Q = H(Z) + w * sum_n S_n, every update projected back to
// the zero level set. Results are independent of sample order (samples are
// processed in id order internally).
CorrespondenceModel optimize_particles(const Ensemble& ensemble, const PbmConfig& config,
                                       ParticleTrace* trace = nullptr);

// CSV (iter, ensemble_entropy, sampling_term, objective).
void write_particle_trace(const ParticleTrace& trace, const std::string& path);

}  // namespace ssm
