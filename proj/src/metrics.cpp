#include "ssm/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

#include "ssm/generators.hpp"
#include "ssm/registration.hpp"

namespace ssm {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Deterministic standard normal draws (Box-Muller on splitmix-backed bits),
// independent of standard library distribution internals.
class NormalDraw {
 public:
  explicit NormalDraw(uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  double uniform() { return double(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  bool have_ = false;
  double spare_ = 0.0;
};

double mean_point_distance(const VecX& a, const VecX& b) {
  const int m = static_cast<int>(a.size()) / 3;
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    double dx = a(3 * i) - b(3 * i);
    double dy = a(3 * i + 1) - b(3 * i + 1);
    double dz = a(3 * i + 2) - b(3 * i + 2);
    sum += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return sum / m;
}

}  // namespace

double compactness(const PDM& pdm, int k, bool* zero_variance) {
  if (k < 1 || k > static_cast<int>(pdm.eigenvalues.size()))
    throw std::invalid_argument("compactness: k out of range");
  double total = pdm.eigenvalues.sum();
  // tolerate eigendecomposition residue when every sample is identical
  bool zero = total <= 1e-15 * std::max(1.0, pdm.mean.squaredNorm());
  if (zero_variance) *zero_variance = zero;
  if (zero) return 1.0;
  return pdm.eigenvalues.head(k).sum() / total;
}

double generalization(const CorrespondenceModel& model, int k) {
  model.validate();
  if (k < 1) throw std::invalid_argument("generalization: k must be positive");
  const int n = model.n();
  double total = 0.0;
  for (int held = 0; held < n; ++held) {
    CorrespondenceModel fold;
    fold.method = model.method;
    for (int i = 0; i < n; ++i) {
      if (i == held) continue;
      fold.ids.push_back(model.ids[i]);
      fold.points.push_back(model.points[i]);
    }
    VecX mean;
    MatX modes;
    VecX lambda;
    if (fold.n() == 1) {
      mean = fold.flatten(0);
      modes.resize(mean.size(), 0);
      lambda.resize(0);
    } else {
      auto [aligned, transforms] = procrustes_align(fold);
      PDM pdm = build_pdm(aligned);
      mean = pdm.mean;
      modes = pdm.eigenvectors;
      lambda = pdm.eigenvalues;
    }
    // Rigidly align the held-out shape to the fold mean before projecting.
    Points target = CorrespondenceModel::unflatten(mean);
    RigidTransform t = kabsch(model.points[held], target);
    Points held_pts = t.apply(model.points[held]);
    VecX x(3 * model.m());
    for (int i = 0; i < model.m(); ++i)
      for (int d = 0; d < 3; ++d) x(3 * i + d) = held_pts(i, d);
    int kk = std::min<int>(k, static_cast<int>(modes.cols()));
    VecX recon = mean;
    if (kk > 0) {
      VecX coeffs = modes.leftCols(kk).transpose() * (x - mean);
      recon += modes.leftCols(kk) * coeffs;
    }
    total += mean_point_distance(x, recon);
  }
  return total / n;
}

double specificity(const PDM& pdm, const CorrespondenceModel& aligned, int k, int n_samples,
                   uint64_t seed) {
  aligned.validate();
  if (k < 1 || k > pdm.k()) throw std::invalid_argument("specificity: k out of range");
  if (n_samples < 1) throw std::invalid_argument("specificity: need at least one sample");
  if (aligned.m() != pdm.n_points)
    throw std::invalid_argument("specificity: model and training shapes disagree on point count");
  std::vector<VecX> training;
  for (int i = 0; i < aligned.n(); ++i) training.push_back(aligned.flatten(i));
  NormalDraw draw(split_seed(seed, 0x5ec));
  double total = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    VecX shape = pdm.mean;
    for (int j = 0; j < k; ++j) {
      double c = std::sqrt(std::max(0.0, pdm.eigenvalues(j))) * draw();
      shape += c * pdm.eigenvectors.col(j);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const VecX& t : training) best = std::min(best, mean_point_distance(shape, t));
    total += best;
  }
  return total / n_samples;
}

std::vector<ModelMetricsRow> evaluate_model(const CorrespondenceModel& model,
                                            const MetricsConfig& config) {
  model.validate();
  auto [aligned, transforms] = procrustes_align(model);
  PDM pdm = build_pdm(aligned);
  int k_max = std::min(config.k_max, pdm.k());
  if (k_max < 1) throw std::invalid_argument("evaluate_model: model has no modes");
  std::vector<ModelMetricsRow> rows;
  bool warned = false;
  for (int k = 1; k <= k_max; ++k) {
    ModelMetricsRow row;
    row.k = k;
    bool zero = false;
    row.compactness = compactness(pdm, k, &zero);
    if (zero && !warned) {
      std::cerr << "warning: model has zero total variance; compactness reported as 1.0\n";
      warned = true;
    }
    row.generalization_mm = generalization(model, k);
    row.specificity_mm = specificity(pdm, aligned, k, config.specificity_samples, config.seed);
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_csv(const std::vector<ModelMetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "k,compactness,generalization_mm,specificity_mm\n";
  for (const ModelMetricsRow& r : rows)
    out << r.k << ',' << r.compactness << ',' << r.generalization_mm << ',' << r.specificity_mm << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace ssm
