#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssm/pdm.hpp"

namespace ssm {

// Fraction of total variance captured by the leading k modes. When the model
// has zero total variance the convention is 1.0; zero_variance reports it.
double compactness(const PDM& pdm, int k, bool* zero_variance = nullptr);

// Leave-one-out reconstruction error: each fold re-aligns and re-fits the
// model on the remaining shapes, rigidly aligns the held-out shape to the
// fold mean, and reconstructs it from the leading k modes. Returns the mean
// over folds of the mean per-point error (mm).
double generalization(const CorrespondenceModel& model, int k);

// Mean distance from shapes sampled out of N(0, diag(lambda_1..lambda_k)) to
// their nearest training shape (mean per-point error, mm). aligned must be
// the model the PDM was trained on.
double specificity(const PDM& pdm, const CorrespondenceModel& aligned, int k, int n_samples,
                   uint64_t seed);

struct ModelMetricsRow {
  int k;
  double compactness;
  double generalization_mm;
  double specificity_mm;
};

struct MetricsConfig {
  int k_max = 5;  // clamped to the number of available modes
  int specificity_samples = 1000;
  uint64_t seed = 0;
};

// Full table for k = 1..k_max from an unaligned correspondence model.
std::vector<ModelMetricsRow> evaluate_model(const CorrespondenceModel& model,
                                            const MetricsConfig& config);

void write_metrics_csv(const std::vector<ModelMetricsRow>& rows, const std::string& path);

}  // namespace ssm
