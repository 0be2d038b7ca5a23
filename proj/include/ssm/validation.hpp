#pragma once

#include <string>
#include <vector>

#include "ssm/contour.hpp"
#include "ssm/ensemble.hpp"
#include "ssm/pdm.hpp"

namespace ssm {

struct MeasurementRow {
  std::string sample_id;
  int cluster = 0;
  std::string source;  // "truth" or the correspondence method
  ContourMeasurements values;
};

struct PValueCell {
  double p = 1.0;
  int n = 0;           // cluster members entering the test
  bool skipped = false;  // clusters with fewer than three members
};

struct PValueRow {
  std::string method;
  std::string measurement;
  std::vector<PValueCell> cells;  // one per cluster
  bool pass = false;              // every tested cluster above the threshold
};

struct ValidationResult {
  std::vector<MeasurementRow> measurements;
  std::vector<PValueRow> pvalues;
};

// Per-cluster contour transfer check for one correspondence method: the
// reference member's true contour is anchored to its correspondence points,
// propagated to every member, measured, and compared against each member's
// own true contour with paired t-tests. A p-value above the threshold means
// the method introduces no detectable measurement bias in that cluster.
ValidationResult validate_method(const Ensemble& ensemble, const GroundTruth& truth,
                                 const CorrespondenceModel& model, const std::vector<int>& labels,
                                 int n_clusters, double threshold = 0.01);

extern const std::vector<std::string> kMeasurementNames;

void write_measurements_csv(const std::vector<MeasurementRow>& rows, const std::string& path);
void write_pvalues_csv(const std::vector<PValueRow>& rows, int n_clusters, const std::string& path);

}  // namespace ssm
