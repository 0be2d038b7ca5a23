#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ssm/metrics.hpp"
#include "ssm/pdm.hpp"
#include "ssm/types.hpp"

using namespace ssm;

namespace {

double wobble(int i) {
  double x = std::sin(12.9898 * (i + 1)) * 43758.5453;
  return 2.0 * (x - std::floor(x)) - 1.0;
}

Points ring(int m, double radius, double z) {
  Points p(m, 3);
  for (int i = 0; i < m; ++i) {
    double a = 2.0 * M_PI * i / m;
    p.row(i) << radius * std::cos(a), radius * std::sin(a), z;
  }
  return p;
}

// Two independent parameters (radius, height) with radius dominating.
CorrespondenceModel two_mode_model(int n) {
  CorrespondenceModel model;
  model.method = "particles";
  for (int i = 0; i < n; ++i) {
    model.ids.push_back("m" + std::to_string(i));
    double radius = 2.0 + 0.8 * wobble(3 * i);
    double height = 0.05 * wobble(3 * i + 1);
    model.points.push_back(ring(12, radius, height));
  }
  return model;
}

CorrespondenceModel constant_model(int n) {
  CorrespondenceModel model;
  model.method = "particles";
  Points p = ring(10, 1.5, 0.2);
  for (int i = 0; i < n; ++i) {
    model.ids.push_back("c" + std::to_string(i));
    model.points.push_back(p);
  }
  return model;
}

}  // namespace

TEST_CASE("compactness is a nondecreasing fraction reaching one") {
  PDM pdm = build_pdm(two_mode_model(10));
  double prev = 0.0;
  for (int k = 1; k <= pdm.k(); ++k) {
    double c = compactness(pdm, k);
    CHECK(c >= prev - 1e-15);
    CHECK(c <= 1.0 + 1e-15);
    prev = c;
  }
  CHECK(compactness(pdm, pdm.k()) == doctest::Approx(1.0).epsilon(1e-12));
  // Hand-check k=1 against the eigenvalue ratio.
  double want = pdm.eigenvalues(0) / pdm.eigenvalues.sum();
  CHECK(compactness(pdm, 1) == doctest::Approx(want).epsilon(1e-12));
  // Radius variation dominates this family.
  CHECK(compactness(pdm, 1) > 0.9);
}

TEST_CASE("compactness of a zero-variance model follows the convention") {
  PDM pdm = build_pdm(constant_model(5));
  bool zero = false;
  CHECK(compactness(pdm, 1, &zero) == 1.0);
  CHECK(zero);
}

TEST_CASE("compactness rejects out-of-range k") {
  PDM pdm = build_pdm(two_mode_model(6));
  CHECK_THROWS(compactness(pdm, 0));
  CHECK_THROWS(compactness(pdm, pdm.k() + 1));
}

TEST_CASE("generalization improves with more modes and vanishes for identical shapes") {
  CorrespondenceModel model = two_mode_model(12);
  double g1 = generalization(model, 1);
  double g2 = generalization(model, 2);
  double gmax = generalization(model, 10);
  CHECK(g1 >= g2 - 1e-12);
  CHECK(g2 >= gmax - 1e-12);
  CHECK(g1 > 0.0);
  // With all modes available, a one-parameter-dominated family reconstructs
  // nearly perfectly.
  CHECK(gmax < 0.2 * g1 + 1e-9);
  CHECK(generalization(constant_model(6), 1) < 1e-9);
}

TEST_CASE("specificity penalizes inflated variance models") {
  CorrespondenceModel model = two_mode_model(12);
  PDM pdm = build_pdm(model);
  auto [aligned, transforms] = procrustes_align(model);
  double s = specificity(pdm, aligned, 2, 200, 7);
  CHECK(s > 0.0);
  // Inflate the first eigenvalue: generated shapes stray farther from the
  // training set, so specificity must get worse.
  PDM inflated = pdm;
  inflated.eigenvalues(0) *= 25.0;
  double s_inflated = specificity(inflated, aligned, 2, 200, 7);
  CHECK(s_inflated > s);
  // Deterministic in the seed.
  CHECK(specificity(pdm, aligned, 2, 200, 7) == s);
  CHECK(specificity(pdm, aligned, 2, 200, 8) != s);
}

TEST_CASE("specificity of a zero-variance model is zero") {
  CorrespondenceModel model = constant_model(5);
  PDM pdm = build_pdm(model);
  auto [aligned, transforms] = procrustes_align(model);
  CHECK(specificity(pdm, aligned, 1, 50, 3) < 1e-12);
}

TEST_CASE("evaluate_model produces a full table with clamped k") {
  CorrespondenceModel model = two_mode_model(4);  // only 3 modes available
  MetricsConfig config;
  config.k_max = 5;
  config.specificity_samples = 50;
  config.seed = 11;
  std::vector<ModelMetricsRow> rows = evaluate_model(model, config);
  REQUIRE(rows.size() == 3);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].k == static_cast<int>(i) + 1);
    CHECK(rows[i].compactness >= 0.0);
    CHECK(rows[i].compactness <= 1.0 + 1e-15);
    CHECK(rows[i].generalization_mm >= 0.0);
    CHECK(rows[i].specificity_mm >= 0.0);
  }
}

TEST_CASE("metrics csv has the expected header and row count") {
  std::vector<ModelMetricsRow> rows = {{1, 0.9, 0.5, 0.4}, {2, 0.99, 0.25, 0.35}};
  std::string path = (std::filesystem::temp_directory_path() / "ssm_metrics_test.csv").string();
  write_metrics_csv(rows, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,compactness,generalization_mm,specificity_mm");
  int count = 0;
  while (std::getline(in, line))
    if (!line.empty()) count += 1;
  CHECK(count == 2);
  in.close();
  std::filesystem::remove(path);
}
