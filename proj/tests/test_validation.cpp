#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ssm/contour.hpp"
#include "ssm/ensemble.hpp"
#include "ssm/pdm.hpp"
#include "ssm/validation.hpp"

using namespace ssm;

namespace {

Points ring(int m, double radius) {
  Points p(m, 3);
  for (int i = 0; i < m; ++i) {
    double a = 2.0 * M_PI * i / m;
    p.row(i) << radius * std::cos(a), radius * std::sin(a), 0.0;
  }
  return p;
}

// Correspondences: a ring of 12 points plus two off-plane stabilizers.
Points corr_points(double scale) {
  Points p(14, 3);
  p.topRows(12) = ring(12, 2.0 * scale);
  p.row(12) << 0.0, 0.0, 1.0 * scale;
  p.row(13) << 0.0, 0.0, -1.0 * scale;
  return p;
}

Ensemble dummy_ensemble(const std::vector<std::string>& ids) {
  Ensemble ens;
  for (const std::string& id : ids) {
    ShapeSample s;
    s.id = id;
    ens.samples.push_back(std::move(s));
  }
  return ens;
}

SampleTruth circle_truth(const std::string& id, int family) {
  SampleTruth t;
  t.id = id;
  t.family = family;
  t.contour = ring(16, 1.5);
  t.plane_normal = Vec3::UnitZ();
  t.plane_point = Vec3::Zero();
  t.septum_normal = Vec3::UnitZ();
  return t;
}

}  // namespace

TEST_CASE("perfect correspondences pass every measurement in every cluster") {
  // Two clusters of four identical members each: propagation reproduces the
  // reference contour exactly, so all paired differences vanish.
  std::vector<std::string> ids;
  CorrespondenceModel model;
  model.method = "particles";
  GroundTruth truth;
  std::vector<int> labels;
  for (int c = 0; c < 2; ++c) {
    double scale = c == 0 ? 1.0 : 1.6;
    for (int i = 0; i < 4; ++i) {
      std::string id = (c == 0 ? "a" : "b") + std::to_string(i);
      ids.push_back(id);
      model.ids.push_back(id);
      model.points.push_back(corr_points(scale));
      SampleTruth t = circle_truth(id, c + 1);
      t.contour *= scale;
      truth.samples.push_back(std::move(t));
      labels.push_back(c);
    }
  }
  Ensemble ens = dummy_ensemble(ids);
  ValidationResult res = validate_method(ens, truth, model, labels, 2, 0.01);
  REQUIRE(res.pvalues.size() == kMeasurementNames.size());
  for (const PValueRow& row : res.pvalues) {
    CHECK(row.method == "particles");
    REQUIRE(row.cells.size() == 2);
    for (const PValueCell& cell : row.cells) {
      CHECK(!cell.skipped);
      CHECK(cell.n == 4);
      CHECK(cell.p == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(row.pass);
  }
  // Two rows (truth + method) per member.
  CHECK(res.measurements.size() == 16);
  // The truth rows carry the circle's analytic measurements.
  for (const MeasurementRow& r : res.measurements) {
    if (r.source != "truth" || r.cluster != 0) continue;
    CHECK(r.values.max_mm == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(r.values.min_mm == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(r.values.area_mm2 == doctest::Approx(M_PI * 1.5 * 1.5).epsilon(1e-6));
    CHECK(r.values.angle_deg == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  }
}

TEST_CASE("a systematic correspondence bias is detected") {
  // One cluster of eight; all but the reference member carry correspondences
  // scaled up 30 percent while their true contours are unscaled. The
  // propagated contours inherit the inflation, so the size measurements
  // show a consistent bias.
  std::vector<std::string> ids = {"a0", "b1", "b2", "b3", "b4", "b5", "b6", "b7"};
  CorrespondenceModel model;
  model.method = "particles";
  GroundTruth truth;
  std::vector<int> labels(8, 0);
  for (size_t i = 0; i < ids.size(); ++i) {
    model.ids.push_back(ids[i]);
    model.points.push_back(corr_points(i == 0 ? 1.0 : 1.3));
    truth.samples.push_back(circle_truth(ids[i], 1));
  }
  Ensemble ens = dummy_ensemble(ids);
  ValidationResult res = validate_method(ens, truth, model, labels, 1, 0.01);
  bool checked_area = false, checked_angle = false;
  for (const PValueRow& row : res.pvalues) {
    if (row.measurement == "area_mm2" || row.measurement == "max_mm") {
      CHECK(row.cells[0].p < 0.01);
      CHECK(!row.pass);
      checked_area = true;
    }
    if (row.measurement == "angle_deg") {
      // Everything stays in one plane, so the angle is unbiased.
      CHECK(row.pass);
      checked_angle = true;
    }
  }
  CHECK(checked_area);
  CHECK(checked_angle);
}

TEST_CASE("clusters with fewer than three members are skipped") {
  std::vector<std::string> ids = {"a0", "a1", "a2", "a3", "b0", "b1"};
  CorrespondenceModel model;
  model.method = "spherical";
  GroundTruth truth;
  std::vector<int> labels = {0, 0, 0, 0, 1, 1};
  for (const std::string& id : ids) {
    model.ids.push_back(id);
    model.points.push_back(corr_points(1.0));
    truth.samples.push_back(circle_truth(id, 1));
  }
  Ensemble ens = dummy_ensemble(ids);
  ValidationResult res = validate_method(ens, truth, model, labels, 2, 0.01);
  for (const PValueRow& row : res.pvalues) {
    CHECK(!row.cells[0].skipped);
    CHECK(row.cells[1].skipped);
    CHECK(row.cells[1].n == 2);
    // A skipped cluster does not block the pass verdict.
    CHECK(row.pass);
  }
}

TEST_CASE("samples without a true contour are left out of the test") {
  std::vector<std::string> ids = {"a0", "a1", "a2", "a3"};
  CorrespondenceModel model;
  model.method = "particles";
  GroundTruth truth;
  std::vector<int> labels(4, 0);
  for (const std::string& id : ids) {
    model.ids.push_back(id);
    model.points.push_back(corr_points(1.0));
    SampleTruth t = circle_truth(id, 1);
    if (id == "a3") t.contour.resize(0, 3);
    truth.samples.push_back(std::move(t));
  }
  Ensemble ens = dummy_ensemble(ids);
  ValidationResult res = validate_method(ens, truth, model, labels, 1, 0.01);
  for (const PValueRow& row : res.pvalues) CHECK(row.cells[0].n == 3);
}

TEST_CASE("validate_method rejects inconsistent input") {
  std::vector<std::string> ids = {"a0", "a1", "a2"};
  CorrespondenceModel model;
  model.method = "particles";
  GroundTruth truth;
  for (const std::string& id : ids) {
    model.ids.push_back(id);
    model.points.push_back(corr_points(1.0));
    truth.samples.push_back(circle_truth(id, 1));
  }
  Ensemble ens = dummy_ensemble(ids);
  std::vector<int> labels(3, 0);
  CHECK_THROWS(validate_method(ens, truth, model, {0, 0}, 1, 0.01));
  CHECK_THROWS(validate_method(ens, truth, model, labels, 0, 0.01));
  Ensemble small = dummy_ensemble({"a0"});
  CHECK_THROWS(validate_method(small, truth, model, labels, 1, 0.01));
}

TEST_CASE("csv writers use the documented layouts") {
  std::vector<MeasurementRow> rows;
  MeasurementRow r;
  r.sample_id = "a0";
  r.cluster = 2;
  r.source = "truth";
  r.values = {10.0, 6.0, 47.1, 25.7, 45.0};
  rows.push_back(r);
  auto tmp = std::filesystem::temp_directory_path();
  std::string mpath = (tmp / "ssm_val_meas.csv").string();
  write_measurements_csv(rows, mpath);
  std::ifstream min(mpath);
  std::string line;
  std::getline(min, line);
  CHECK(line == "sample_id,cluster,source,max_mm,min_mm,area_mm2,circ_mm,angle_deg");
  std::getline(min, line);
  CHECK(line.rfind("a0,2,truth,10,", 0) == 0);
  min.close();
  std::filesystem::remove(mpath);

  PValueRow row;
  row.method = "particles";
  row.measurement = "area_mm2";
  row.cells.resize(2);
  row.cells[0].p = 0.25;
  row.cells[1].skipped = true;
  row.pass = true;
  std::string ppath = (tmp / "ssm_val_p.csv").string();
  write_pvalues_csv({row}, 2, ppath);
  std::ifstream pin(ppath);
  std::getline(pin, line);
  CHECK(line == "comparison,cluster_0,cluster_1,pass");
  std::getline(pin, line);
  CHECK(line == "particles:area_mm2,0.25,skipped,pass");
  pin.close();
  std::filesystem::remove(ppath);
}
