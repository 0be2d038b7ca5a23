#include "ssm/validation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ssm/stats.hpp"

namespace ssm {

const std::vector<std::string> kMeasurementNames = {"max_mm", "min_mm", "area_mm2",
                                                    "circumference_mm", "angle_deg"};

namespace {

double measurement_value(const ContourMeasurements& m, int which) {
  switch (which) {
    case 0: return m.max_mm;
    case 1: return m.min_mm;
    case 2: return m.area_mm2;
    case 3: return m.circumference_mm;
    case 4: return m.angle_deg;
    default: throw std::logic_error("bad measurement index");
  }
}

}  // namespace

ValidationResult validate_method(const Ensemble& ensemble, const GroundTruth& truth,
                                 const CorrespondenceModel& model, const std::vector<int>& labels,
                                 int n_clusters, double threshold) {
  model.validate();
  if (ensemble.n() != model.n())
    throw std::invalid_argument("validate_method: ensemble and model sizes differ");
  if (static_cast<int>(labels.size()) != model.n())
    throw std::invalid_argument("validate_method: one label per sample required");
  if (n_clusters < 1) throw std::invalid_argument("validate_method: need at least one cluster");

  std::map<std::string, const SampleTruth*> truth_by_id;
  for (const SampleTruth& st : truth.samples) truth_by_id[st.id] = &st;

  ValidationResult result;
  // Per cluster and measurement: paired (truth, propagated) values.
  std::vector<std::vector<std::vector<double>>> truth_vals(
      n_clusters, std::vector<std::vector<double>>(kMeasurementNames.size()));
  auto prop_vals = truth_vals;

  for (int c = 0; c < n_clusters; ++c) {
    std::vector<int> members;
    for (int i = 0; i < model.n(); ++i) {
      if (labels[i] != c) continue;
      auto it = truth_by_id.find(model.ids[i]);
      if (it == truth_by_id.end() || it->second->contour.rows() == 0) continue;
      members.push_back(i);
    }
    if (members.empty()) continue;
    std::sort(members.begin(), members.end(),
              [&](int a, int b) { return model.ids[a] < model.ids[b]; });
    int ref = members.front();
    ContourAnchors anchors = anchor_contour(truth_by_id.at(model.ids[ref])->contour, model.points[ref]);
    for (int i : members) {
      const SampleTruth& st = *truth_by_id.at(model.ids[i]);
      Points propagated = propagate_contour(anchors, model.points[i]);
      ContourMeasurements gt = measure_contour(st.contour, st.septum_normal);
      ContourMeasurements prop = measure_contour(propagated, st.septum_normal);
      result.measurements.push_back({model.ids[i], c, "truth", gt});
      result.measurements.push_back({model.ids[i], c, model.method, prop});
      for (size_t w = 0; w < kMeasurementNames.size(); ++w) {
        truth_vals[c][w].push_back(measurement_value(gt, static_cast<int>(w)));
        prop_vals[c][w].push_back(measurement_value(prop, static_cast<int>(w)));
      }
    }
  }

  for (size_t w = 0; w < kMeasurementNames.size(); ++w) {
    PValueRow row;
    row.method = model.method;
    row.measurement = kMeasurementNames[w];
    bool any_tested = false;
    bool all_above = true;
    for (int c = 0; c < n_clusters; ++c) {
      PValueCell cell;
      cell.n = static_cast<int>(truth_vals[c][w].size());
      if (cell.n < 3) {
        cell.skipped = true;
      } else {
        VecX a = Eigen::Map<const VecX>(truth_vals[c][w].data(), cell.n);
        VecX b = Eigen::Map<const VecX>(prop_vals[c][w].data(), cell.n);
        cell.p = paired_t_test(a, b).p;
        any_tested = true;
        if (!(cell.p > threshold)) all_above = false;
      }
      row.cells.push_back(cell);
    }
    row.pass = any_tested && all_above;
    result.pvalues.push_back(std::move(row));
  }
  return result;
}

void write_measurements_csv(const std::vector<MeasurementRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "sample_id,cluster,source,max_mm,min_mm,area_mm2,circ_mm,angle_deg\n";
  for (const MeasurementRow& r : rows)
    out << r.sample_id << ',' << r.cluster << ',' << r.source << ',' << r.values.max_mm << ','
        << r.values.min_mm << ',' << r.values.area_mm2 << ',' << r.values.circumference_mm << ','
        << r.values.angle_deg << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_pvalues_csv(const std::vector<PValueRow>& rows, int n_clusters, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "comparison";
  for (int c = 0; c < n_clusters; ++c) out << ",cluster_" << c;
  out << ",pass\n";
  for (const PValueRow& r : rows) {
    out << r.method << ':' << r.measurement;
    for (const PValueCell& cell : r.cells) {
      if (cell.skipped)
        out << ",skipped";
      else
        out << ',' << cell.p;
    }
    out << ',' << (r.pass ? "pass" : "fail") << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace ssm
