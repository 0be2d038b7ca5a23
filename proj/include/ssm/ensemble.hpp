#pragma once

#include <map>
#include <string>
#include <vector>

#include "ssm/mesh.hpp"
#include "ssm/sdf.hpp"
#include "ssm/types.hpp"

namespace ssm {

struct ShapeSample {
  std::string id;
  TriangleMesh mesh;
  SignedDistanceVolume sdf;  // filled by preprocessing
  bool has_sdf = false;
  // maps the sample's original frame into the common world frame
  RigidTransform world_from_input;
};

struct Ensemble {
  std::vector<ShapeSample> samples;
  bool world_frame = false;  // true once preprocess_ensemble has run
  std::string provenance;

  int n() const { return static_cast<int>(samples.size()); }
  const ShapeSample& sample(int i) const { return samples[i]; }
  ShapeSample& sample(int i) { return samples[i]; }
};

// Generative record for one synthetic sample: scalar parameters, the family
// label (1..4 for appendages, 0 otherwise), and the exact ostium contour
// with its plane, standing in for manually placed landmarks.
struct SampleTruth {
  std::string id;
  std::map<std::string, double> params;
  int family = 0;
  Points contour;  // ordered planar ring on the surface; 0 rows when absent
  Vec3 plane_normal = Vec3::UnitZ();   // contour (ostium) plane
  Vec3 plane_point = Vec3::Zero();
  Vec3 septum_normal = Vec3::UnitZ();  // reference plane for the angle measurement
};

struct GroundTruth {
  std::vector<SampleTruth> samples;
};

struct PreprocessConfig {
  double spacing = 0.1;       // SDF voxel size (mm)
  double padding = 0.5;       // extra space around each shape (mm)
  int smooth_iterations = 0;  // narrow-band smoothing passes
  int representative = 0;     // registration target, index into the ensemble
};

// Loads every *.obj in `dir` (lexicographic filename order) and validates
// each mesh. Errors name the offending file.
Ensemble load_ensemble(const std::string& dir);

// Writes <id>.obj per sample.
void save_ensemble(const Ensemble& ensemble, const std::string& dir);

// The standard pipeline in front of every correspondence method: rigid
// registration of each sample to the representative, signed distance
// transforms, optional smoothing, and resampling to the union bounding box,
// so all samples share one grid. Ground-truth contours, if given, are moved
// by each sample's registration transform so they stay on the surfaces.
Ensemble preprocess_ensemble(const Ensemble& input, const PreprocessConfig& config,
                             GroundTruth* truth = nullptr);

// ground_truth.json (parameters, families, planes) plus <id>_contour.txt
// files, one "x y z" line per contour point.
void write_ground_truth(const GroundTruth& truth, const std::string& dir);
GroundTruth read_ground_truth(const std::string& dir);

}  // namespace ssm
