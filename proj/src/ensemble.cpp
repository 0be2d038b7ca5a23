#include "ssm/ensemble.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ssm/registration.hpp"

namespace fs = std::filesystem;

namespace ssm {

Ensemble load_ensemble(const std::string& dir) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("load_ensemble: not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".obj")
      paths.push_back(entry.path());
  }
  if (paths.empty())
    throw std::runtime_error("load_ensemble: no .obj files in " + dir);
  std::sort(paths.begin(), paths.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  Ensemble ensemble;
  ensemble.provenance = dir;
  for (const auto& path : paths) {
    ShapeSample sample;
    sample.id = path.stem().string();
    sample.mesh = read_obj(path.string());
    try {
      validate_mesh(sample.mesh);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
    ensemble.samples.push_back(std::move(sample));
  }
  return ensemble;
}

void save_ensemble(const Ensemble& ensemble, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& sample : ensemble.samples)
    write_obj(sample.mesh, (fs::path(dir) / (sample.id + ".obj")).string());
}

Ensemble preprocess_ensemble(const Ensemble& input, const PreprocessConfig& config,
                             GroundTruth* truth) {
  if (input.n() < 1) throw std::runtime_error("preprocess_ensemble: empty ensemble");
  if (config.representative < 0 || config.representative >= input.n())
    throw std::runtime_error("preprocess_ensemble: representative index out of range");
  if (truth && static_cast<int>(truth->samples.size()) != input.n())
    throw std::runtime_error("preprocess_ensemble: ground truth size mismatch");

  Ensemble out = input;
  const TriangleMesh& reference = input.sample(config.representative).mesh;
  for (int i = 0; i < out.n(); ++i) {
    ShapeSample& sample = out.sample(i);
    if (i == config.representative) {
      sample.world_from_input = RigidTransform::identity();
    } else {
      sample.world_from_input = rigid_register(sample.mesh, reference).transform;
      sample.mesh.vertices = sample.world_from_input.apply(sample.mesh.vertices);
    }
    if (truth && truth->samples[i].contour.rows() > 0) {
      SampleTruth& st = truth->samples[i];
      st.contour = sample.world_from_input.apply(st.contour);
      st.plane_normal = sample.world_from_input.rotation * st.plane_normal;
      st.plane_point = sample.world_from_input.apply(st.plane_point);
      st.septum_normal = sample.world_from_input.rotation * st.septum_normal;
    }
  }

  std::vector<SignedDistanceVolume> volumes;
  std::vector<std::string> names;
  volumes.reserve(out.n());
  for (auto& sample : out.samples) {
    SignedDistanceVolume vol = mesh_to_sdf(sample.mesh, config.spacing, config.padding);
    if (config.smooth_iterations > 0) vol = smooth_sdf(vol, config.smooth_iterations);
    volumes.push_back(std::move(vol));
    names.push_back(sample.id);
  }
  volumes = crop_to_common_box(volumes, config.padding, &names);
  for (int i = 0; i < out.n(); ++i) {
    out.sample(i).sdf = std::move(volumes[i]);
    out.sample(i).has_sdf = true;
  }
  out.world_frame = true;
  return out;
}

void write_ground_truth(const GroundTruth& truth, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::json doc;
  doc["samples"] = nlohmann::json::array();
  for (const auto& st : truth.samples) {
    nlohmann::json entry;
    entry["id"] = st.id;
    entry["family"] = st.family;
    entry["params"] = st.params;
    entry["plane_normal"] = {st.plane_normal[0], st.plane_normal[1], st.plane_normal[2]};
    entry["plane_point"] = {st.plane_point[0], st.plane_point[1], st.plane_point[2]};
    entry["septum_normal"] = {st.septum_normal[0], st.septum_normal[1], st.septum_normal[2]};
    entry["has_contour"] = st.contour.rows() > 0;
    doc["samples"].push_back(entry);

    if (st.contour.rows() > 0) {
      std::ofstream file(fs::path(dir) / (st.id + "_contour.txt"));
      if (!file) throw std::runtime_error("cannot write contour for " + st.id);
      file << std::setprecision(17);
      for (int r = 0; r < st.contour.rows(); ++r)
        file << st.contour(r, 0) << " " << st.contour(r, 1) << " " << st.contour(r, 2) << "\n";
    }
  }
  std::ofstream file(fs::path(dir) / "ground_truth.json");
  if (!file) throw std::runtime_error("cannot write ground_truth.json in " + dir);
  file << doc.dump(2) << "\n";
}

GroundTruth read_ground_truth(const std::string& dir) {
  std::ifstream file(fs::path(dir) / "ground_truth.json");
  if (!file) throw std::runtime_error("cannot read ground_truth.json in " + dir);
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(dir + "/ground_truth.json: " + e.what());
  }
  GroundTruth truth;
  for (const auto& entry : doc.at("samples")) {
    SampleTruth st;
    st.id = entry.at("id").get<std::string>();
    st.family = entry.at("family").get<int>();
    for (const auto& [key, value] : entry.at("params").items())
      st.params[key] = value.get<double>();
    for (int a = 0; a < 3; ++a) {
      st.plane_normal[a] = entry.at("plane_normal").at(a).get<double>();
      st.plane_point[a] = entry.at("plane_point").at(a).get<double>();
      if (entry.contains("septum_normal")) st.septum_normal[a] = entry.at("septum_normal").at(a).get<double>();
    }
    if (entry.value("has_contour", false)) {
      std::ifstream cf(fs::path(dir) / (st.id + "_contour.txt"));
      if (!cf) throw std::runtime_error("missing contour file for " + st.id);
      std::vector<Vec3> pts;
      double x, y, z;
      while (cf >> x >> y >> z) pts.emplace_back(x, y, z);
      st.contour.resize(static_cast<int>(pts.size()), 3);
      for (int r = 0; r < st.contour.rows(); ++r) st.contour.row(r) = pts[r];
    }
    truth.samples.push_back(std::move(st));
  }
  return truth;
}

}  // namespace ssm
