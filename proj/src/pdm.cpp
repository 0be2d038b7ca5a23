#include "ssm/pdm.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "json.hpp"
#include "ssm/registration.hpp"

namespace fs = std::filesystem;

namespace ssm {

VecX CorrespondenceModel::flatten(int i) const {
  const Points& p = points[i];
  VecX v(3 * p.rows());
  for (int r = 0; r < p.rows(); ++r)
    for (int c = 0; c < 3; ++c) v[3 * r + c] = p(r, c);
  return v;
}

Points CorrespondenceModel::unflatten(const VecX& v) {
  if (v.size() % 3 != 0)
    throw std::runtime_error("unflatten: vector length not a multiple of 3");
  Points p(v.size() / 3, 3);
  for (int r = 0; r < p.rows(); ++r)
    for (int c = 0; c < 3; ++c) p(r, c) = v[3 * r + c];
  return p;
}

void CorrespondenceModel::validate() const {
  if (n() < 2) throw std::runtime_error("correspondence model needs N >= 2 samples");
  if (static_cast<int>(ids.size()) != n())
    throw std::runtime_error("correspondence model: ids do not match sample count");
  for (int i = 0; i < n(); ++i) {
    if (points[i].rows() != m())
      throw std::runtime_error("correspondence model: point count differs at " + ids[i]);
    if (!points[i].allFinite())
      throw std::runtime_error("correspondence model: non-finite value in " + ids[i]);
  }
}

std::pair<CorrespondenceModel, std::vector<RigidTransform>> procrustes_align(
    const CorrespondenceModel& model) {
  model.validate();
  const int n = model.n(), m = model.m();
  for (int i = 0; i < n; ++i) {
    Points centered = model.points[i].rowwise() - model.points[i].colwise().mean();
    if (centered.norm() < 1e-12)
      throw std::runtime_error("procrustes_align: all points coincide in " + model.ids[i]);
  }

  CorrespondenceModel aligned = model;
  std::vector<RigidTransform> transforms(n);
  Points mean(m, 3);
  auto compute_mean = [&]() {
    mean.setZero();
    for (int i = 0; i < n; ++i) mean += aligned.points[i];
    mean /= n;
  };
  compute_mean();

  for (int iter = 0; iter < 200; ++iter) {
    for (int i = 0; i < n; ++i) {
      transforms[i] = kabsch(model.points[i], mean);
      aligned.points[i] = transforms[i].apply(model.points[i]);
    }
    Points prev = mean;
    compute_mean();
    if ((mean - prev).rowwise().norm().maxCoeff() < 1e-9) break;
  }
  return {std::move(aligned), std::move(transforms)};
}

PDM build_pdm(const CorrespondenceModel& model) {
  model.validate();
  const int n = model.n();
  const int dm = 3 * model.m();
  MatX x(n, dm);
  for (int i = 0; i < n; ++i) x.row(i) = model.flatten(i);

  PDM pdm;
  pdm.n_samples = n;
  pdm.n_points = model.m();
  pdm.mean = x.colwise().mean();
  MatX y = x.rowwise() - pdm.mean.transpose();

  const int k = std::min(n - 1, dm);
  MatX gram = y * y.transpose() / (n - 1);
  Eigen::SelfAdjointEigenSolver<MatX> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("build_pdm: eigendecomposition failed");

  pdm.eigenvalues.resize(k);
  pdm.eigenvectors.resize(dm, k);
  // SelfAdjointEigenSolver sorts ascending; take the top k in descending order
  const double lambda_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double tol = std::max(1e-14, 1e-12 * lambda_max);
  int filled = 0;
  for (int i = 0; i < k; ++i) {
    double lambda = eig.eigenvalues()[n - 1 - i];
    pdm.eigenvalues[i] = std::max(lambda, 0.0);
    if (lambda > tol) {
      VecX w = y.transpose() * eig.eigenvectors().col(n - 1 - i);
      pdm.eigenvectors.col(i) = w / w.norm();
      ++filled;
    }
  }
  // zero-variance modes get a deterministic orthonormal completion from the
  // canonical basis so the matrix stays orthonormal
  int next_axis = 0;
  for (int i = filled; i < k; ++i) {
    VecX v = VecX::Zero(dm);
    while (next_axis < dm) {
      v.setZero();
      v[next_axis++] = 1.0;
      for (int j = 0; j < i; ++j) v -= pdm.eigenvectors.col(j).dot(v) * pdm.eigenvectors.col(j);
      if (v.norm() > 0.5) break;  // axis not already spanned
    }
    pdm.eigenvectors.col(i) = v / v.norm();
  }
  // sign convention: largest-magnitude entry of each column is positive
  for (int i = 0; i < k; ++i) {
    int idx = 0;
    pdm.eigenvectors.col(i).cwiseAbs().maxCoeff(&idx);
    if (pdm.eigenvectors(idx, i) < 0.0) pdm.eigenvectors.col(i) = -pdm.eigenvectors.col(i);
  }
  return pdm;
}

VecX sample_mode(const PDM& pdm, int k, double t, bool* warned) {
  if (k < 1 || k > pdm.k()) throw std::runtime_error("sample_mode: mode index out of range");
  if (warned) *warned = false;
  double lambda = pdm.eigenvalues[k - 1];
  if (lambda <= 0.0) {
    if (t != 0.0 && warned) *warned = true;
    return pdm.mean;
  }
  return pdm.mean + t * std::sqrt(lambda) * pdm.eigenvectors.col(k - 1);
}

MatX mode_coefficients(const PDM& pdm, const CorrespondenceModel& aligned) {
  aligned.validate();
  if (aligned.m() != pdm.n_points)
    throw std::runtime_error("mode_coefficients: model and samples disagree on point count");
  MatX coeffs(aligned.n(), pdm.k());
  for (int i = 0; i < aligned.n(); ++i)
    coeffs.row(i) = (pdm.eigenvectors.transpose() * (aligned.flatten(i) - pdm.mean)).transpose();
  return coeffs;
}

void write_correspondences(const CorrespondenceModel& model, const std::string& dir) {
  fs::create_directories(dir);
  for (int i = 0; i < model.n(); ++i) {
    std::ofstream file(fs::path(dir) / (model.ids[i] + "_world.particles"));
    if (!file) throw std::runtime_error("cannot write particles for " + model.ids[i]);
    file << std::setprecision(17);
    const Points& p = model.points[i];
    for (int r = 0; r < p.rows(); ++r)
      file << p(r, 0) << " " << p(r, 1) << " " << p(r, 2) << "\n";
  }
  nlohmann::json meta;
  meta["method"] = model.method;
  meta["ids"] = model.ids;
  std::ofstream file(fs::path(dir) / "model.json");
  if (!file) throw std::runtime_error("cannot write model.json in " + dir);
  file << meta.dump(2) << "\n";
}

CorrespondenceModel read_correspondences(const std::string& dir) {
  std::ifstream meta_file(fs::path(dir) / "model.json");
  if (!meta_file) throw std::runtime_error("cannot read model.json in " + dir);
  nlohmann::json meta;
  try {
    meta_file >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(dir + "/model.json: " + e.what());
  }
  CorrespondenceModel model;
  model.method = meta.at("method").get<std::string>();
  for (const auto& id : meta.at("ids")) {
    std::string name = id.get<std::string>();
    std::ifstream file(fs::path(dir) / (name + "_world.particles"));
    if (!file) throw std::runtime_error("missing particle file for " + name + " in " + dir);
    std::vector<Vec3> pts;
    double x, y, z;
    while (file >> x >> y >> z) pts.emplace_back(x, y, z);
    Points p(static_cast<int>(pts.size()), 3);
    for (int r = 0; r < p.rows(); ++r) p.row(r) = pts[r];
    model.ids.push_back(name);
    model.points.push_back(std::move(p));
  }
  model.validate();
  return model;
}

void write_pdm(const PDM& pdm, const std::string& path) {
  nlohmann::json doc;
  doc["N"] = pdm.n_samples;
  doc["M"] = pdm.n_points;
  doc["mean"] = std::vector<double>(pdm.mean.data(), pdm.mean.data() + pdm.mean.size());
  doc["eigenvalues"] = std::vector<double>(pdm.eigenvalues.data(),
                                           pdm.eigenvalues.data() + pdm.eigenvalues.size());
  std::vector<double> vecs;
  vecs.reserve(pdm.eigenvectors.size());
  for (int r = 0; r < pdm.eigenvectors.rows(); ++r)
    for (int c = 0; c < pdm.eigenvectors.cols(); ++c) vecs.push_back(pdm.eigenvectors(r, c));
  doc["eigenvectors"] = vecs;
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  file << doc.dump() << "\n";
}

PDM read_pdm(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("cannot read " + path);
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  PDM pdm;
  pdm.n_samples = doc.at("N").get<int>();
  pdm.n_points = doc.at("M").get<int>();
  auto mean = doc.at("mean").get<std::vector<double>>();
  auto lambdas = doc.at("eigenvalues").get<std::vector<double>>();
  auto vecs = doc.at("eigenvectors").get<std::vector<double>>();
  pdm.mean = Eigen::Map<VecX>(mean.data(), static_cast<int>(mean.size()));
  pdm.eigenvalues = Eigen::Map<VecX>(lambdas.data(), static_cast<int>(lambdas.size()));
  const int dm = static_cast<int>(mean.size()), k = static_cast<int>(lambdas.size());
  if (static_cast<int>(vecs.size()) != dm * k)
    throw std::runtime_error(path + ": eigenvector matrix size mismatch");
  pdm.eigenvectors.resize(dm, k);
  for (int r = 0; r < dm; ++r)
    for (int c = 0; c < k; ++c) pdm.eigenvectors(r, c) = vecs[r * k + c];
  return pdm;
}

}  // namespace ssm
