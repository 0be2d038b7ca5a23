#include "ssm/spharm.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "ssm/mesh_query.hpp"

namespace ssm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Associated Legendre P_l^m(x) with Condon-Shortley phase, m >= 0.
double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    double s = std::sqrt(std::max(0.0, 1.0 - x * x));
    double fact = 1.0;
    for (int i = 0; i < m; ++i) {
      pmm *= -fact * s;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = ((2.0 * ll - 1.0) * x * pmmp1 - (ll + m - 1.0) * pmm) / double(ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

// sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!), m >= 0.
double ylm_norm(int l, int m) {
  double ratio = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) ratio /= double(k);
  return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
}

void check_lm(int l, int m) {
  if (l < 0 || std::abs(m) > l) throw std::invalid_argument("spherical harmonic: need l >= 0 and |m| <= l");
}

Vec3 direction(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

void angles_from_direction(const Vec3& u, double& theta, double& phi) {
  theta = std::acos(std::clamp(u.z(), -1.0, 1.0));
  phi = std::atan2(u.y(), u.x());
}

MatX design_matrix(const MatX& angles, int l_max) {
  const int v = static_cast<int>(angles.rows());
  const int nb = (l_max + 1) * (l_max + 1);
  MatX a(v, nb);
  for (int i = 0; i < v; ++i)
    for (int l = 0; l <= l_max; ++l)
      for (int m = -l; m <= l; ++m) a(i, l * l + m + l) = real_ylm(l, m, angles(i, 0), angles(i, 1));
  return a;
}

}  // namespace

SphericalParam spherical_parameterize(const TriangleMesh& mesh) {
  if (!is_watertight(mesh)) throw std::invalid_argument("spherical parameterization requires a closed mesh");
  if (euler_characteristic(mesh) != 2)
    throw std::invalid_argument("spherical parameterization requires a genus-0 mesh");
  SphericalParam param;
  param.center = mesh.surface_centroid();
  const int v = mesh.n_vertices();
  param.angles.resize(v, 2);
  std::vector<Vec3> dirs(v);
  for (int i = 0; i < v; ++i) {
    Vec3 d = mesh.vertex(i) - param.center;
    double len = d.norm();
    if (len < 1e-12)
      throw std::invalid_argument("spherical parameterization: vertex coincides with the centroid");
    dirs[i] = d / len;
    angles_from_direction(dirs[i], param.angles(i, 0), param.angles(i, 1));
  }
  double area = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    Vec3i face = mesh.faces.row(f);
    area += std::abs(triangle_solid_angle(dirs[face[0]], dirs[face[1]], dirs[face[2]]));
  }
  param.area_ratio = area / (4.0 * kPi);
  if (std::abs(param.area_ratio - 1.0) > 0.01)
    throw std::invalid_argument("spherical parameterization folds: mesh is not star-shaped about its centroid");
  return param;
}

EllipsoidAlignment ellipsoid_align(SphericalParam& param, const TriangleMesh& mesh) {
  SpharmFit deg1 = fit_spharm(param, mesh, 1);
  // Degree-1 block as a map from parameter directions to world offsets.
  // Real degree-1 basis: Y_1^{-1} = -k u_y, Y_1^0 = k u_z, Y_1^1 = -k u_x
  // with k = sqrt(3/(4 pi)).
  const double k = std::sqrt(3.0 / (4.0 * kPi));
  Mat3 b;
  for (int j = 0; j < 3; ++j) {
    b(j, 0) = -k * deg1.coeffs(1 * 1 + 1 + 1, j);  // from u_x (m = +1)
    b(j, 1) = -k * deg1.coeffs(1 * 1 - 1 + 1, j);  // from u_y (m = -1)
    b(j, 2) = k * deg1.coeffs(1 * 1 + 0 + 1, j);   // from u_z (m = 0)
  }
  Eigen::JacobiSVD<Mat3> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  EllipsoidAlignment out;
  double s0 = svd.singularValues()(0);
  double s1 = svd.singularValues()(1);
  if (s1 < 1e-14 * std::max(1.0, s0))
    throw std::runtime_error("ellipsoid alignment: degenerate degree-1 fit");
  out.axis_ratio = s0 / s1;
  out.ambiguous = out.axis_ratio < 1.05;

  Vec3 v1 = svd.matrixV().col(0), u1 = svd.matrixU().col(0);
  Vec3 v2 = svd.matrixV().col(1), u2 = svd.matrixU().col(1);
  // Resolve each axis sign by the world direction's dot product with a fixed
  // axis cycle, so mirrored inputs align consistently.
  auto fix_sign = [](Vec3& v, Vec3& u, int first_axis) {
    for (int a = 0; a < 3; ++a) {
      double d = u[(first_axis + a) % 3];
      if (std::abs(d) > 1e-12) {
        if (d < 0.0) {
          v = -v;
          u = -u;
        }
        return;
      }
    }
  };
  fix_sign(v1, u1, 2);  // axis sent to parameter +z, prefer world +z
  fix_sign(v2, u2, 0);  // axis sent to parameter +x, prefer world +x
  Vec3 v3 = v1.cross(v2);
  Mat3 rot;
  rot.row(0) = v2.transpose();
  rot.row(1) = v3.transpose();
  rot.row(2) = v1.transpose();
  out.rotation = rot;

  for (int i = 0; i < param.angles.rows(); ++i) {
    Vec3 u = rot * direction(param.angles(i, 0), param.angles(i, 1));
    angles_from_direction(u.normalized(), param.angles(i, 0), param.angles(i, 1));
  }
  return out;
}

std::complex<double> evaluate_ylm(int l, int m, double theta, double phi) {
  check_lm(l, m);
  const int am = std::abs(m);
  double base = ylm_norm(l, am) * assoc_legendre(l, am, std::cos(theta));
  std::complex<double> y = base * std::polar(1.0, am * phi);
  if (m >= 0) return y;
  double sign = (am % 2 == 0) ? 1.0 : -1.0;
  return sign * std::conj(y);
}

double real_ylm(int l, int m, double theta, double phi) {
  check_lm(l, m);
  const int am = std::abs(m);
  double base = ylm_norm(l, am) * assoc_legendre(l, am, std::cos(theta));
  if (m == 0) return base;
  constexpr double kSqrt2 = 1.4142135623730951;
  return m > 0 ? kSqrt2 * base * std::cos(m * phi) : kSqrt2 * base * std::sin(am * phi);
}

SpharmFit fit_spharm(const SphericalParam& param, const TriangleMesh& mesh, int l_max) {
  if (l_max < 0) throw std::invalid_argument("fit_spharm: l_max must be non-negative");
  if (param.angles.rows() != mesh.n_vertices())
    throw std::invalid_argument("fit_spharm: parameterization does not match the mesh");
  const int nb = (l_max + 1) * (l_max + 1);
  if (mesh.n_vertices() < nb)
    throw std::invalid_argument("fit_spharm: fewer vertices than basis functions");
  MatX a = design_matrix(param.angles, l_max);
  Eigen::BDCSVD<MatX> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SpharmFit fit;
  fit.l_max = l_max;
  double smin = svd.singularValues()(nb - 1);
  fit.condition = smin > 0.0 ? svd.singularValues()(0) / smin : std::numeric_limits<double>::infinity();
  fit.coeffs = svd.solve(mesh.vertices);
  fit.residual_rms = std::sqrt((a * fit.coeffs - mesh.vertices).rowwise().squaredNorm().mean());
  return fit;
}

Vec3 evaluate_spharm(const SpharmFit& fit, double theta, double phi) {
  VecX basis((fit.l_max + 1) * (fit.l_max + 1));
  for (int l = 0; l <= fit.l_max; ++l)
    for (int m = -l; m <= l; ++m) basis(l * l + m + l) = real_ylm(l, m, theta, phi);
  return fit.coeffs.transpose() * basis;
}

Points sample_icosahedron_directions(int level) {
  TriangleMesh ico = make_icosphere(level, 1.0, Vec3::Zero());
  Points dirs = ico.vertices;
  for (int i = 0; i < dirs.rows(); ++i) dirs.row(i).normalize();
  return dirs;
}

CorrespondenceModel correspond_spherical(const Ensemble& ensemble, const SpharmConfig& config,
                                         std::map<std::string, SpharmReport>* reports) {
  if (config.l_max < 1) throw std::invalid_argument("correspond_spherical: l_max must be at least 1");
  if (config.sample_level < 0) throw std::invalid_argument("correspond_spherical: sample_level must be non-negative");
  Points dirs = sample_icosahedron_directions(config.sample_level);
  CorrespondenceModel model;
  model.method = "spherical";
  for (const ShapeSample& sample : ensemble.samples) {
    SphericalParam param;
    try {
      param = spherical_parameterize(sample.mesh);
    } catch (const std::exception& e) {
      throw std::runtime_error("sample '" + sample.id + "': " + e.what());
    }
    EllipsoidAlignment align = ellipsoid_align(param, sample.mesh);
    SpharmFit fit = fit_spharm(param, sample.mesh, config.l_max);
    if (fit.condition > config.max_condition)
      throw std::runtime_error("sample '" + sample.id + "': ill-conditioned harmonic fit (condition " +
                               std::to_string(fit.condition) + ")");
    Points pts(dirs.rows(), 3);
    for (int i = 0; i < dirs.rows(); ++i) {
      double theta, phi;
      angles_from_direction(dirs.row(i), theta, phi);
      pts.row(i) = evaluate_spharm(fit, theta, phi);
    }
    model.ids.push_back(sample.id);
    model.points.push_back(std::move(pts));
    if (reports) {
      SpharmReport rep;
      rep.area_distortion = std::abs(param.area_ratio - 1.0);
      rep.residual_rms = fit.residual_rms;
      rep.condition = fit.condition;
      rep.ambiguous_alignment = align.ambiguous;
      (*reports)[sample.id] = rep;
    }
  }
  model.validate();
  return model;
}

void write_spharm_reports(const std::map<std::string, SpharmReport>& reports,
                          const std::string& path) {
  nlohmann::json j;
  for (const auto& [id, rep] : reports) {
    j["samples"][id] = {{"area_distortion", rep.area_distortion},
                        {"residual_rms", rep.residual_rms},
                        {"condition", rep.condition},
                        {"ambiguous_alignment", rep.ambiguous_alignment}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace ssm
