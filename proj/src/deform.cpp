#include "ssm/deform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

#include "ssm/sdf.hpp"

namespace ssm {

namespace {

double kernel(const Vec3& x, const Vec3& y, double sigma) {
  return std::exp(-(x - y).squaredNorm() / (sigma * sigma));
}

struct FaceGeom {
  Vec3 centroid;
  Vec3 nvec;    // area-weighted normal, |nvec| = face area
  Vec3 scaled;  // nvec / sqrt(area); pair terms become k * (scaled_a . scaled_b)^2
  double area;
  int v0, v1, v2;
};

std::vector<FaceGeom> face_geometry(const TriangleMesh& mesh) {
  std::vector<FaceGeom> out(mesh.n_faces());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    Vec3i face = mesh.faces.row(f);
    Vec3 a = mesh.vertex(face[0]), b = mesh.vertex(face[1]), c = mesh.vertex(face[2]);
    FaceGeom& g = out[f];
    g.centroid = (a + b + c) / 3.0;
    g.nvec = 0.5 * (b - a).cross(c - a);
    g.area = std::max(g.nvec.norm(), 1e-300);
    g.scaled = g.nvec / std::sqrt(g.area);
    g.v0 = face[0];
    g.v1 = face[1];
    g.v2 = face[2];
  }
  return out;
}

// Cell list over face centroids with cell size 6 * sigma_w; pairs further
// apart than one cell contribute below 3e-16 of the kernel and are skipped.
class CellList {
 public:
  CellList() = default;
  CellList(const std::vector<FaceGeom>& faces, double cell) : cell_(cell) {
    for (int i = 0; i < static_cast<int>(faces.size()); ++i)
      cells_[key(faces[i].centroid)].push_back(i);
  }

  template <typename F>
  void for_neighbors(const Vec3& p, F&& fn) const {
    int cx = coord(p.x()), cy = coord(p.y()), cz = coord(p.z());
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (int j : it->second) fn(j);
        }
  }

 private:
  int coord(double v) const { return static_cast<int>(std::floor(v / cell_)); }
  static int64_t pack(int x, int y, int z) {
    return (int64_t(x + 1048576) << 42) | (int64_t(y + 1048576) << 21) | int64_t(z + 1048576);
  }
  int64_t key(const Vec3& p) const { return pack(coord(p.x()), coord(p.y()), coord(p.z())); }

  double cell_ = 1.0;
  std::unordered_map<int64_t, std::vector<int>> cells_;
};

double product_impl(const std::vector<FaceGeom>& fa, const std::vector<FaceGeom>& fb,
                    const CellList& bins, double sigma_w) {
  double total = 0.0;
  const double s2 = sigma_w * sigma_w;
  for (const FaceGeom& a : fa) {
    double sum = 0.0;
    bins.for_neighbors(a.centroid, [&](int j) {
      const FaceGeom& b = fb[j];
      double k = std::exp(-(a.centroid - b.centroid).squaredNorm() / s2);
      double w = a.nvec.dot(b.nvec);
      sum += k * w * w / (a.area * b.area);
    });
    total += sum;
  }
  return total;
}

// d<A,B>/d(vertices of A) with B held fixed; for <A,A> the full derivative
// is twice this by symmetry of the pairwise terms.
Points product_grad_first(const TriangleMesh& a, const std::vector<FaceGeom>& fa,
                          const std::vector<FaceGeom>& fb, const CellList& bins, double sigma_w) {
  Points grad = Points::Zero(a.n_vertices(), 3);
  const double s2 = sigma_w * sigma_w;
  for (const FaceGeom& fga : fa) {
    Vec3 dc = Vec3::Zero();  // d(term)/d(centroid of a-face)
    Vec3 dn = Vec3::Zero();  // d(term)/d(area normal of a-face)
    bins.for_neighbors(fga.centroid, [&](int j) {
      const FaceGeom& fgb = fb[j];
      Vec3 diff = fga.centroid - fgb.centroid;
      double k = std::exp(-diff.squaredNorm() / s2);
      double w = fga.nvec.dot(fgb.nvec);
      double t = k * w * w / (fga.area * fgb.area);
      dc += (-2.0 / s2) * t * diff;
      dn += k * (2.0 * w / (fga.area * fgb.area)) * fgb.nvec -
            (t / (fga.area * fga.area)) * fga.nvec;
    });
    Vec3 p0 = a.vertex(fga.v0), p1 = a.vertex(fga.v1), p2 = a.vertex(fga.v2);
    Vec3 ea = p1 - p0, eb = p2 - p0;
    Vec3 bxu = eb.cross(dn), uxa = dn.cross(ea);
    grad.row(fga.v0) += (dc / 3.0 - 0.5 * bxu - 0.5 * uxa).transpose();
    grad.row(fga.v1) += (dc / 3.0 + 0.5 * bxu).transpose();
    grad.row(fga.v2) += (dc / 3.0 + 0.5 * uxa).transpose();
  }
  return grad;
}

struct Trajectory {
  std::vector<Points> z;  // points over time, steps+1 entries
  std::vector<Points> q;  // controls over time
};

Trajectory integrate(const Points& points, const Points& controls, const Points& momenta,
                     double sigma, int steps) {
  if (steps < 1) throw std::invalid_argument("flow: steps must be positive");
  if (controls.rows() != momenta.rows())
    throw std::invalid_argument("flow: one momentum per control point required");
  const double h = 1.0 / steps;
  Trajectory traj;
  traj.z.reserve(steps + 1);
  traj.q.reserve(steps + 1);
  traj.z.push_back(points);
  traj.q.push_back(controls);
  for (int k = 0; k < steps; ++k) {
    Points vz = deformation_field(traj.z[k], traj.q[k], momenta, sigma);
    Points vq = deformation_field(traj.q[k], traj.q[k], momenta, sigma);
    double max_disp = 0.0;
    if (vz.rows() > 0) max_disp = h * vz.rowwise().norm().maxCoeff();
    if (vq.rows() > 0) max_disp = std::max(max_disp, h * vq.rowwise().norm().maxCoeff());
    if (max_disp > sigma)
      throw std::runtime_error("flow: step displacement exceeds the kernel width; increase steps");
    traj.z.push_back(traj.z[k] + h * vz);
    traj.q.push_back(traj.q[k] + h * vq);
  }
  return traj;
}

MatX regularity_kernel(const Points& controls, double sigma) {
  const int p = static_cast<int>(controls.rows());
  MatX k(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) k(i, j) = kernel(controls.row(i), controls.row(j), sigma);
  return k;
}

}  // namespace

Points deformation_field(const Points& x, const Points& controls, const Points& momenta,
                         double sigma) {
  if (controls.rows() != momenta.rows())
    throw std::invalid_argument("deformation_field: one momentum per control point required");
  if (!(sigma > 0.0)) throw std::invalid_argument("deformation_field: sigma must be positive");
  Points v = Points::Zero(x.rows(), 3);
  for (int i = 0; i < x.rows(); ++i) {
    Vec3 xi = x.row(i);
    Vec3 acc = Vec3::Zero();
    for (int j = 0; j < controls.rows(); ++j)
      acc += kernel(xi, Vec3(controls.row(j)), sigma) * Vec3(momenta.row(j));
    v.row(i) = acc;
  }
  return v;
}

FlowResult flow_points(const Points& points, const Points& controls, const Points& momenta,
                       double sigma, int steps) {
  Trajectory traj = integrate(points, controls, momenta, sigma, steps);
  return {traj.z.back(), traj.q.back()};
}

TriangleMesh flow_mesh(const TriangleMesh& mesh, const Points& controls, const Points& momenta,
                       double sigma, int steps) {
  TriangleMesh out = mesh;
  out.vertices = flow_points(mesh.vertices, controls, momenta, sigma, steps).points;
  return out;
}

double varifold_product(const TriangleMesh& a, const TriangleMesh& b, double sigma_w) {
  if (!(sigma_w > 0.0)) throw std::invalid_argument("varifold: sigma_w must be positive");
  auto fa = face_geometry(a);
  auto fb = face_geometry(b);
  CellList bins(fb, 6.0 * sigma_w);
  return product_impl(fa, fb, bins, sigma_w);
}

double varifold_distance2(const TriangleMesh& a, const TriangleMesh& b, double sigma_w) {
  return varifold_product(a, a, sigma_w) - 2.0 * varifold_product(a, b, sigma_w) +
         varifold_product(b, b, sigma_w);
}

AtlasGradients subject_energy_gradients(const TriangleMesh& template_mesh, const Points& controls,
                                        const MatX& momenta, const TriangleMesh& target,
                                        double sigma, double sigma_w, int steps,
                                        double regularity_weight) {
  Trajectory traj = integrate(template_mesh.vertices, controls, momenta, sigma, steps);
  TriangleMesh deformed = template_mesh;
  deformed.vertices = traj.z.back();

  auto fd = face_geometry(deformed);
  auto ft = face_geometry(target);
  CellList bins_d(fd, 6.0 * sigma_w);
  CellList bins_t(ft, 6.0 * sigma_w);
  double dd = product_impl(fd, fd, bins_d, sigma_w);
  double dt = product_impl(fd, ft, bins_t, sigma_w);
  double tt = product_impl(ft, ft, bins_t, sigma_w);

  AtlasGradients out;
  out.data_term = dd - 2.0 * dt + tt;
  MatX kq = regularity_kernel(controls, sigma);
  out.regularity = (momenta.transpose() * kq * momenta).trace();
  out.energy = out.data_term + regularity_weight * out.regularity;

  // d(data)/d(deformed vertices), then pulled back through the Euler steps.
  Points az = 2.0 * product_grad_first(deformed, fd, fd, bins_d, sigma_w) -
              2.0 * product_grad_first(deformed, fd, ft, bins_t, sigma_w);
  Points aq = Points::Zero(controls.rows(), 3);
  MatX gmu = MatX::Zero(momenta.rows(), 3);
  const double h = 1.0 / steps;
  const double s2 = sigma * sigma;
  const int nv = static_cast<int>(template_mesh.vertices.rows());
  const int np = static_cast<int>(controls.rows());
  for (int k = steps - 1; k >= 0; --k) {
    const Points& z = traj.z[k];
    const Points& q = traj.q[k];
    Points az_next = az;
    Points aq_next = aq;
    for (int a = 0; a < nv; ++a) {
      Vec3 za = z.row(a);
      Vec3 aza = az.row(a);
      for (int i = 0; i < np; ++i) {
        Vec3 diff = za - Vec3(q.row(i));
        double g = std::exp(-diff.squaredNorm() / s2);
        double mdot = Vec3(momenta.row(i)).dot(aza);
        Vec3 gg = (2.0 / s2) * g * mdot * diff;
        az_next.row(a) -= h * gg.transpose();   // d(v_z)/d(z) adjoint
        aq_next.row(i) += h * gg.transpose();   // d(v_z)/d(q) adjoint
        gmu.row(i) += h * g * aza.transpose();  // d(v_z)/d(momenta) adjoint
      }
    }
    for (int j = 0; j < np; ++j) {
      Vec3 qj = q.row(j);
      Vec3 aqj = aq.row(j);
      for (int i = 0; i < np; ++i) {
        Vec3 diff = qj - Vec3(q.row(i));
        double g = std::exp(-diff.squaredNorm() / s2);
        double mdot = Vec3(momenta.row(i)).dot(aqj);
        Vec3 gg = (2.0 / s2) * g * mdot * diff;
        aq_next.row(j) -= h * gg.transpose();
        aq_next.row(i) += h * gg.transpose();
        gmu.row(i) += h * g * aqj.transpose();
      }
    }
    az = std::move(az_next);
    aq = std::move(aq_next);
  }
  out.d_momenta = gmu + regularity_weight * 2.0 * kq * momenta;
  out.d_template = az;
  return out;
}

namespace {

double subject_energy(const TriangleMesh& template_mesh, const Points& controls, const MatX& momenta,
                      const TriangleMesh& target, const MatX& kq, double sigma, double sigma_w,
                      int steps, double regularity_weight, double* data_out = nullptr,
                      double* reg_out = nullptr) {
  TriangleMesh deformed = flow_mesh(template_mesh, controls, momenta, sigma, steps);
  double data = varifold_distance2(deformed, target, sigma_w);
  double reg = (momenta.transpose() * kq * momenta).trace();
  if (data_out) *data_out = data;
  if (reg_out) *reg_out = reg;
  return data + regularity_weight * reg;
}

Vec3 ensemble_bbox_diagonal(const Ensemble& ensemble) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const ShapeSample& s : ensemble.samples) {
    auto [mn, mx] = s.mesh.bounding_box();
    lo = lo.cwiseMin(mn);
    hi = hi.cwiseMax(mx);
  }
  return hi - lo;
}

}  // namespace

Atlas estimate_atlas(const Ensemble& ensemble, const TriangleMesh& initial_template,
                     const AtlasConfig& config) {
  if (ensemble.n() < 1) throw std::invalid_argument("estimate_atlas: empty ensemble");
  if (config.control_grid < 2) throw std::invalid_argument("estimate_atlas: control grid needs at least 2 per axis");
  Atlas atlas;
  atlas.template_mesh = initial_template;
  double diag = ensemble_bbox_diagonal(ensemble).norm();
  atlas.sigma = config.sigma > 0.0 ? config.sigma : 0.15 * diag;
  atlas.sigma_w = config.sigma_w > 0.0 ? config.sigma_w : 0.08 * diag;
  atlas.flow_steps = config.flow_steps;
  atlas.regularity_weight = config.regularity_weight;

  auto [lo, hi] = initial_template.bounding_box();
  const int g = config.control_grid;
  atlas.controls.resize(g * g * g, 3);
  for (int ix = 0, row = 0; ix < g; ++ix)
    for (int iy = 0; iy < g; ++iy)
      for (int iz = 0; iz < g; ++iz, ++row) {
        Vec3 t(ix / double(g - 1), iy / double(g - 1), iz / double(g - 1));
        atlas.controls.row(row) = lo + t.cwiseProduct(hi - lo);
      }

  const int n = ensemble.n();
  atlas.ids.resize(n);
  atlas.momenta.assign(n, MatX::Zero(atlas.controls.rows(), 3));
  atlas.data_terms.assign(n, 0.0);
  atlas.regularity_terms.assign(n, 0.0);
  for (int s = 0; s < n; ++s) atlas.ids[s] = ensemble.samples[s].id;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return ensemble.samples[a].id < ensemble.samples[b].id; });

  MatX kq = regularity_kernel(atlas.controls, atlas.sigma);
  std::vector<double> mu_step(n, -1.0);
  double t_step = -1.0;
  double prev_total = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < config.outer_iterations; ++outer) {
    // Momenta pass, each subject independently.
    for (int s : order) {
      const TriangleMesh& target = ensemble.samples[s].mesh;
      for (int it = 0; it < config.momenta_steps; ++it) {
        AtlasGradients gr = subject_energy_gradients(atlas.template_mesh, atlas.controls,
                                                     atlas.momenta[s], target, atlas.sigma,
                                                     atlas.sigma_w, atlas.flow_steps,
                                                     atlas.regularity_weight);
        double gmax = gr.d_momenta.rowwise().norm().maxCoeff();
        if (gmax < 1e-14) break;
        if (mu_step[s] < 0.0) mu_step[s] = 0.05 * atlas.sigma / gmax;
        bool accepted = false;
        for (int trial = 0; trial < 12; ++trial) {
          MatX cand = atlas.momenta[s] - mu_step[s] * gr.d_momenta;
          try {
            double e = subject_energy(atlas.template_mesh, atlas.controls, cand, target, kq,
                                      atlas.sigma, atlas.sigma_w, atlas.flow_steps,
                                      atlas.regularity_weight);
            if (e < gr.energy) {
              atlas.momenta[s] = std::move(cand);
              mu_step[s] *= 1.5;
              accepted = true;
              break;
            }
          } catch (const std::exception&) {
            // unstable flow at this step size, shrink below
          }
          mu_step[s] *= 0.5;
        }
        if (!accepted) break;
      }
    }

    // Template pass: gradient of the summed data terms, momenta fixed.
    for (int it = 0; it < config.template_steps; ++it) {
      Points grad = Points::Zero(atlas.template_mesh.n_vertices(), 3);
      double current = 0.0;
      for (int s : order) {
        AtlasGradients gr = subject_energy_gradients(atlas.template_mesh, atlas.controls,
                                                     atlas.momenta[s], ensemble.samples[s].mesh,
                                                     atlas.sigma, atlas.sigma_w, atlas.flow_steps,
                                                     atlas.regularity_weight);
        grad += gr.d_template;
        current += gr.data_term;
      }
      double gmax = grad.rowwise().norm().maxCoeff();
      if (gmax < 1e-14) break;
      if (t_step < 0.0) t_step = 0.05 * atlas.sigma / gmax;
      bool accepted = false;
      for (int trial = 0; trial < 10; ++trial) {
        TriangleMesh cand = atlas.template_mesh;
        cand.vertices -= t_step * grad;
        double e = 0.0;
        bool valid = true;
        try {
          for (int s : order)
            e += subject_energy(cand, atlas.controls, atlas.momenta[s], ensemble.samples[s].mesh,
                                kq, atlas.sigma, atlas.sigma_w, atlas.flow_steps, 0.0);
        } catch (const std::exception&) {
          valid = false;
        }
        if (valid && e < current) {
          atlas.template_mesh = std::move(cand);
          t_step *= 1.5;
          accepted = true;
          break;
        }
        t_step *= 0.5;
      }
      if (!accepted) break;
    }

    double total = 0.0;
    for (int s : order) {
      double data = 0.0, reg = 0.0;
      subject_energy(atlas.template_mesh, atlas.controls, atlas.momenta[s],
                     ensemble.samples[s].mesh, kq, atlas.sigma, atlas.sigma_w, atlas.flow_steps,
                     atlas.regularity_weight, &data, &reg);
      atlas.data_terms[s] = data;
      atlas.regularity_terms[s] = reg;
      total += data + atlas.regularity_weight * reg;
    }
    atlas.objective = total;
    if (prev_total - total < 1e-8 * (1.0 + std::abs(prev_total))) break;
    prev_total = total;
  }
  return atlas;
}

CorrespondenceModel correspond_deform(const Ensemble& ensemble, const Atlas& atlas, int n_points) {
  const TriangleMesh& tmpl = atlas.template_mesh;
  if (n_points < 1) throw std::invalid_argument("correspond_deform: n_points must be positive");
  if (n_points > tmpl.n_vertices())
    throw std::invalid_argument("correspond_deform: more correspondence points than template vertices");
  if (static_cast<int>(atlas.momenta.size()) != ensemble.n())
    throw std::invalid_argument("correspond_deform: atlas was built on a different ensemble");

  // Farthest-point subset of the template vertices, seeded at the vertex
  // nearest the surface centroid; deterministic ties by lowest index.
  Vec3 centroid = tmpl.surface_centroid();
  int seed_v = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < tmpl.n_vertices(); ++i) {
    double d = (tmpl.vertex(i) - centroid).squaredNorm();
    if (d < best) {
      best = d;
      seed_v = i;
    }
  }
  std::vector<int> chosen = {seed_v};
  VecX mind(tmpl.n_vertices());
  for (int i = 0; i < tmpl.n_vertices(); ++i)
    mind(i) = (tmpl.vertex(i) - tmpl.vertex(seed_v)).squaredNorm();
  while (static_cast<int>(chosen.size()) < n_points) {
    int next = 0;
    double far = -1.0;
    for (int i = 0; i < tmpl.n_vertices(); ++i)
      if (mind(i) > far) {
        far = mind(i);
        next = i;
      }
    chosen.push_back(next);
    for (int i = 0; i < tmpl.n_vertices(); ++i)
      mind(i) = std::min(mind(i), (tmpl.vertex(i) - tmpl.vertex(next)).squaredNorm());
  }
  Points base(n_points, 3);
  for (int i = 0; i < n_points; ++i) base.row(i) = tmpl.vertices.row(chosen[i]);

  CorrespondenceModel model;
  model.method = "deform";
  for (int s = 0; s < ensemble.n(); ++s) {
    model.ids.push_back(ensemble.samples[s].id);
    model.points.push_back(
        flow_points(base, atlas.controls, atlas.momenta[s], atlas.sigma, atlas.flow_steps).points);
  }
  model.validate();
  return model;
}

TriangleMesh build_mean_template(const Ensemble& ensemble, double coarse_spacing) {
  if (ensemble.n() < 1) throw std::invalid_argument("build_mean_template: empty ensemble");
  if (!(coarse_spacing > 0.0)) throw std::invalid_argument("build_mean_template: spacing must be positive");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const ShapeSample& s : ensemble.samples) {
    if (!s.has_sdf) throw std::invalid_argument("build_mean_template: sample '" + s.id + "' has no distance volume");
    lo = lo.cwiseMin(s.sdf.origin);
    Vec3 top = s.sdf.origin + (s.sdf.dims.cast<double>() - Vec3::Ones()) * s.sdf.spacing;
    hi = hi.cwiseMax(top);
  }
  Vec3i dims;
  for (int d = 0; d < 3; ++d)
    dims[d] = std::max(2, static_cast<int>(std::ceil((hi[d] - lo[d]) / coarse_spacing)) + 1);
  SignedDistanceVolume mean = resample_volume(ensemble.samples[0].sdf, dims, coarse_spacing, lo);
  for (int s = 1; s < ensemble.n(); ++s) {
    SignedDistanceVolume v = resample_volume(ensemble.samples[s].sdf, dims, coarse_spacing, lo);
    for (size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += v.values[i];
  }
  for (float& v : mean.values) v /= float(ensemble.n());
  TriangleMesh mesh = extract_level_set(mean, 0.0);
  if (mesh.n_faces() == 0) throw std::runtime_error("build_mean_template: empty level set");
  return mesh;
}

TriangleMesh build_sphere_template(const Ensemble& ensemble, int subdivision_level) {
  if (ensemble.n() < 1) throw std::invalid_argument("build_sphere_template: empty ensemble");
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  for (const ShapeSample& s : ensemble.samples) center += s.mesh.surface_centroid();
  center /= double(ensemble.n());
  for (const ShapeSample& s : ensemble.samples) {
    Vec3 c = s.mesh.surface_centroid();
    double mean_r = 0.0;
    for (int i = 0; i < s.mesh.n_vertices(); ++i) mean_r += (s.mesh.vertex(i) - c).norm();
    radius += mean_r / s.mesh.n_vertices();
  }
  radius /= double(ensemble.n());
  return make_icosphere(subdivision_level, radius, center);
}

void write_atlas(const Atlas& atlas, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_obj(atlas.template_mesh, dir + "/atlas_template.obj");
  nlohmann::json j;
  j["sigma"] = atlas.sigma;
  j["sigma_w"] = atlas.sigma_w;
  j["flow_steps"] = atlas.flow_steps;
  j["regularity_weight"] = atlas.regularity_weight;
  j["objective"] = atlas.objective;
  j["controls"] = nlohmann::json::array();
  for (int i = 0; i < atlas.controls.rows(); ++i)
    j["controls"].push_back({atlas.controls(i, 0), atlas.controls(i, 1), atlas.controls(i, 2)});
  j["subjects"] = nlohmann::json::array();
  for (size_t s = 0; s < atlas.ids.size(); ++s) {
    nlohmann::json sub;
    sub["id"] = atlas.ids[s];
    sub["data_term"] = atlas.data_terms[s];
    sub["regularity_term"] = atlas.regularity_terms[s];
    sub["momenta"] = nlohmann::json::array();
    for (int i = 0; i < atlas.momenta[s].rows(); ++i)
      sub["momenta"].push_back({atlas.momenta[s](i, 0), atlas.momenta[s](i, 1), atlas.momenta[s](i, 2)});
    j["subjects"].push_back(std::move(sub));
  }
  std::ofstream out(dir + "/atlas.json");
  if (!out) throw std::runtime_error("cannot open '" + dir + "/atlas.json' for writing");
  out << j.dump(2) << '\n';
}

Atlas read_atlas(const std::string& dir) {
  Atlas atlas;
  atlas.template_mesh = read_obj(dir + "/atlas_template.obj");
  std::ifstream in(dir + "/atlas.json");
  if (!in) throw std::runtime_error("cannot open '" + dir + "/atlas.json'");
  nlohmann::json j;
  try {
    in >> j;
    atlas.sigma = j.at("sigma").get<double>();
    atlas.sigma_w = j.at("sigma_w").get<double>();
    atlas.flow_steps = j.at("flow_steps").get<int>();
    atlas.regularity_weight = j.at("regularity_weight").get<double>();
    atlas.objective = j.at("objective").get<double>();
    const auto& ctrl = j.at("controls");
    atlas.controls.resize(ctrl.size(), 3);
    for (size_t i = 0; i < ctrl.size(); ++i)
      for (int d = 0; d < 3; ++d) atlas.controls(i, d) = ctrl[i][d].get<double>();
    for (const auto& sub : j.at("subjects")) {
      atlas.ids.push_back(sub.at("id").get<std::string>());
      atlas.data_terms.push_back(sub.at("data_term").get<double>());
      atlas.regularity_terms.push_back(sub.at("regularity_term").get<double>());
      const auto& mom = sub.at("momenta");
      MatX m(mom.size(), 3);
      for (size_t i = 0; i < mom.size(); ++i)
        for (int d = 0; d < 3; ++d) m(i, d) = mom[i][d].get<double>();
      atlas.momenta.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed atlas file '" + dir + "/atlas.json': " + e.what());
  }
  return atlas;
}

}  // namespace ssm
