#include "ssm/contour.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ssm {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct PlaneBasis {
  Vec3 centroid;
  Vec3 e1, e2, normal;
};

// PCA plane with deterministic sign conventions.
PlaneBasis pca_plane(const Points& points) {
  if (points.rows() < 3) throw std::invalid_argument("plane fit: need at least three points");
  PlaneBasis basis;
  basis.centroid = points.colwise().mean();
  Mat3 cov = Mat3::Zero();
  for (int i = 0; i < points.rows(); ++i) {
    Vec3 d = Vec3(points.row(i)) - basis.centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  auto fix_sign = [](Vec3 v) {
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    return v[arg] < 0.0 ? Vec3(-v) : v;
  };
  basis.e1 = fix_sign(eig.eigenvectors().col(2));
  basis.normal = fix_sign(eig.eigenvectors().col(0));
  basis.e2 = basis.normal.cross(basis.e1);
  return basis;
}

}  // namespace

Vec3 ThinPlateSpline::apply(const Vec3& p) const {
  Vec3 out = affine.row(0).transpose();
  out += affine.bottomRows(3).transpose() * p;
  for (int i = 0; i < controls.rows(); ++i)
    out += (p - Vec3(controls.row(i))).norm() * Vec3(weights.row(i));
  return out;
}

Points ThinPlateSpline::apply(const Points& p) const {
  Points out(p.rows(), 3);
  for (int i = 0; i < p.rows(); ++i) out.row(i) = apply(Vec3(p.row(i)));
  return out;
}

ThinPlateSpline fit_tps(const Points& source, const Points& target) {
  const int n = static_cast<int>(source.rows());
  if (n < 4) throw std::invalid_argument("fit_tps: need at least four control points");
  if (target.rows() != n) throw std::invalid_argument("fit_tps: source/target point counts differ");
  MatX system = MatX::Zero(n + 4, n + 4);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) system(i, j) = (source.row(i) - source.row(j)).norm();
  for (int i = 0; i < n; ++i) {
    system(i, n) = 1.0;
    system(n, i) = 1.0;
    for (int d = 0; d < 3; ++d) {
      system(i, n + 1 + d) = source(i, d);
      system(n + 1 + d, i) = source(i, d);
    }
  }
  MatX rhs = MatX::Zero(n + 4, 3);
  rhs.topRows(n) = target;

  ThinPlateSpline tps;
  tps.controls = source;
  MatX sol = system.partialPivLu().solve(rhs);
  double residual = (system * sol - rhs).norm() / (1.0 + rhs.norm());
  if (!sol.allFinite() || residual > 1e-8) {
    // Singular bordered system (e.g. coplanar controls): ridge the kernel
    // block and solve in the least-squares sense.
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, system.row(i).head(n).maxCoeff());
    MatX ridged = system;
    ridged.topLeftCorner(n, n).diagonal().array() += 1e-10 * std::max(1.0, scale);
    sol = ridged.completeOrthogonalDecomposition().solve(rhs);
    tps.ridged = true;
  }
  tps.weights = sol.topRows(n);
  tps.affine = sol.bottomRows(4);
  return tps;
}

double EllipseFit::area() const { return kPi * semi_major * semi_minor; }

double EllipseFit::circumference() const {
  double a = semi_major, b = semi_minor;
  double h = (a - b) / (a + b);
  h *= h;
  return kPi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

EllipseFit fit_ellipse(const Points& contour) {
  const int n = static_cast<int>(contour.rows());
  if (n < 6) throw std::invalid_argument("fit_ellipse: need at least six points");
  PlaneBasis basis = pca_plane(contour);
  VecX u(n), v(n);
  for (int i = 0; i < n; ++i) {
    Vec3 d = Vec3(contour.row(i)) - basis.centroid;
    u(i) = d.dot(basis.e1);
    v(i) = d.dot(basis.e2);
  }

  // Direct least-squares conic fit with the ellipse constraint 4AC - B^2 = 1,
  // in the numerically stable partitioned form.
  MatX d1(n, 3), d2(n, 3);
  for (int i = 0; i < n; ++i) {
    d1(i, 0) = u(i) * u(i);
    d1(i, 1) = u(i) * v(i);
    d1(i, 2) = v(i) * v(i);
    d2(i, 0) = u(i);
    d2(i, 1) = v(i);
    d2(i, 2) = 1.0;
  }
  Mat3 s1 = d1.transpose() * d1;
  Mat3 s2 = d1.transpose() * d2;
  Mat3 s3 = d2.transpose() * d2;
  Eigen::FullPivLU<Mat3> lu3(s3);
  if (!lu3.isInvertible()) throw std::invalid_argument("fit_ellipse: degenerate point configuration");
  Mat3 t = -lu3.solve(s2.transpose());
  Mat3 m = s1 + s2 * t;
  Mat3 reduced;
  reduced.row(0) = m.row(2) / 2.0;
  reduced.row(1) = -m.row(1);
  reduced.row(2) = m.row(0) / 2.0;
  Eigen::EigenSolver<Mat3> eig(reduced);
  Vec3 a1 = Vec3::Zero();
  bool found = false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(eig.eigenvalues()(i).imag()) > 1e-9 * (1.0 + std::abs(eig.eigenvalues()(i).real())))
      continue;
    Vec3 cand = eig.eigenvectors().col(i).real();
    double constraint = 4.0 * cand(0) * cand(2) - cand(1) * cand(1);
    if (constraint > 0.0) {
      a1 = cand / std::sqrt(constraint);
      found = true;
    }
  }
  if (!found) throw std::invalid_argument("fit_ellipse: points do not determine an ellipse");
  Vec3 a2 = t * a1;
  if (a1(0) < 0.0) {  // the conic is sign-invariant; keep the quadratic part positive definite
    a1 = -a1;
    a2 = -a2;
  }
  double ca = a1(0), cb = a1(1), cc = a1(2), cd = a2(0), ce = a2(1), cf = a2(2);

  Eigen::Matrix2d quad;
  quad << ca, cb / 2.0, cb / 2.0, cc;
  Eigen::Vector2d center2 = quad.fullPivLu().solve(Eigen::Vector2d(-cd / 2.0, -ce / 2.0));
  double g = ca * center2.x() * center2.x() + cb * center2.x() * center2.y() +
             cc * center2.y() * center2.y() + cd * center2.x() + ce * center2.y() + cf;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qe(quad);
  double k_small = qe.eigenvalues()(0), k_large = qe.eigenvalues()(1);
  if (!(k_small > 0.0 && -g > 0.0))
    throw std::invalid_argument("fit_ellipse: points do not determine an ellipse");

  EllipseFit fit;
  fit.semi_major = std::sqrt(-g / k_small);
  fit.semi_minor = std::sqrt(-g / k_large);
  Eigen::Vector2d dir_major = qe.eigenvectors().col(0);
  Eigen::Vector2d dir_minor = qe.eigenvectors().col(1);
  fit.center = basis.centroid + center2.x() * basis.e1 + center2.y() * basis.e2;
  fit.major_axis = (dir_major.x() * basis.e1 + dir_major.y() * basis.e2).normalized();
  fit.minor_axis = (dir_minor.x() * basis.e1 + dir_minor.y() * basis.e2).normalized();
  fit.plane_normal = basis.normal;
  return fit;
}

double plane_angle_deg(const Vec3& normal_a, const Vec3& normal_b) {
  double la = normal_a.norm(), lb = normal_b.norm();
  if (la < 1e-300 || lb < 1e-300) throw std::invalid_argument("plane_angle_deg: zero normal");
  double c = std::clamp(std::abs(normal_a.dot(normal_b)) / (la * lb), 0.0, 1.0);
  return std::acos(c) * 180.0 / kPi;
}

namespace {

struct TripleFrame {
  Vec3 origin;
  Vec3 e1, e2, e3;
};

bool triple_frame(const Points& pts, int i, int j, int k, TripleFrame& frame) {
  frame.origin = pts.row(i);
  Vec3 a = Vec3(pts.row(j)) - frame.origin;
  Vec3 b = Vec3(pts.row(k)) - frame.origin;
  double la = a.norm();
  if (la < 1e-12) return false;
  frame.e1 = a / la;
  Vec3 c = frame.e1.cross(b);
  double lc = c.norm();
  if (lc < 1e-9 * std::max(1.0, b.norm())) return false;  // collinear
  frame.e3 = c / lc;
  frame.e2 = frame.e3.cross(frame.e1);
  return true;
}

}  // namespace

ContourAnchors anchor_contour(const Points& contour, const Points& correspondences) {
  const int nc = static_cast<int>(contour.rows());
  const int np = static_cast<int>(correspondences.rows());
  if (np < 3) throw std::invalid_argument("anchor_contour: need at least three correspondence points");
  ContourAnchors anchors;
  anchors.triples.resize(nc, 3);
  anchors.local.resize(nc, 3);
  for (int c = 0; c < nc; ++c) {
    Vec3 x = contour.row(c);
    std::vector<int> order(np);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      double da = (Vec3(correspondences.row(a)) - x).squaredNorm();
      double db = (Vec3(correspondences.row(b)) - x).squaredNorm();
      if (da != db) return da < db;
      return a < b;
    });
    bool placed = false;
    TripleFrame frame;
    for (size_t j = 1; j < order.size() && !placed; ++j) {
      for (size_t k = j + 1; k < order.size() && !placed; ++k) {
        if (triple_frame(correspondences, order[0], order[j], order[k], frame)) {
          anchors.triples.row(c) << order[0], order[static_cast<int>(j)], order[static_cast<int>(k)];
          Vec3 d = x - frame.origin;
          anchors.local.row(c) << d.dot(frame.e1), d.dot(frame.e2), d.dot(frame.e3);
          placed = true;
        }
      }
    }
    if (!placed) throw std::runtime_error("anchor_contour: correspondence points are collinear");
  }
  return anchors;
}

Points propagate_contour(const ContourAnchors& anchors, const Points& correspondences) {
  const int nc = static_cast<int>(anchors.triples.rows());
  Points out(nc, 3);
  for (int c = 0; c < nc; ++c) {
    TripleFrame frame;
    if (!triple_frame(correspondences, anchors.triples(c, 0), anchors.triples(c, 1),
                      anchors.triples(c, 2), frame))
      throw std::runtime_error("propagate_contour: anchor triple degenerated on the target shape");
    out.row(c) = frame.origin + anchors.local(c, 0) * frame.e1 + anchors.local(c, 1) * frame.e2 +
                 anchors.local(c, 2) * frame.e3;
  }
  return out;
}

ContourMeasurements measure_contour(const Points& contour, const Vec3& septum_normal) {
  EllipseFit fit = fit_ellipse(contour);
  ContourMeasurements m;
  m.max_mm = 2.0 * fit.semi_major;
  m.min_mm = 2.0 * fit.semi_minor;
  m.area_mm2 = fit.area();
  m.circumference_mm = fit.circumference();
  m.angle_deg = plane_angle_deg(fit.plane_normal, septum_normal);
  return m;
}

}  // namespace ssm
