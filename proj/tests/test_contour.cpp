#include "doctest.h"

#include <cmath>

#include "ssm/contour.hpp"

using namespace ssm;

namespace {

// Deterministic scattered points via a low-discrepancy-ish recurrence.
Points scatter(int n, double scale, double shift) {
  Points p(n, 3);
  double x = 0.37;
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      x = std::fmod(x * 997.0 + 0.1234567, 1.0);
      p(i, d) = scale * (x - 0.5) + shift;
    }
  }
  return p;
}

Points ellipse_points(const Vec3& center, const Vec3& u, const Vec3& v, double a, double b,
                      int n) {
  Points p(n, 3);
  for (int i = 0; i < n; ++i) {
    double t = 2.0 * M_PI * i / n;
    p.row(i) = (center + a * std::cos(t) * u + b * std::sin(t) * v).transpose();
  }
  return p;
}

// Perimeter by dense Simpson integration of the arc length.
double ellipse_perimeter_quadrature(double a, double b) {
  const int n = 20000;  // even
  auto f = [&](double t) {
    double s = std::sin(t), c = std::cos(t);
    return std::sqrt(a * a * s * s + b * b * c * c);
  };
  double h = 2.0 * M_PI / n;
  double sum = f(0.0) + f(2.0 * M_PI);
  for (int i = 1; i < n; ++i) sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

TEST_CASE("thin-plate spline interpolates its controls to 1e-9") {
  Points source = scatter(12, 10.0, 0.0);
  Points target = scatter(12, 8.0, 2.0);
  ThinPlateSpline tps = fit_tps(source, target);
  CHECK_FALSE(tps.ridged);
  Points back = tps.apply(source);
  CHECK((back - target).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("thin-plate spline reproduces an affine map exactly") {
  Points source = scatter(10, 6.0, 0.0);
  Mat3 A;
  A << 1.2, 0.1, -0.3, 0.0, 0.9, 0.2, 0.4, -0.1, 1.1;
  Vec3 t(1.0, -2.0, 0.5);
  Points target = source * A.transpose();
  target.rowwise() += t.transpose();
  ThinPlateSpline tps = fit_tps(source, target);
  // probe away from the controls: an affine field has zero bending energy
  Points probe = scatter(20, 12.0, 1.0);
  Points expected = probe * A.transpose();
  expected.rowwise() += t.transpose();
  CHECK((tps.apply(probe) - expected).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("thin-plate spline falls back to a ridge for coplanar controls") {
  Points source = scatter(9, 5.0, 0.0);
  source.col(2).setZero();  // exactly coplanar
  Points target = source;
  target.col(0) = source.col(0) * 1.1;
  ThinPlateSpline tps = fit_tps(source, target);
  Points back = tps.apply(source);
  CHECK((back - target).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("thin-plate spline rejects bad input") {
  Points a = scatter(3, 1.0, 0.0);
  Points b = scatter(4, 1.0, 0.0);
  CHECK_THROWS(fit_tps(a, b));                       // size mismatch
  CHECK_THROWS(fit_tps(scatter(2, 1.0, 0.0), scatter(2, 1.0, 0.0)));  // too few points
}

TEST_CASE("ellipse fit recovers an exact tilted ellipse to 1e-6") {
  Vec3 n = Vec3(0.3, -0.2, 1.0).normalized();
  Vec3 u = Vec3(1.0, 0.4, -0.1).cross(n).normalized();
  Vec3 v = n.cross(u);
  Vec3 center(3.0, -1.0, 2.0);
  const double a = 5.0, b = 3.0;
  EllipseFit fit = fit_ellipse(ellipse_points(center, u, v, a, b, 48));

  CHECK((fit.center - center).norm() < 1e-6);
  CHECK(fit.semi_major == doctest::Approx(a).epsilon(1e-6));
  CHECK(fit.semi_minor == doctest::Approx(b).epsilon(1e-6));
  CHECK(std::abs(std::abs(fit.major_axis.dot(u)) - 1.0) < 1e-6);
  CHECK(std::abs(std::abs(fit.minor_axis.dot(v)) - 1.0) < 1e-6);
  CHECK(std::abs(std::abs(fit.plane_normal.dot(n)) - 1.0) < 1e-9);
  CHECK(fit.area() == doctest::Approx(M_PI * a * b).epsilon(1e-6));
}

TEST_CASE("ellipse fit handles a circle") {
  Vec3 u = Vec3::UnitX(), v = Vec3::UnitY();
  EllipseFit fit = fit_ellipse(ellipse_points(Vec3::Zero(), u, v, 2.0, 2.0, 32));
  CHECK(fit.semi_major == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.semi_minor == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fit.area() == doctest::Approx(4.0 * M_PI).epsilon(1e-9));
}

TEST_CASE("Ramanujan circumference within 1e-3 of quadrature") {
  for (auto [a, b] : {std::pair{5.0, 3.0}, {2.0, 1.9}, {10.0, 2.0}, {1.0, 1.0}}) {
    EllipseFit fit = fit_ellipse(ellipse_points(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), a, b, 64));
    double exact = ellipse_perimeter_quadrature(a, b);
    CHECK(std::abs(fit.circumference() - exact) / exact < 1e-3);
  }
}

TEST_CASE("ellipse fit rejects degenerate input") {
  Points line(10, 3);
  for (int i = 0; i < 10; ++i) line.row(i) = Vec3(i, 2.0 * i, 0.0).transpose();
  CHECK_THROWS(fit_ellipse(line));
  CHECK_THROWS(fit_ellipse(Points(3, 3)));  // too few points
}

TEST_CASE("plane angle") {
  CHECK(plane_angle_deg(Vec3::UnitZ(), Vec3::UnitZ()) == doctest::Approx(0.0));
  CHECK(plane_angle_deg(Vec3::UnitZ(), -Vec3::UnitZ()) == doctest::Approx(0.0));
  CHECK(plane_angle_deg(Vec3::UnitZ(), Vec3::UnitX()) == doctest::Approx(90.0));
  Vec3 tilted = (Vec3::UnitZ() + Vec3::UnitX()).normalized();
  CHECK(plane_angle_deg(Vec3::UnitZ(), tilted) == doctest::Approx(45.0).epsilon(1e-12));
}

TEST_CASE("contour anchoring reproduces the contour on the same shape") {
  Points corr = scatter(30, 10.0, 0.0);
  Points contour = ellipse_points(Vec3(1.0, 0.5, 0.2), Vec3::UnitX(), Vec3::UnitY(), 3.0, 2.0, 24);
  ContourAnchors anchors = anchor_contour(contour, corr);
  Points back = propagate_contour(anchors, corr);
  CHECK((back - contour).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("contour anchoring is equivariant under rigid motion") {
  Points corr = scatter(25, 8.0, 0.0);
  Points contour = ellipse_points(Vec3(0.5, -0.3, 1.0), Vec3::UnitX(), Vec3::UnitZ(), 4.0, 2.5, 24);
  ContourAnchors anchors = anchor_contour(contour, corr);

  RigidTransform moved = rotation_about(Vec3(0.2, 1.0, -0.4), 0.8);
  moved.translation = Vec3(5.0, -2.0, 3.0);
  Points corr_moved = moved.apply(corr);
  Points propagated = propagate_contour(anchors, corr_moved);
  Points expected = moved.apply(contour);
  CHECK((propagated - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("contour measurements on a known ellipse") {
  Vec3 n = Vec3::UnitZ();
  Points contour = ellipse_points(Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 5.0, 3.0, 48);
  Vec3 septum = (Vec3::UnitZ() + Vec3::UnitY()).normalized();
  ContourMeasurements m = measure_contour(contour, septum);
  CHECK(m.max_mm == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(m.min_mm == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(m.area_mm2 == doctest::Approx(M_PI * 15.0).epsilon(1e-6));
  double quad = 0.0;
  {
    const int steps = 20000;
    for (int i = 0; i < steps; ++i) {
      double t0 = 2.0 * M_PI * i / steps, t1 = 2.0 * M_PI * (i + 1) / steps;
      Vec3 p0(5.0 * std::cos(t0), 3.0 * std::sin(t0), 0.0);
      Vec3 p1(5.0 * std::cos(t1), 3.0 * std::sin(t1), 0.0);
      quad += (p1 - p0).norm();
    }
  }
  CHECK(std::abs(m.circumference_mm - quad) / quad < 1e-3);
  CHECK(m.angle_deg == doctest::Approx(45.0).epsilon(1e-9));
  (void)n;
}
