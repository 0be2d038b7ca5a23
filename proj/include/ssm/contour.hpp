#pragma once

#include "ssm/types.hpp"

namespace ssm {

// 3D thin-plate spline interpolant with kernel U(r) = r and an affine part,
// solved from the bordered system. If the exact system is singular (e.g.
// coplanar controls) a small ridge is added and `ridged` is set.
struct ThinPlateSpline {
  Points controls;
  MatX weights;  // n x 3 kernel weights
  MatX affine;   // 4 x 3: constant row then the linear map
  bool ridged = false;

  Vec3 apply(const Vec3& p) const;
  Points apply(const Points& p) const;
};
ThinPlateSpline fit_tps(const Points& source, const Points& target);

// Least-squares ellipse through points near a plane: the points are projected
// onto their PCA plane and a direct conic fit (ellipse-specific constraint)
// is solved in 2D.
struct EllipseFit {
  Vec3 center = Vec3::Zero();
  Vec3 major_axis = Vec3::Zero();  // unit direction of the major axis
  Vec3 minor_axis = Vec3::Zero();
  Vec3 plane_normal = Vec3::Zero();
  double semi_major = 0.0;
  double semi_minor = 0.0;

  double area() const;
  double circumference() const;  // Ramanujan's second approximation
};
EllipseFit fit_ellipse(const Points& contour);

// Angle between two planes in degrees, by unit normals, always in [0, 90].
double plane_angle_deg(const Vec3& normal_a, const Vec3& normal_b);

// Contour carried by a correspondence point set: each contour point is
// expressed in the local frame of its nearest non-degenerate triple of
// correspondence points, so it can be re-expressed on another shape's
// corresponding triple.
struct ContourAnchors {
  Eigen::Matrix<int, Eigen::Dynamic, 3> triples;  // per contour point
  Points local;                                   // coordinates in the triple frame
};
ContourAnchors anchor_contour(const Points& contour, const Points& correspondences);
Points propagate_contour(const ContourAnchors& anchors, const Points& correspondences);

// The five clinical measurements derived from an ostium contour and the
// septum plane it is referenced against.
struct ContourMeasurements {
  double max_mm = 0.0;   // major diameter
  double min_mm = 0.0;   // minor diameter
  double area_mm2 = 0.0;
  double circumference_mm = 0.0;
  double angle_deg = 0.0;
};
ContourMeasurements measure_contour(const Points& contour, const Vec3& septum_normal);

}  // namespace ssm
