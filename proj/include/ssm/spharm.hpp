#pragma once

#include <complex>
#include <map>
#include <string>

#include "ssm/ensemble.hpp"
#include "ssm/mesh.hpp"
#include "ssm/pdm.hpp"
#include "ssm/types.hpp"

namespace ssm {

// Per-vertex spherical coordinates from radial projection about the surface
// centroid. Requires a watertight genus-0 mesh that is star-shaped about its
// centroid; folding is detected by comparing the projected area against 4*pi.
struct SphericalParam {
  MatX angles;        // V x 2, (theta, phi) with theta in [0, pi]
  Vec3 center;        // projection center
  double area_ratio;  // sum of |projected triangle solid angles| / (4*pi)
};
SphericalParam spherical_parameterize(const TriangleMesh& mesh);

// Rotates the parameter sphere so the largest ellipsoid axis (from a
// degree-1 fit) maps to parameter +z and the second axis to +x, with signs
// fixed by positive dot products with the world axes. Flags near-spherical
// shapes where the leading axes are within 5% of each other.
struct EllipsoidAlignment {
  Mat3 rotation = Mat3::Identity();  // applied to parameter directions
  double axis_ratio = 1.0;           // largest / second singular value
  bool ambiguous = false;
};
EllipsoidAlignment ellipsoid_align(SphericalParam& param, const TriangleMesh& mesh);

// Complex spherical harmonic with Condon-Shortley phase.
std::complex<double> evaluate_ylm(int l, int m, double theta, double phi);

// Real orthonormal basis used for fitting: m = 0 zonal, m > 0 cosine,
// m < 0 sine terms.
double real_ylm(int l, int m, double theta, double phi);

// Least-squares expansion of the surface in the real basis, one coefficient
// column per world coordinate. Basis column order is l*l + (m + l).
struct SpharmFit {
  int l_max = 0;
  MatX coeffs;                // (l_max+1)^2 x 3
  double residual_rms = 0.0;  // 3D residual over the fitted vertices
  double condition = 0.0;     // of the design matrix
};
SpharmFit fit_spharm(const SphericalParam& param, const TriangleMesh& mesh, int l_max);

Vec3 evaluate_spharm(const SpharmFit& fit, double theta, double phi);

// Unit directions of an icosphere subdivision: 10*4^level + 2 points.
Points sample_icosahedron_directions(int level);

struct SpharmConfig {
  int l_max = 12;
  int sample_level = 3;
  double max_condition = 1e12;
};

struct SpharmReport {
  double area_distortion = 0.0;  // |area_ratio - 1|
  double residual_rms = 0.0;
  double condition = 0.0;
  bool ambiguous_alignment = false;
};

// Fits every shape independently and evaluates the fits at shared sample
// directions; per-shape diagnostics are returned through reports.
CorrespondenceModel correspond_spherical(const Ensemble& ensemble, const SpharmConfig& config,
                                         std::map<std::string, SpharmReport>* reports = nullptr);

void write_spharm_reports(const std::map<std::string, SpharmReport>& reports,
                          const std::string& path);

}  // namespace ssm
