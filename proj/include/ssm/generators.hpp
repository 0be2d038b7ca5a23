#pragma once

#include <cstdint>
#include <utility>

#include "ssm/ensemble.hpp"

namespace ssm {

// Deterministic per-sample seed derivation, so parallel and serial
// generation agree exactly.
uint64_t split_seed(uint64_t seed, uint64_t index);

struct BoxBumpParams {
  int n = 30;
  uint64_t seed = 0;
  double bump_lo = 0.1;  // fraction interval for the bump position
  double bump_hi = 0.9;
  double radius = 0.6;   // hemisphere radius (box is fixed 4x4x4)
};

// Boxes identical up to a hemispherical bump sliding along the midline of
// the top face. The only varying quantity is the bump position; every other
// vertex is bit-identical across samples.
std::pair<Ensemble, GroundTruth> gen_box_bump(const BoxBumpParams& params);

// One tube-like pouch on an ellipsoidal body; the surface is a radial graph
// about the body center (star-shaped by construction) and carries its exact
// elliptical ostium ring as a row of mesh vertices.
struct AppendageSpec {
  double length = 20.0;     // pouch elongation beyond the ostium plane (mm)
  double bend_deg = 20.0;   // tilt of the ostium plane normal vs the septum normal
  double ostium_a = 5.0;    // ostium semi-axes (mm)
  double ostium_b = 4.0;
  double shape_k = 2.0;     // silhouette exponent: higher = fuller tip
  double lobe = 0.0;        // relative amplitude of azimuthal lobes
  int lobe_count = 0;
  double tip_skew_deg = 8.0;  // extra tilt of the pouch tip (bent look)
};

// Builds one appendage mesh; optionally reports the exact 64-point ostium
// contour and its plane.
TriangleMesh make_appendage(const AppendageSpec& spec, Points* contour = nullptr,
                            Vec3* plane_normal = nullptr, Vec3* plane_point = nullptr);

struct AppendageParams {
  int n = 40;
  uint64_t seed = 0;
  double jitter = 0.06;  // relative within-family parameter spread
};

// Four parameter families (sample i belongs to family i mod 4 + 1), each a
// jittered variant of a family-mean AppendageSpec. Ground truth carries the
// generative parameters, family labels, and exact ostium contours.
std::pair<Ensemble, GroundTruth> gen_appendage(const AppendageParams& params);

// The family-mean spec, family in 1..4.
AppendageSpec appendage_family_mean(int family);

}  // namespace ssm
