#include "ssm/generators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ssm {

uint64_t split_seed(uint64_t seed, uint64_t index) {
  // splitmix64 finalizer over the combined value
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::string sample_id(int i) {
  std::ostringstream name;
  name << "sample_" << (i < 100 ? (i < 10 ? "00" : "0") : "") << i;
  return name.str();
}

// ---------------------------------------------------------------------------
// box-bump generator

constexpr double kHalf = 2.0;     // box is [-2,2]^3
constexpr int kDiv = 16;          // grid divisions per box edge
constexpr int kRing = 64;         // points on each top-face ring
constexpr int kCapRows = 8;       // latitude rows of the bump cap

double lattice(int k) { return -kHalf + 0.25 * k; }  // exact multiples of 1/4

struct MeshBuilder {
  std::map<std::array<double, 3>, int> index;  // welds bit-identical positions
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;

  int vertex(double x, double y, double z) {
    auto [it, inserted] = index.try_emplace({x, y, z}, static_cast<int>(verts.size()));
    if (inserted) verts.emplace_back(x, y, z);
    return it->second;
  }
  void tri(int a, int b, int c) { tris.push_back({a, b, c}); }
  void quad(int a, int b, int c, int d) {
    tri(a, b, c);
    tri(a, c, d);
  }
  TriangleMesh mesh() const {
    TriangleMesh m;
    m.vertices.resize(static_cast<int>(verts.size()), 3);
    for (std::size_t v = 0; v < verts.size(); ++v) m.vertices.row(v) = verts[v];
    m.faces.resize(static_cast<int>(tris.size()), 3);
    for (std::size_t f = 0; f < tris.size(); ++f)
      for (int c = 0; c < 3; ++c) m.faces(static_cast<int>(f), c) = tris[f][c];
    return m;
  }
};

// One axis-aligned box face as a welded grid. `axis` is the face normal
// direction, `sign` its orientation; (u,v) are chosen so u x v = outward.
void emit_box_face(MeshBuilder& b, int axis, int sign) {
  int u = (axis + 1) % 3, v = (axis + 2) % 3;
  if (sign < 0) std::swap(u, v);  // flips winding for the -axis face
  for (int r = 0; r < kDiv; ++r) {
    for (int s = 0; s < kDiv; ++s) {
      auto corner = [&](int du, int dv) {
        double p[3];
        p[axis] = sign * kHalf;
        p[u] = lattice(r + du);
        p[v] = lattice(s + dv);
        return b.vertex(p[0], p[1], p[2]);
      };
      b.quad(corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1));
    }
  }
}

// 64 points walking a square of half-side `h` around (cx, cy) counter-
// clockwise, starting at the right mid-side point (cx+h, cy). 16 uniform
// steps per side.
std::vector<std::array<double, 2>> square_ring(double cx, double cy, double h) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(kRing);
  double step = h / 8.0;
  for (int k = 0; k < 8; ++k) pts.push_back({cx + h, cy + step * k});            // right, lower half up
  for (int k = 0; k < 16; ++k) pts.push_back({cx + h - step * k, cy + h});       // top, right to left
  for (int k = 0; k < 16; ++k) pts.push_back({cx - h, cy + h - step * k});       // left, top to bottom
  for (int k = 0; k < 16; ++k) pts.push_back({cx - h + step * k, cy - h});       // bottom, left to right
  for (int k = 0; k < 8; ++k) pts.push_back({cx + h, cy - h + step * k});        // right, up to start
  return pts;
}

TriangleMesh make_box_bump(double bump_x, double radius) {
  MeshBuilder b;
  for (int axis = 0; axis < 3; ++axis) {
    emit_box_face(b, axis, -1);
    if (axis != 2) emit_box_face(b, axis, +1);  // top face handled below
  }

  const double z = kHalf;
  const double inner_half = radius + 0.25;

  // outer ring reuses exact lattice coordinates so it welds onto the side faces
  std::vector<int> outer(kRing), inner(kRing), rim(kRing);
  auto outer_pts = square_ring(0.0, 0.0, kHalf);
  auto inner_pts = square_ring(bump_x, 0.0, inner_half);
  for (int i = 0; i < kRing; ++i) {
    outer[i] = b.vertex(outer_pts[i][0], outer_pts[i][1], z);
    inner[i] = b.vertex(inner_pts[i][0], inner_pts[i][1], z);
    double phi = 2.0 * M_PI * i / kRing;
    rim[i] = b.vertex(bump_x + radius * std::cos(phi), radius * std::sin(phi), z);
  }
  for (int i = 0; i < kRing; ++i) {
    int j = (i + 1) % kRing;
    b.quad(outer[i], outer[j], inner[j], inner[i]);
    b.quad(inner[i], inner[j], rim[j], rim[i]);
  }

  // hemisphere cap over the rim
  std::vector<int> prev = rim;
  for (int row = 1; row < kCapRows; ++row) {
    double theta = 0.5 * M_PI * (1.0 - static_cast<double>(row) / kCapRows);
    std::vector<int> cur(kRing);
    for (int i = 0; i < kRing; ++i) {
      double phi = 2.0 * M_PI * i / kRing;
      cur[i] = b.vertex(bump_x + radius * std::sin(theta) * std::cos(phi),
                        radius * std::sin(theta) * std::sin(phi),
                        z + radius * std::cos(theta));
    }
    for (int i = 0; i < kRing; ++i) {
      int j = (i + 1) % kRing;
      b.quad(prev[i], prev[j], cur[j], cur[i]);
    }
    prev = cur;
  }
  int pole = b.vertex(bump_x, 0.0, z + radius);
  for (int i = 0; i < kRing; ++i) b.tri(prev[i], prev[(i + 1) % kRing], pole);

  return b.mesh();
}

}  // namespace

std::pair<Ensemble, GroundTruth> gen_box_bump(const BoxBumpParams& params) {
  if (params.n < 2) throw std::runtime_error("gen_box_bump: need n >= 2");
  if (!(params.bump_lo > 0.0 && params.bump_hi < 1.0 && params.bump_lo <= params.bump_hi))
    throw std::runtime_error("gen_box_bump: bump range must lie inside (0,1)");
  if (params.radius <= 0.0 || params.radius > 0.65)
    throw std::runtime_error("gen_box_bump: bump radius must be in (0, 0.65] to fit the box");

  Ensemble ensemble;
  GroundTruth truth;
  std::ostringstream prov;
  prov << "box_bump(n=" << params.n << ", seed=" << params.seed << ", range=["
       << params.bump_lo << "," << params.bump_hi << "], radius=" << params.radius << ")";
  ensemble.provenance = prov.str();

  for (int i = 0; i < params.n; ++i) {
    std::mt19937_64 rng(split_seed(params.seed, i));
    std::uniform_real_distribution<double> unif(params.bump_lo, params.bump_hi);
    double u = params.bump_lo == params.bump_hi ? params.bump_lo : unif(rng);
    double bump_x = -1.0 + 2.0 * u;  // slide line spans x in [-1, 1]

    ShapeSample sample;
    sample.id = sample_id(i);
    sample.mesh = make_box_bump(bump_x, params.radius);
    validate_mesh(sample.mesh);
    ensemble.samples.push_back(std::move(sample));

    SampleTruth st;
    st.id = ensemble.samples.back().id;
    st.params["bump_u"] = u;
    st.params["bump_x"] = bump_x;
    truth.samples.push_back(std::move(st));
  }
  return {std::move(ensemble), std::move(truth)};
}

// ---------------------------------------------------------------------------
// appendage generator

namespace {

constexpr int kCols = 64;      // azimuthal columns (ostium ring resolution)
constexpr int kPouchRows = 20; // tip to ostium
constexpr int kBodyRows = 20;  // ostium to far pole

// body ellipsoid semi-axes (mm)
constexpr double kBodyA = 12.0, kBodyB = 10.0, kBodyC = 9.0;

double body_radius(const Vec3& dir) {
  Vec3 scaled(dir[0] / kBodyA, dir[1] / kBodyB, dir[2] / kBodyC);
  return 1.0 / scaled.norm();
}

double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

AppendageSpec appendage_family_mean(int family) {
  switch (family) {
    case 1:  // compact, lobed
      return {10.0, 12.0, 5.5, 4.8, 1.5, 0.35, 3, 6.0};
    case 2:  // long bent tube
      return {24.0, 40.0, 4.5, 3.8, 2.4, 0.0, 0, 12.0};
    case 3:  // long straight funnel
      return {30.0, 10.0, 5.8, 5.0, 2.0, 0.0, 0, 4.0};
    case 4:  // short, ridged
      return {16.0, 24.0, 4.0, 3.4, 2.8, 0.25, 5, 9.0};
    default:
      throw std::runtime_error("appendage_family_mean: family must be 1..4");
  }
}

TriangleMesh make_appendage(const AppendageSpec& spec, Points* contour,
                            Vec3* plane_normal, Vec3* plane_point) {
  if (spec.length <= 0.0 || spec.ostium_a <= 0.0 || spec.ostium_b <= 0.0)
    throw std::runtime_error("make_appendage: length and semi-axes must be positive");
  if (spec.lobe < 0.0 || spec.lobe > 0.45)
    throw std::runtime_error("make_appendage: lobe amplitude must be in [0, 0.45]");
  if (spec.bend_deg < 0.0 || spec.bend_deg > 55.0)
    throw std::runtime_error("make_appendage: bend angle must be in [0, 55] degrees");

  const double beta = spec.bend_deg * M_PI / 180.0;
  const double tau = spec.tip_skew_deg * M_PI / 180.0;
  const Vec3 p_hat(std::sin(beta), 0.0, std::cos(beta));        // ostium plane normal
  const Vec3 e1(std::cos(beta), 0.0, -std::sin(beta));          // in-plane basis
  const Vec3 e2(0.0, 1.0, 0.0);
  const Vec3 t_hat = std::sin(tau) * e1 + std::cos(tau) * p_hat;  // pouch tip direction

  const double d_o = 0.8 * body_radius(p_hat);
  const Vec3 o = d_o * p_hat;
  const double r_tip = d_o + spec.length;

  // exact ostium ring, one point per column
  Points ostium(kCols, 3);
  std::vector<double> alpha(kCols), lam_ost(kCols), r_ost(kCols);
  for (int i = 0; i < kCols; ++i) {
    double phi = 2.0 * M_PI * i / kCols;
    double ca = spec.ostium_a * std::cos(phi), sb = spec.ostium_b * std::sin(phi);
    ostium.row(i) = o + ca * e1 + sb * e2;
    alpha[i] = std::atan2(sb, ca);               // azimuth of the column in the p_hat frame
    lam_ost[i] = std::atan2(std::hypot(ca, sb), d_o);
    r_ost[i] = Vec3(ostium.row(i)).norm();
  }
  if (tau >= 0.6 * *std::min_element(lam_ost.begin(), lam_ost.end()))
    throw std::runtime_error("make_appendage: tip skew too large for this ostium");

  auto direction = [&](double lam, double az) {
    return Vec3(std::sin(lam) * (std::cos(az) * e1 + std::sin(az) * e2) +
                std::cos(lam) * p_hat);
  };

  const int n_rings = kPouchRows + kBodyRows - 1;  // interior rings between the poles
  TriangleMesh m;
  m.vertices.resize(n_rings * kCols + 2, 3);
  const int tip = 0;
  auto rv = [&](int ring, int col) { return 1 + ring * kCols + (col % kCols); };
  const int far_pole = 1 + n_rings * kCols;

  m.vertices.row(tip) = r_tip * t_hat;
  m.vertices.row(far_pole) = -body_radius(-p_hat) * p_hat;

  for (int ring = 0; ring < n_rings; ++ring) {
    int j = ring + 1;  // rows counted from the tip pole
    for (int i = 0; i < kCols; ++i) {
      Vec3 v;
      if (j < kPouchRows) {
        double t = static_cast<double>(j) / kPouchRows;
        Vec3 u = ((1.0 - t) * t_hat + t * Vec3(ostium.row(i)).normalized()).normalized();
        double r = (1.0 - std::pow(t, spec.shape_k)) * r_tip +
                   std::pow(t, spec.shape_k) * r_ost[i];
        double w = 4.0 * t * (1.0 - t);
        r *= 1.0 + spec.lobe * std::cos(spec.lobe_count * alpha[i]) * w * w;
        v = r * u;
      } else if (j == kPouchRows) {
        v = ostium.row(i);  // exact ground-truth ring
      } else {
        double s = static_cast<double>(j - kPouchRows) / kBodyRows;
        double lam = lam_ost[i] + (M_PI - lam_ost[i]) * s;
        Vec3 u = direction(lam, alpha[i]);
        double w = smoothstep01(s / 0.4);
        v = ((1.0 - w) * r_ost[i] + w * body_radius(u)) * u;
      }
      m.vertices.row(rv(ring, i)) = v;
    }
  }

  std::vector<std::array<int, 3>> tris;
  tris.reserve(2 * kCols * n_rings);
  for (int i = 0; i < kCols; ++i)
    tris.push_back({tip, rv(0, i + 1), rv(0, i)});
  for (int ring = 0; ring + 1 < n_rings; ++ring) {
    for (int i = 0; i < kCols; ++i) {
      int a = rv(ring, i), b = rv(ring, i + 1);
      int c = rv(ring + 1, i + 1), d = rv(ring + 1, i);
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  }
  for (int i = 0; i < kCols; ++i)
    tris.push_back({far_pole, rv(n_rings - 1, i), rv(n_rings - 1, i + 1)});

  m.faces.resize(static_cast<int>(tris.size()), 3);
  for (std::size_t f = 0; f < tris.size(); ++f)
    for (int c = 0; c < 3; ++c) m.faces(static_cast<int>(f), c) = tris[f][c];
  if (m.signed_volume() < 0.0) {
    for (int f = 0; f < m.n_faces(); ++f) std::swap(m.faces(f, 1), m.faces(f, 2));
  }

  if (contour) *contour = ostium;
  if (plane_normal) *plane_normal = p_hat;
  if (plane_point) *plane_point = o;
  return m;
}

std::pair<Ensemble, GroundTruth> gen_appendage(const AppendageParams& params) {
  if (params.n < 2) throw std::runtime_error("gen_appendage: need n >= 2");
  if (params.jitter < 0.0 || params.jitter > 0.2)
    throw std::runtime_error("gen_appendage: jitter must be in [0, 0.2]");

  Ensemble ensemble;
  GroundTruth truth;
  std::ostringstream prov;
  prov << "appendage(n=" << params.n << ", seed=" << params.seed
       << ", jitter=" << params.jitter << ")";
  ensemble.provenance = prov.str();

  for (int i = 0; i < params.n; ++i) {
    int family = i % 4 + 1;
    AppendageSpec spec = appendage_family_mean(family);
    std::mt19937_64 rng(split_seed(params.seed, i));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto jitter = [&](double v) { return v * (1.0 + params.jitter * unit(rng)); };
    spec.length = jitter(spec.length);
    spec.ostium_a = jitter(spec.ostium_a);
    spec.ostium_b = jitter(spec.ostium_b);
    spec.shape_k = jitter(spec.shape_k);
    spec.bend_deg += 2.0 * unit(rng);
    if (spec.lobe > 0.0) spec.lobe = std::max(0.0, spec.lobe + 0.05 * unit(rng));

    ShapeSample sample;
    sample.id = sample_id(i);
    SampleTruth st;
    st.id = sample.id;
    sample.mesh = make_appendage(spec, &st.contour, &st.plane_normal, &st.plane_point);
    validate_mesh(sample.mesh);
    ensemble.samples.push_back(std::move(sample));

    st.family = family;
    st.params["length"] = spec.length;
    st.params["bend_deg"] = spec.bend_deg;
    st.params["ostium_a"] = spec.ostium_a;
    st.params["ostium_b"] = spec.ostium_b;
    st.params["shape_k"] = spec.shape_k;
    st.params["lobe"] = spec.lobe;
    truth.samples.push_back(std::move(st));
  }
  return {std::move(ensemble), std::move(truth)};
}

}  // namespace ssm
