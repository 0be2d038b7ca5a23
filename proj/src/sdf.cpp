#include "ssm/sdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "ssm/mesh_query.hpp"

namespace ssm {

namespace {

void check_nonempty(const SignedDistanceVolume& vol) {
  if (vol.dims.minCoeff() < 2 || vol.values.size() != vol.n_voxels())
    throw std::runtime_error("volume has invalid dimensions or value count");
}

struct CellCoords {
  int i, j, k;      // base voxel of the cell containing the point
  double tx, ty, tz;  // fractional position within the cell
};

CellCoords locate(const SignedDistanceVolume& vol, const Vec3& p) {
  Vec3 g = vol.world_to_grid(p);
  CellCoords c;
  c.i = std::clamp(static_cast<int>(std::floor(g[0])), 0, vol.dims[0] - 2);
  c.j = std::clamp(static_cast<int>(std::floor(g[1])), 0, vol.dims[1] - 2);
  c.k = std::clamp(static_cast<int>(std::floor(g[2])), 0, vol.dims[2] - 2);
  c.tx = g[0] - c.i;
  c.ty = g[1] - c.j;
  c.tz = g[2] - c.k;
  return c;
}

}  // namespace

bool SignedDistanceVolume::contains(const Vec3& p, double margin_voxels) const {
  Vec3 g = world_to_grid(p);
  for (int a = 0; a < 3; ++a) {
    if (g[a] < margin_voxels || g[a] > dims[a] - 1 - margin_voxels) return false;
  }
  return true;
}

double SignedDistanceVolume::interpolate(const Vec3& p) const {
  CellCoords c = locate(*this, p);
  double v000 = value(c.i, c.j, c.k), v100 = value(c.i + 1, c.j, c.k);
  double v010 = value(c.i, c.j + 1, c.k), v110 = value(c.i + 1, c.j + 1, c.k);
  double v001 = value(c.i, c.j, c.k + 1), v101 = value(c.i + 1, c.j, c.k + 1);
  double v011 = value(c.i, c.j + 1, c.k + 1), v111 = value(c.i + 1, c.j + 1, c.k + 1);
  double v00 = v000 + c.tx * (v100 - v000), v10 = v010 + c.tx * (v110 - v010);
  double v01 = v001 + c.tx * (v101 - v001), v11 = v011 + c.tx * (v111 - v011);
  double v0 = v00 + c.ty * (v10 - v00), v1 = v01 + c.ty * (v11 - v01);
  return v0 + c.tz * (v1 - v0);
}

Vec3 SignedDistanceVolume::gradient(const Vec3& p) const {
  CellCoords c = locate(*this, p);
  double v000 = value(c.i, c.j, c.k), v100 = value(c.i + 1, c.j, c.k);
  double v010 = value(c.i, c.j + 1, c.k), v110 = value(c.i + 1, c.j + 1, c.k);
  double v001 = value(c.i, c.j, c.k + 1), v101 = value(c.i + 1, c.j, c.k + 1);
  double v011 = value(c.i, c.j + 1, c.k + 1), v111 = value(c.i + 1, c.j + 1, c.k + 1);
  double tx = c.tx, ty = c.ty, tz = c.tz;
  Vec3 g;
  g[0] = (1 - ty) * (1 - tz) * (v100 - v000) + ty * (1 - tz) * (v110 - v010) +
         (1 - ty) * tz * (v101 - v001) + ty * tz * (v111 - v011);
  g[1] = (1 - tx) * (1 - tz) * (v010 - v000) + tx * (1 - tz) * (v110 - v100) +
         (1 - tx) * tz * (v011 - v001) + tx * tz * (v111 - v101);
  g[2] = (1 - tx) * (1 - ty) * (v001 - v000) + tx * (1 - ty) * (v101 - v100) +
         (1 - tx) * ty * (v011 - v010) + tx * ty * (v111 - v110);
  return g / spacing;
}

double SignedDistanceVolume::sample_extrapolated(const Vec3& p) const {
  Vec3 lo = origin;
  Vec3 hi = origin + spacing * Vec3(dims[0] - 1, dims[1] - 1, dims[2] - 1);
  Vec3 q = p.cwiseMax(lo).cwiseMin(hi);
  double v = interpolate(q);
  return v + (p - q).norm();
}

// ---------------------------------------------------------------------------
// mesh_to_sdf

SignedDistanceVolume mesh_to_sdf(const TriangleMesh& mesh, double spacing,
                                 double padding) {
  if (spacing <= 0.0) throw std::runtime_error("mesh_to_sdf: spacing must be positive");
  validate_mesh(mesh);
  MeshQuery query(mesh);

  auto [lo, hi] = mesh.bounding_box();
  SignedDistanceVolume vol;
  vol.spacing = spacing;
  vol.origin = lo - Vec3::Constant(padding);
  for (int a = 0; a < 3; ++a) {
    vol.dims[a] = static_cast<int>(std::ceil((hi[a] + padding - vol.origin[a]) / spacing)) + 1;
    vol.dims[a] = std::max(vol.dims[a], 2);
  }
  vol.values.resize(vol.n_voxels());

  for (int k = 0; k < vol.dims[2]; ++k)
    for (int j = 0; j < vol.dims[1]; ++j)
      for (int i = 0; i < vol.dims[0]; ++i)
        vol.value(i, j, k) = static_cast<float>(query.signed_distance(vol.voxel_center(i, j, k)));

  // Audit the sign per connected component of voxels that are provably off
  // the surface: two 6-adjacent centers with unsigned distance > 0.6*spacing
  // cannot straddle the surface (their distances would sum to <= spacing),
  // so each component has one true sign, checked with one winding-number
  // evaluation at its most interior/exterior voxel.
  const double safe = 0.6 * spacing;
  const std::size_t n = vol.n_voxels();
  std::vector<int> component(n, -1);
  int n_components = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (component[seed] >= 0 || std::abs(vol.values[seed]) <= safe) continue;
    int id = n_components++;
    component[seed] = id;
    frontier.push_back(seed);
    std::size_t representative = seed;
    while (!frontier.empty()) {
      std::size_t cur = frontier.front();
      frontier.pop_front();
      if (std::abs(vol.values[cur]) > std::abs(vol.values[representative]))
        representative = cur;
      int ci = static_cast<int>(cur % vol.dims[0]);
      int cj = static_cast<int>((cur / vol.dims[0]) % vol.dims[1]);
      int ck = static_cast<int>(cur / (static_cast<std::size_t>(vol.dims[0]) * vol.dims[1]));
      const int di[6] = {1, -1, 0, 0, 0, 0};
      const int dj[6] = {0, 0, 1, -1, 0, 0};
      const int dk[6] = {0, 0, 0, 0, 1, -1};
      for (int d = 0; d < 6; ++d) {
        int ni = ci + di[d], nj = cj + dj[d], nk = ck + dk[d];
        if (ni < 0 || nj < 0 || nk < 0 || ni >= vol.dims[0] || nj >= vol.dims[1] ||
            nk >= vol.dims[2])
          continue;
        std::size_t nidx = vol.index(ni, nj, nk);
        if (component[nidx] >= 0 || std::abs(vol.values[nidx]) <= safe) continue;
        component[nidx] = id;
        frontier.push_back(nidx);
      }
    }
    int ri = static_cast<int>(representative % vol.dims[0]);
    int rj = static_cast<int>((representative / vol.dims[0]) % vol.dims[1]);
    int rk = static_cast<int>(representative / (static_cast<std::size_t>(vol.dims[0]) * vol.dims[1]));
    bool inside = query.winding_number(vol.voxel_center(ri, rj, rk)) > 0.5;
    float want = inside ? -1.0f : 1.0f;
    // the component provably lies on one side, so force every voxel to the
    // audited sign rather than trusting the pseudonormal field
    for (std::size_t v = 0; v < n; ++v)
      if (component[v] == id) vol.values[v] = want * std::abs(vol.values[v]);
  }
  return vol;
}

// ---------------------------------------------------------------------------
// project_to_surface

Vec3 project_to_surface(const Vec3& point, const SignedDistanceVolume& sdf) {
  check_nonempty(sdf);
  if (!sdf.contains(point))
    throw std::runtime_error("project_to_surface: point outside volume");
  const double tol = 1e-4 * sdf.spacing;
  const double max_step = sdf.spacing;
  Vec3 p = point;
  int perturbations = 0;
  for (int iter = 0; iter < 100; ++iter) {
    double v = sdf.interpolate(p);
    if (std::abs(v) <= tol) return p;
    Vec3 g = sdf.gradient(p);
    double g2 = g.squaredNorm();
    if (g2 < 1e-20) {
      // medial-axis start: nudge off the stationary point and try again
      if (++perturbations > 10)
        throw std::runtime_error("project_to_surface: stuck at zero gradient");
      Vec3 dir = Vec3::Zero();
      dir[perturbations % 3] = 1.0;
      Vec3 q = p + 0.5 * sdf.spacing * dir;
      p = sdf.contains(q) ? q : p - 0.5 * sdf.spacing * dir;
      continue;
    }
    Vec3 step = -v * g / g2;
    double len = step.norm();
    if (len > max_step) step *= max_step / len;
    // damping: halve the step until |value| decreases
    double scale = 1.0;
    Vec3 next = p + step;
    for (int h = 0; h < 12; ++h) {
      if (sdf.contains(next) && std::abs(sdf.interpolate(next)) < std::abs(v)) break;
      scale *= 0.5;
      next = p + scale * step;
    }
    p = next;
  }
  throw std::runtime_error("project_to_surface: no convergence in 100 iterations");
}

// ---------------------------------------------------------------------------
// extract_level_set (marching tetrahedra)

namespace {

// 6-tetrahedra split of a cell around the main diagonal (corner 0 to corner
// 7, corner code = dx + 2*dy + 4*dz). Every cube face is cut along the
// diagonal shared with the neighboring cell, so the triangulation is
// conforming across cells.
constexpr int kTets[6][4] = {{0, 5, 1, 7}, {0, 1, 3, 7}, {0, 3, 2, 7},
                             {0, 2, 6, 7}, {0, 6, 4, 7}, {0, 4, 5, 7}};

struct Extractor {
  const SignedDistanceVolume& vol;
  double iso;
  std::unordered_map<uint64_t, int> edge_vertex;  // crossing per grid edge
  std::map<std::array<int64_t, 3>, int> position_vertex;  // welds exact duplicates
  std::vector<Vec3> points;
  std::vector<std::array<int, 3>> tris;

  double corner_value(std::size_t vidx) const {
    double v = static_cast<double>(vol.values[vidx]) - iso;
    // break exact-zero ties so every corner is strictly on one side
    return v == 0.0 ? 1e-30 : v;
  }

  int crossing(std::size_t a, std::size_t b, const Vec3& pa, const Vec3& pb,
               double va, double vb) {
    uint64_t key = (static_cast<uint64_t>(std::min(a, b)) << 32) |
                   static_cast<uint64_t>(std::max(a, b));
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    double t = va / (va - vb);
    Vec3 p = pa + t * (pb - pa);
    // weld bit-identical positions produced by near-corner crossings
    std::array<int64_t, 3> pkey;
    for (int c = 0; c < 3; ++c) {
      double guard = p[c] == 0.0 ? 0.0 : p[c];  // collapse -0.0 onto +0.0
      int64_t bits;
      std::memcpy(&bits, &guard, sizeof(bits));
      pkey[c] = bits;
    }
    auto [pit, inserted] = position_vertex.try_emplace(pkey, static_cast<int>(points.size()));
    if (inserted) points.push_back(p);
    edge_vertex.emplace(key, pit->second);
    return pit->second;
  }
};

}  // namespace

TriangleMesh extract_level_set(const SignedDistanceVolume& sdf, double iso) {
  check_nonempty(sdf);
  Extractor ex{sdf, iso, {}, {}, {}, {}};

  std::size_t vidx[8];
  Vec3 pos[8];
  double val[8];
  for (int k = 0; k + 1 < sdf.dims[2]; ++k) {
    for (int j = 0; j + 1 < sdf.dims[1]; ++j) {
      for (int i = 0; i + 1 < sdf.dims[0]; ++i) {
        bool any_neg = false, any_pos = false;
        for (int c = 0; c < 8; ++c) {
          int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
          vidx[c] = sdf.index(ci, cj, ck);
          pos[c] = sdf.voxel_center(ci, cj, ck);
          val[c] = ex.corner_value(vidx[c]);
          (val[c] < 0.0 ? any_neg : any_pos) = true;
        }
        if (!any_neg || !any_pos) continue;
        for (const auto& tet : kTets) {
          int neg[4], npos[4], nn = 0, np = 0;
          for (int c = 0; c < 4; ++c)
            (val[tet[c]] < 0.0 ? neg[nn++] : npos[np++]) = tet[c];
          if (nn == 0 || nn == 4) continue;

          // gradient of the linear interpolant on this tet orients triangles
          Mat3 edges;
          Vec3 dv;
          for (int r = 0; r < 3; ++r) {
            edges.row(r) = pos[tet[r + 1]] - pos[tet[0]];
            dv[r] = val[tet[r + 1]] - val[tet[0]];
          }
          Vec3 grad = edges.partialPivLu().solve(dv);

          auto cross = [&](int a, int b) {
            return ex.crossing(vidx[a], vidx[b], pos[a], pos[b], val[a], val[b]);
          };
          auto emit = [&](int a, int b, int c) {
            if (a == b || b == c || a == c) return;  // collapsed by welding
            Vec3 n = (ex.points[b] - ex.points[a]).cross(ex.points[c] - ex.points[a]);
            if (n.dot(grad) < 0.0) std::swap(b, c);
            ex.tris.push_back({a, b, c});
          };

          if (nn == 1) {
            emit(cross(neg[0], npos[0]), cross(neg[0], npos[1]), cross(neg[0], npos[2]));
          } else if (nn == 3) {
            emit(cross(neg[0], npos[0]), cross(neg[1], npos[0]), cross(neg[2], npos[0]));
          } else {
            int q0 = cross(neg[0], npos[0]), q1 = cross(neg[0], npos[1]);
            int q2 = cross(neg[1], npos[1]), q3 = cross(neg[1], npos[0]);
            emit(q0, q1, q2);
            emit(q0, q2, q3);
          }
        }
      }
    }
  }

  // drop unreferenced vertices (welding can orphan a few)
  std::vector<int> remap(ex.points.size(), -1);
  TriangleMesh mesh;
  mesh.faces.resize(static_cast<int>(ex.tris.size()), 3);
  int n_used = 0;
  for (auto& t : ex.tris)
    for (int c : t)
      if (remap[c] < 0) remap[c] = n_used++;
  mesh.vertices.resize(n_used, 3);
  for (std::size_t v = 0; v < ex.points.size(); ++v)
    if (remap[v] >= 0) mesh.vertices.row(remap[v]) = ex.points[v];
  for (int f = 0; f < static_cast<int>(ex.tris.size()); ++f)
    for (int c = 0; c < 3; ++c) mesh.faces(f, c) = remap[ex.tris[f][c]];
  return mesh;
}

// ---------------------------------------------------------------------------
// smooth_sdf

namespace {

int level_set_euler_characteristic(const SignedDistanceVolume& vol) {
  TriangleMesh m = extract_level_set(vol, 0.0);
  return euler_characteristic(m);
}

void blur_band(const SignedDistanceVolume& in, SignedDistanceVolume& out,
               double band) {
  // one pass of a separable 3-tap binomial blur, restricted to the band
  SignedDistanceVolume tmp1 = in, tmp2 = in;
  auto pass = [&](const SignedDistanceVolume& src, SignedDistanceVolume& dst,
                  int axis) {
    const int di = axis == 0 ? 1 : 0, dj = axis == 1 ? 1 : 0, dk = axis == 2 ? 1 : 0;
    for (int k = 0; k < src.dims[2]; ++k)
      for (int j = 0; j < src.dims[1]; ++j)
        for (int i = 0; i < src.dims[0]; ++i) {
          int il = std::max(i - di, 0), jl = std::max(j - dj, 0), kl = std::max(k - dk, 0);
          int ih = std::min(i + di, src.dims[0] - 1), jh = std::min(j + dj, src.dims[1] - 1),
              kh = std::min(k + dk, src.dims[2] - 1);
          dst.value(i, j, k) = 0.25f * src.value(il, jl, kl) +
                               0.5f * src.value(i, j, k) +
                               0.25f * src.value(ih, jh, kh);
        }
  };
  pass(in, tmp1, 0);
  pass(tmp1, tmp2, 1);
  pass(tmp2, tmp1, 2);
  out = in;
  for (std::size_t v = 0; v < in.n_voxels(); ++v)
    if (std::abs(in.values[v]) <= band) out.values[v] = tmp1.values[v];
}

}  // namespace

SignedDistanceVolume smooth_sdf(const SignedDistanceVolume& sdf, int iterations) {
  check_nonempty(sdf);
  if (iterations < 0) throw std::runtime_error("smooth_sdf: negative iteration count");
  SignedDistanceVolume current = sdf;
  if (iterations == 0) return current;
  const double band = 3.0 * sdf.spacing;
  const int chi = level_set_euler_characteristic(current);
  for (int it = 0; it < iterations; ++it) {
    SignedDistanceVolume next;
    blur_band(current, next, band);
    if (level_set_euler_characteristic(next) != chi) break;  // roll back this step
    current = std::move(next);
  }
  return current;
}

// ---------------------------------------------------------------------------
// crop_to_common_box

namespace {

// bounding box of all grid edges with a sign change; false if none exist
bool zero_set_box(const SignedDistanceVolume& vol, Vec3& lo, Vec3& hi) {
  lo = Vec3::Constant(std::numeric_limits<double>::max());
  hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  bool found = false;
  auto take = [&](int i, int j, int k) {
    Vec3 p = vol.voxel_center(i, j, k);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    found = true;
  };
  for (int k = 0; k < vol.dims[2]; ++k)
    for (int j = 0; j < vol.dims[1]; ++j)
      for (int i = 0; i < vol.dims[0]; ++i) {
        float v = vol.value(i, j, k);
        if (v == 0.0f) take(i, j, k);
        if (i + 1 < vol.dims[0] && v * vol.value(i + 1, j, k) < 0.0f) {
          take(i, j, k);
          take(i + 1, j, k);
        }
        if (j + 1 < vol.dims[1] && v * vol.value(i, j + 1, k) < 0.0f) {
          take(i, j, k);
          take(i, j + 1, k);
        }
        if (k + 1 < vol.dims[2] && v * vol.value(i, j, k + 1) < 0.0f) {
          take(i, j, k);
          take(i, j, k + 1);
        }
      }
  return found;
}

}  // namespace

std::vector<SignedDistanceVolume> crop_to_common_box(
    const std::vector<SignedDistanceVolume>& volumes, double padding,
    const std::vector<std::string>* names) {
  if (volumes.empty()) throw std::runtime_error("crop_to_common_box: no volumes");
  auto label = [&](std::size_t n) {
    return names && n < names->size() ? (*names)[n] : "volume " + std::to_string(n);
  };
  const double spacing = volumes[0].spacing;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
  for (std::size_t n = 0; n < volumes.size(); ++n) {
    check_nonempty(volumes[n]);
    if (std::abs(volumes[n].spacing - spacing) > 1e-12 * spacing)
      throw std::runtime_error("crop_to_common_box: spacing mismatch at " + label(n));
    Vec3 vlo, vhi;
    if (!zero_set_box(volumes[n], vlo, vhi))
      throw std::runtime_error("crop_to_common_box: empty zero level set in " + label(n));
    lo = lo.cwiseMin(vlo);
    hi = hi.cwiseMax(vhi);
  }
  Vec3 origin = lo - Vec3::Constant(padding);
  Vec3i dims;
  for (int a = 0; a < 3; ++a)
    dims[a] = std::max(2, static_cast<int>(std::ceil((hi[a] + padding - origin[a]) / spacing)) + 1);
  std::vector<SignedDistanceVolume> out;
  out.reserve(volumes.size());
  for (const auto& vol : volumes) out.push_back(resample_volume(vol, dims, spacing, origin));
  return out;
}

SignedDistanceVolume resample_volume(const SignedDistanceVolume& sdf,
                                     const Vec3i& dims, double spacing,
                                     const Vec3& origin) {
  check_nonempty(sdf);
  SignedDistanceVolume out;
  out.dims = dims;
  out.spacing = spacing;
  out.origin = origin;
  out.values.resize(out.n_voxels());
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i)
        out.value(i, j, k) =
            static_cast<float>(sdf.sample_extrapolated(out.voxel_center(i, j, k)));
  return out;
}

// ---------------------------------------------------------------------------
// IO

void write_volume(const SignedDistanceVolume& vol, const std::string& base_path) {
  check_nonempty(vol);
  std::ofstream raw(base_path + ".raw", std::ios::binary);
  if (!raw) throw std::runtime_error("cannot write " + base_path + ".raw");
  raw.write(reinterpret_cast<const char*>(vol.values.data()),
            static_cast<std::streamsize>(vol.values.size() * sizeof(float)));
  if (!raw) throw std::runtime_error("short write to " + base_path + ".raw");

  nlohmann::json meta;
  meta["dims"] = {vol.dims[0], vol.dims[1], vol.dims[2]};
  meta["spacing"] = vol.spacing;
  meta["origin"] = {vol.origin[0], vol.origin[1], vol.origin[2]};
  std::ofstream sidecar(base_path + ".json");
  if (!sidecar) throw std::runtime_error("cannot write " + base_path + ".json");
  sidecar << meta.dump(2) << "\n";
}

SignedDistanceVolume read_volume(const std::string& base_path) {
  std::ifstream sidecar(base_path + ".json");
  if (!sidecar) throw std::runtime_error("cannot read " + base_path + ".json");
  nlohmann::json meta;
  try {
    sidecar >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(base_path + ".json: " + e.what());
  }
  SignedDistanceVolume vol;
  try {
    auto dims = meta.at("dims");
    for (int a = 0; a < 3; ++a) vol.dims[a] = dims.at(a).get<int>();
    vol.spacing = meta.at("spacing").get<double>();
    auto origin = meta.at("origin");
    for (int a = 0; a < 3; ++a) vol.origin[a] = origin.at(a).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(base_path + ".json: missing or malformed field: " + e.what());
  }
  if (vol.dims.minCoeff() < 2)
    throw std::runtime_error(base_path + ".json: dims must be at least 2 per axis");
  std::ifstream raw(base_path + ".raw", std::ios::binary);
  if (!raw) throw std::runtime_error("cannot read " + base_path + ".raw");
  vol.values.resize(vol.n_voxels());
  raw.read(reinterpret_cast<char*>(vol.values.data()),
           static_cast<std::streamsize>(vol.values.size() * sizeof(float)));
  if (raw.gcount() != static_cast<std::streamsize>(vol.values.size() * sizeof(float)))
    throw std::runtime_error(base_path + ".raw: file shorter than dims imply");
  return vol;
}

}  // namespace ssm
