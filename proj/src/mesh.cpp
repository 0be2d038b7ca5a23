#include "ssm/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ssm {

Vec3 TriangleMesh::face_normal(int f) const {
  Vec3 a = vertex(faces(f, 0)), b = vertex(faces(f, 1)), c = vertex(faces(f, 2));
  Vec3 n = (b - a).cross(c - a);
  double len = n.norm();
  if (len == 0.0) return Vec3::Zero();
  return n / len;
}

double TriangleMesh::face_area(int f) const {
  Vec3 a = vertex(faces(f, 0)), b = vertex(faces(f, 1)), c = vertex(faces(f, 2));
  return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 TriangleMesh::face_centroid(int f) const {
  return (vertex(faces(f, 0)) + vertex(faces(f, 1)) + vertex(faces(f, 2))) / 3.0;
}

double TriangleMesh::total_area() const {
  double area = 0.0;
  for (int f = 0; f < n_faces(); ++f) area += face_area(f);
  return area;
}

double TriangleMesh::signed_volume() const {
  double vol = 0.0;
  for (int f = 0; f < n_faces(); ++f) {
    Vec3 a = vertex(faces(f, 0)), b = vertex(faces(f, 1)), c = vertex(faces(f, 2));
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return vol;
}

Vec3 TriangleMesh::surface_centroid() const {
  Vec3 acc = Vec3::Zero();
  double area = 0.0;
  for (int f = 0; f < n_faces(); ++f) {
    double a = face_area(f);
    acc += a * face_centroid(f);
    area += a;
  }
  if (area == 0.0) throw std::runtime_error("surface_centroid: zero-area mesh");
  return acc / area;
}

std::pair<Vec3, Vec3> TriangleMesh::bounding_box() const {
  if (n_vertices() == 0) throw std::runtime_error("bounding_box: empty mesh");
  return {vertices.colwise().minCoeff().transpose(), vertices.colwise().maxCoeff().transpose()};
}

namespace {

uint64_t edge_key(int a, int b) {
  uint32_t lo = static_cast<uint32_t>(std::min(a, b));
  uint32_t hi = static_cast<uint32_t>(std::max(a, b));
  return (static_cast<uint64_t>(hi) << 32) | lo;
}

}  // namespace

std::vector<std::pair<int, int>> boundary_edges(const TriangleMesh& mesh) {
  // count directed edges; an interior edge appears once in each direction
  std::unordered_map<uint64_t, int> count;
  count.reserve(mesh.n_faces() * 3);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int e = 0; e < 3; ++e) {
      int a = mesh.faces(f, e), b = mesh.faces(f, (e + 1) % 3);
      count[edge_key(a, b)] += 1;
    }
  }
  std::vector<std::pair<int, int>> bad;
  for (const auto& [key, c] : count) {
    if (c != 2) bad.emplace_back(static_cast<int>(key & 0xffffffffu),
                                 static_cast<int>(key >> 32));
  }
  std::sort(bad.begin(), bad.end());
  return bad;
}

bool is_watertight(const TriangleMesh& mesh) { return boundary_edges(mesh).empty(); }

int euler_characteristic(const TriangleMesh& mesh) {
  std::unordered_map<uint64_t, int> edges;
  edges.reserve(mesh.n_faces() * 3);
  for (int f = 0; f < mesh.n_faces(); ++f)
    for (int e = 0; e < 3; ++e)
      edges[edge_key(mesh.faces(f, e), mesh.faces(f, (e + 1) % 3))] = 1;
  return mesh.n_vertices() - static_cast<int>(edges.size()) + mesh.n_faces();
}

void validate_mesh(const TriangleMesh& mesh, const std::string& name) {
  const int nv = mesh.n_vertices();
  if (nv < 4 || mesh.n_faces() < 4)
    throw std::runtime_error(name + ": too few vertices or faces");
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int e = 0; e < 3; ++e) {
      int idx = mesh.faces(f, e);
      if (idx < 0 || idx >= nv)
        throw std::runtime_error(name + ": face " + std::to_string(f) +
                                 " index out of range");
    }
    if (mesh.face_area(f) <= 0.0)
      throw std::runtime_error(name + ": degenerate face " + std::to_string(f));
  }
  auto open = boundary_edges(mesh);
  if (!open.empty()) {
    std::ostringstream msg;
    msg << name << ": not watertight, " << open.size() << " boundary edge(s):";
    for (size_t i = 0; i < open.size() && i < 12; ++i)
      msg << " (" << open[i].first << "," << open[i].second << ")";
    if (open.size() > 12) msg << " ...";
    throw std::runtime_error(msg.str());
  }
  if (mesh.signed_volume() <= 0.0)
    throw std::runtime_error(name + ": inward orientation (signed volume <= 0)");
}

TriangleMesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_obj: cannot open " + path);
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag.empty() || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z()))
        throw std::runtime_error("read_obj: " + path + ":" + std::to_string(lineno) +
                                 ": malformed vertex line");
      verts.push_back(v);
    } else if (tag == "f") {
      int i, j, k;
      if (!(ls >> i >> j >> k))
        throw std::runtime_error("read_obj: " + path + ":" + std::to_string(lineno) +
                                 ": malformed face line (triangles with plain indices only)");
      std::string extra;
      if (ls >> extra)
        throw std::runtime_error("read_obj: " + path + ":" + std::to_string(lineno) +
                                 ": non-triangle face");
      faces.emplace_back(i - 1, j - 1, k - 1);
    } else {
      throw std::runtime_error("read_obj: " + path + ":" + std::to_string(lineno) +
                               ": unsupported line '" + tag + "'");
    }
  }
  const int nv = static_cast<int>(verts.size());
  for (const Eigen::Vector3i& f : faces)
    for (int c = 0; c < 3; ++c)
      if (f[c] < 0 || f[c] >= nv)
        throw std::runtime_error("read_obj: " + path + ": face index " + std::to_string(f[c] + 1) +
                                 " out of range for " + std::to_string(nv) + " vertices");
  TriangleMesh mesh;
  mesh.vertices.resize(nv, 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i].transpose();
  mesh.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(i) = faces[i].transpose();
  return mesh;
}

void write_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_obj: cannot open " + path);
  out.precision(17);
  for (int i = 0; i < mesh.n_vertices(); ++i)
    out << "v " << mesh.vertices(i, 0) << " " << mesh.vertices(i, 1) << " "
        << mesh.vertices(i, 2) << "\n";
  for (int f = 0; f < mesh.n_faces(); ++f)
    out << "f " << mesh.faces(f, 0) + 1 << " " << mesh.faces(f, 1) + 1 << " "
        << mesh.faces(f, 2) + 1 << "\n";
  if (!out) throw std::runtime_error("write_obj: write failed for " + path);
}

TriangleMesh make_icosphere(int level, double radius, const Vec3& center) {
  if (level < 0) throw std::invalid_argument("make_icosphere: level must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::Vector3i> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int l = 0; l < level; ++l) {
    std::map<uint64_t, int> midpoint;
    auto mid = [&](int a, int b) {
      uint64_t key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriangleMesh mesh;
  mesh.vertices.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i)
    mesh.vertices.row(i) = (center + radius * verts[i]).transpose();
  mesh.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(i) = faces[i].transpose();
  return mesh;
}

namespace {

// Welds grid vertices shared between box faces; coordinates are exact
// lattice multiples so the key can use the raw doubles.
struct VertexWeld {
  std::map<std::array<double, 3>, int> index;
  std::vector<Vec3> verts;
  int add(const Vec3& p) {
    std::array<double, 3> key = {p.x(), p.y(), p.z()};
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    verts.push_back(p);
    int idx = static_cast<int>(verts.size()) - 1;
    index.emplace(key, idx);
    return idx;
  }
};

}  // namespace

TriangleMesh make_box(const Vec3& lo, const Vec3& hi, int divisions) {
  if (divisions < 1) throw std::invalid_argument("make_box: divisions must be >= 1");
  VertexWeld weld;
  std::vector<Eigen::Vector3i> faces;
  const int n = divisions;
  Vec3 step = (hi - lo) / n;

  // axis = face normal direction, side = -1 (lo face) or +1 (hi face)
  for (int axis = 0; axis < 3; ++axis) {
    int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side = -1; side <= 1; side += 2) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          auto corner = [&](int di, int dj) {
            Vec3 p;
            p[axis] = side < 0 ? lo[axis] : hi[axis];
            p[u] = lo[u] + (i + di) * step[u];
            p[v] = lo[v] + (j + dj) * step[v];
            return weld.add(p);
          };
          int a = corner(0, 0), b = corner(1, 0), c = corner(1, 1), d = corner(0, 1);
          if (side > 0) {
            faces.push_back({a, b, c});
            faces.push_back({a, c, d});
          } else {
            faces.push_back({a, c, b});
            faces.push_back({a, d, c});
          }
        }
      }
    }
  }

  TriangleMesh mesh;
  mesh.vertices.resize(static_cast<int>(weld.verts.size()), 3);
  for (size_t i = 0; i < weld.verts.size(); ++i)
    mesh.vertices.row(i) = weld.verts[i].transpose();
  mesh.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(i) = faces[i].transpose();
  if (mesh.signed_volume() < 0) {
    for (int f = 0; f < mesh.n_faces(); ++f) std::swap(mesh.faces(f, 1), mesh.faces(f, 2));
  }
  return mesh;
}

}  // namespace ssm
