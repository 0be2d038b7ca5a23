#include "ssm/mesh_query.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace ssm {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, int* feature, int* feature_index) {
  // Ericson, Real-Time Collision Detection, 5.1.5
  auto report = [&](int feat, int idx, const Vec3& q) {
    if (feature) *feature = feat;
    if (feature_index) *feature_index = idx;
    return q;
  };

  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return report(2, 0, a);

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return report(2, 1, b);

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double v = d1 / (d1 - d3);
    return report(1, 0, a + v * ab);  // edge ab
  }

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return report(2, 2, c);

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double w = d2 / (d2 - d6);
    return report(1, 2, a + w * ac);  // edge ca
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return report(1, 1, b + w * (c - b));  // edge bc
  }

  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return report(0, 0, a + v * ab + w * ac);
}

double triangle_solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  // van Oosterom & Strackee
  double la = a.norm(), lb = b.norm(), lc = c.norm();
  double det = a.dot(b.cross(c));
  double denom = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
  return 2.0 * std::atan2(det, denom);
}

namespace {

struct BvhNode {
  Vec3 lo, hi;
  int left = -1, right = -1;   // children, or -1 for a leaf
  int begin = 0, end = 0;      // face range for leaves
};

double box_distance2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    double d = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
    d2 += d * d;
  }
  return d2;
}

uint64_t ekey(int a, int b) {
  uint32_t lo = static_cast<uint32_t>(std::min(a, b));
  uint32_t hi = static_cast<uint32_t>(std::max(a, b));
  return (static_cast<uint64_t>(hi) << 32) | lo;
}

}  // namespace

struct MeshQuery::Impl {
  TriangleMesh mesh;
  std::vector<BvhNode> nodes;
  std::vector<int> order;  // face indices, permuted into leaf ranges
  std::vector<Vec3> face_normals;
  std::vector<Vec3> vertex_normals;                 // angle-weighted
  std::unordered_map<uint64_t, Vec3> edge_normals;  // sum of adjacent face normals

  void build() {
    const int nf = mesh.n_faces();
    if (nf == 0) throw std::runtime_error("MeshQuery: empty mesh");
    order.resize(nf);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Vec3> centroids(nf);
    for (int f = 0; f < nf; ++f) centroids[f] = mesh.face_centroid(f);
    nodes.reserve(2 * nf / 3 + 4);
    build_node(0, nf, centroids);

    face_normals.resize(nf);
    for (int f = 0; f < nf; ++f) face_normals[f] = mesh.face_normal(f);
    vertex_normals.assign(mesh.n_vertices(), Vec3::Zero());
    for (int f = 0; f < nf; ++f) {
      for (int e = 0; e < 3; ++e) {
        int i0 = mesh.faces(f, e), i1 = mesh.faces(f, (e + 1) % 3),
            i2 = mesh.faces(f, (e + 2) % 3);
        Vec3 u = (mesh.vertex(i1) - mesh.vertex(i0)).normalized();
        Vec3 v = (mesh.vertex(i2) - mesh.vertex(i0)).normalized();
        double angle = std::acos(std::clamp(u.dot(v), -1.0, 1.0));
        vertex_normals[i0] += angle * face_normals[f];
        // try_emplace: operator[] would start from an uninitialized Vec3
        edge_normals.try_emplace(ekey(i0, i1), Vec3::Zero()).first->second += face_normals[f];
      }
    }
  }

  int build_node(int begin, int end, std::vector<Vec3>& centroids) {
    BvhNode node;
    node.lo = Vec3::Constant(std::numeric_limits<double>::max());
    node.hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (int i = begin; i < end; ++i) {
      int f = order[i];
      for (int e = 0; e < 3; ++e) {
        Vec3 v = mesh.vertex(mesh.faces(f, e));
        node.lo = node.lo.cwiseMin(v);
        node.hi = node.hi.cwiseMax(v);
      }
    }
    int self = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (end - begin <= 4) {
      nodes[self].begin = begin;
      nodes[self].end = end;
      return self;
    }
    Vec3 extent = node.hi - node.lo;
    int axis = 0;
    extent.maxCoeff(&axis);
    int mid = (begin + end) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](int fa, int fb) { return centroids[fa][axis] < centroids[fb][axis]; });
    int l = build_node(begin, mid, centroids);
    int r = build_node(mid, end, centroids);
    nodes[self].left = l;
    nodes[self].right = r;
    return self;
  }

  SurfacePoint closest(const Vec3& p) const {
    SurfacePoint best;
    best.distance = std::numeric_limits<double>::max();
    // explicit stack, nearest child first
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      int ni = stack[--top];
      const BvhNode& node = nodes[ni];
      if (box_distance2(p, node.lo, node.hi) >= best.distance * best.distance) continue;
      if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) {
          int f = order[i];
          int feat = 0, fidx = 0;
          Vec3 q = closest_point_on_triangle(p, mesh.vertex(mesh.faces(f, 0)),
                                             mesh.vertex(mesh.faces(f, 1)),
                                             mesh.vertex(mesh.faces(f, 2)), &feat, &fidx);
          double d = (p - q).norm();
          if (d < best.distance) {
            best.distance = d;
            best.point = q;
            best.face = f;
            best.feature = feat;
            best.feature_index = fidx;
          }
        }
      } else {
        double dl = box_distance2(p, nodes[node.left].lo, nodes[node.left].hi);
        double dr = box_distance2(p, nodes[node.right].lo, nodes[node.right].hi);
        // push farther child first so the nearer one is processed next
        if (dl <= dr) {
          stack[top++] = node.right;
          stack[top++] = node.left;
        } else {
          stack[top++] = node.left;
          stack[top++] = node.right;
        }
      }
    }
    return best;
  }

  Vec3 pseudonormal(const SurfacePoint& sp) const {
    int f = sp.face;
    if (sp.feature == 0) return face_normals[f];
    if (sp.feature == 2) return vertex_normals[mesh.faces(f, sp.feature_index)];
    int a = mesh.faces(f, sp.feature_index);
    int b = mesh.faces(f, (sp.feature_index + 1) % 3);
    auto it = edge_normals.find(ekey(a, b));
    if (it != edge_normals.end()) return it->second;
    return face_normals[f];
  }

  double signed_distance(const Vec3& p) const {
    SurfacePoint sp = closest(p);
    Vec3 n = pseudonormal(sp);
    double s = (p - sp.point).dot(n);
    return s >= 0.0 ? sp.distance : -sp.distance;
  }

  double winding_number(const Vec3& p) const {
    double omega = 0.0;
    for (int f = 0; f < mesh.n_faces(); ++f) {
      omega += triangle_solid_angle(mesh.vertex(mesh.faces(f, 0)) - p,
                                    mesh.vertex(mesh.faces(f, 1)) - p,
                                    mesh.vertex(mesh.faces(f, 2)) - p);
    }
    return omega / (4.0 * M_PI);
  }
};

MeshQuery::MeshQuery(const TriangleMesh& mesh) : impl_(std::make_unique<Impl>()) {
  impl_->mesh = mesh;
  impl_->build();
}

MeshQuery::~MeshQuery() = default;
MeshQuery::MeshQuery(MeshQuery&&) noexcept = default;
MeshQuery& MeshQuery::operator=(MeshQuery&&) noexcept = default;

SurfacePoint MeshQuery::closest(const Vec3& p) const { return impl_->closest(p); }
double MeshQuery::signed_distance(const Vec3& p) const { return impl_->signed_distance(p); }
double MeshQuery::winding_number(const Vec3& p) const { return impl_->winding_number(p); }
const TriangleMesh& MeshQuery::mesh() const { return impl_->mesh; }

}  // namespace ssm
