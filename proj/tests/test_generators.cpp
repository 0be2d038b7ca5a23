#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ssm/ensemble.hpp"
#include "ssm/generators.hpp"
#include "ssm/mesh.hpp"
#include "ssm/types.hpp"

using namespace ssm;

TEST_CASE("split_seed decorrelates indices and stays deterministic") {
  std::set<uint64_t> seen;
  for (uint64_t i = 0; i < 200; ++i) seen.insert(split_seed(12345, i));
  CHECK(seen.size() == 200);
  CHECK(split_seed(1, 2) == split_seed(1, 2));
  CHECK(split_seed(1, 2) != split_seed(2, 2));
  CHECK(split_seed(1, 2) != split_seed(1, 3));
}

TEST_CASE("box-bump ensemble varies only the bump position") {
  BoxBumpParams params;
  params.n = 6;
  params.seed = 11;
  auto [ens, truth] = gen_box_bump(params);
  REQUIRE(ens.n() == 6);
  REQUIRE(truth.samples.size() == 6);
  for (int i = 0; i < ens.n(); ++i) {
    const TriangleMesh& mesh = ens.sample(i).mesh;
    CHECK(is_watertight(mesh));
    CHECK(euler_characteristic(mesh) == 2);
    validate_mesh(mesh);
    // The box proper spans [-2, 2]^3; the bump rises above the top face.
    auto [lo, hi] = mesh.bounding_box();
    CHECK(lo.x() == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(hi.x() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(hi.z() > 2.0 + 0.3);
    // Ground truth stores the generating position.
    CHECK(truth.samples[i].id == ens.sample(i).id);
    double u = truth.samples[i].params.at("bump_u");
    CHECK(u >= params.bump_lo);
    CHECK(u <= params.bump_hi);
    CHECK(truth.samples[i].params.count("bump_x") == 1);
  }
  // The non-bump geometry is bit-identical across samples: collect vertices
  // below the top face and compare.
  const TriangleMesh& a = ens.sample(0).mesh;
  const TriangleMesh& b = ens.sample(3).mesh;
  REQUIRE(a.n_vertices() == b.n_vertices());
  int below = 0;
  bool all_same = true;
  for (int v = 0; v < a.n_vertices(); ++v) {
    if (a.vertex(v).z() < 2.0 - 1e-9) {
      below += 1;
      all_same = all_same && (a.vertices.row(v).array() == b.vertices.row(v).array()).all();
    }
  }
  CHECK(below > 100);
  CHECK(all_same);
  // Bump positions actually differ between samples.
  CHECK(truth.samples[0].params.at("bump_x") != truth.samples[3].params.at("bump_x"));
}

TEST_CASE("box-bump generation is deterministic in the seed") {
  BoxBumpParams params;
  params.n = 3;
  params.seed = 5;
  auto [ens1, truth1] = gen_box_bump(params);
  auto [ens2, truth2] = gen_box_bump(params);
  for (int i = 0; i < 3; ++i)
    CHECK((ens1.sample(i).mesh.vertices.array() == ens2.sample(i).mesh.vertices.array()).all());
  params.seed = 6;
  auto [ens3, truth3] = gen_box_bump(params);
  CHECK(truth1.samples[0].params.at("bump_x") != truth3.samples[0].params.at("bump_x"));
}

TEST_CASE("appendage mesh is closed, star-shaped, and carries its ostium ring") {
  AppendageSpec spec = appendage_family_mean(1);
  Points contour;
  Vec3 normal, point;
  TriangleMesh mesh = make_appendage(spec, &contour, &normal, &point);
  CHECK(is_watertight(mesh));
  CHECK(euler_characteristic(mesh) == 2);
  validate_mesh(mesh);
  REQUIRE(contour.rows() == 64);
  // Contour points lie on the stated plane and on the mesh vertex set.
  for (int i = 0; i < contour.rows(); ++i) {
    Vec3 c = contour.row(i).transpose();
    CHECK(std::abs(normal.dot(c - point)) < 1e-9);
    double best = 1e300;
    for (int v = 0; v < mesh.n_vertices(); ++v) best = std::min(best, (mesh.vertex(v) - c).norm());
    CHECK(best < 1e-9);
  }
}

TEST_CASE("appendage families are distinct and truth records the parameters") {
  AppendageParams params;
  params.n = 8;
  params.seed = 21;
  auto [ens, truth] = gen_appendage(params);
  REQUIRE(ens.n() == 8);
  REQUIRE(truth.samples.size() == 8);
  std::map<int, int> family_counts;
  for (int i = 0; i < 8; ++i) {
    const SampleTruth& t = truth.samples[i];
    CHECK(t.id == ens.sample(i).id);
    CHECK(t.family == i % 4 + 1);
    family_counts[t.family] += 1;
    for (const char* key : {"length", "bend_deg", "ostium_a", "ostium_b", "shape_k", "lobe"})
      CHECK(t.params.count(key) == 1);
    CHECK(t.contour.rows() == 64);
    // Parameters jitter around the family mean.
    AppendageSpec mean = appendage_family_mean(t.family);
    CHECK(std::abs(t.params.at("length") - mean.length) < 0.5 * mean.length);
    CHECK(is_watertight(ens.sample(i).mesh));
  }
  for (int f = 1; f <= 4; ++f) CHECK(family_counts[f] == 2);
  // Family means differ in at least the elongation.
  CHECK(appendage_family_mean(1).length != appendage_family_mean(2).length);
  CHECK_THROWS(appendage_family_mean(0));
  CHECK_THROWS(appendage_family_mean(5));
}

TEST_CASE("appendage generation is deterministic and seed-sensitive") {
  AppendageParams params;
  params.n = 4;
  params.seed = 3;
  auto [ens1, truth1] = gen_appendage(params);
  auto [ens2, truth2] = gen_appendage(params);
  for (int i = 0; i < 4; ++i)
    CHECK((ens1.sample(i).mesh.vertices.array() == ens2.sample(i).mesh.vertices.array()).all());
  params.seed = 4;
  auto [ens3, truth3] = gen_appendage(params);
  CHECK(truth1.samples[0].params.at("length") != truth3.samples[0].params.at("length"));
}

TEST_CASE("ground truth io round-trips parameters, planes, and contours") {
  AppendageParams params;
  params.n = 4;
  params.seed = 9;
  auto [ens, truth] = gen_appendage(params);
  std::string dir = (std::filesystem::temp_directory_path() / "ssm_truth_io").string();
  write_ground_truth(truth, dir);
  GroundTruth back = read_ground_truth(dir);
  REQUIRE(back.samples.size() == truth.samples.size());
  for (size_t i = 0; i < truth.samples.size(); ++i) {
    const SampleTruth& a = truth.samples[i];
    const SampleTruth& b = back.samples[i];
    CHECK(a.id == b.id);
    CHECK(a.family == b.family);
    CHECK(a.params == b.params);
    CHECK((a.contour.array() == b.contour.array()).all());
    CHECK((a.plane_normal - b.plane_normal).norm() == 0.0);
    CHECK((a.plane_point - b.plane_point).norm() == 0.0);
    CHECK((a.septum_normal - b.septum_normal).norm() == 0.0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("ensemble save and load preserve ids and geometry") {
  BoxBumpParams params;
  params.n = 3;
  params.seed = 2;
  auto [ens, truth] = gen_box_bump(params);
  std::string dir = (std::filesystem::temp_directory_path() / "ssm_ens_io").string();
  save_ensemble(ens, dir);
  Ensemble back = load_ensemble(dir);
  REQUIRE(back.n() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(back.sample(i).id == ens.sample(i).id);
    CHECK((back.sample(i).mesh.vertices.array() == ens.sample(i).mesh.vertices.array()).all());
    CHECK((back.sample(i).mesh.faces.array() == ens.sample(i).mesh.faces.array()).all());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("preprocessing aligns samples onto one grid and keeps contours on surface") {
  AppendageParams params;
  params.n = 4;
  params.seed = 17;
  auto [ens, truth] = gen_appendage(params);
  // Displace one sample rigidly; preprocessing must undo it.
  RigidTransform move = rotation_about(Vec3(0, 0, 1), 0.4);
  move.translation = Vec3(6.0, -3.0, 2.0);
  ens.sample(2).mesh.vertices = move.apply(ens.sample(2).mesh.vertices);
  truth.samples[2].contour = move.apply(truth.samples[2].contour);
  truth.samples[2].plane_normal = move.rotation * truth.samples[2].plane_normal;
  truth.samples[2].plane_point = move.apply(truth.samples[2].plane_point);
  truth.samples[2].septum_normal = move.rotation * truth.samples[2].septum_normal;
  PreprocessConfig config;
  config.spacing = 0.8;
  config.padding = 2.0;
  Ensemble world = preprocess_ensemble(ens, config, &truth);
  CHECK(world.world_frame);
  REQUIRE(world.n() == 4);
  for (int i = 0; i < 4; ++i) {
    const ShapeSample& s = world.sample(i);
    REQUIRE(s.has_sdf);
    CHECK(s.sdf.spacing == config.spacing);
    // All samples share one grid.
    CHECK(s.sdf.dims == world.sample(0).sdf.dims);
    CHECK((s.sdf.origin - world.sample(0).sdf.origin).norm() < 1e-12);
    // Mesh vertices sit on the zero level set of their own volume.
    for (int v = 0; v < s.mesh.n_vertices(); v += 50)
      CHECK(std::abs(s.sdf.sample_extrapolated(s.mesh.vertex(v))) < 1.0 * config.spacing);
    // Transported contours stay on the transported surface.
    const Points& contour = truth.samples[i].contour;
    for (int c = 0; c < contour.rows(); c += 16)
      CHECK(std::abs(s.sdf.sample_extrapolated(Vec3(contour.row(c)))) < 1.0 * config.spacing);
  }
  // The displaced sample was brought back near the representative.
  Vec3 c2 = world.sample(2).mesh.surface_centroid();
  Vec3 c0 = world.sample(0).mesh.surface_centroid();
  CHECK((c2 - c0).norm() < 8.0);
}
