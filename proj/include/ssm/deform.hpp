#pragma once

#include <string>
#include <vector>

#include "ssm/ensemble.hpp"
#include "ssm/mesh.hpp"
#include "ssm/pdm.hpp"
#include "ssm/types.hpp"

namespace ssm {

// Velocity at points x induced by control points and momenta under the
// Gaussian kernel K(x, y) = exp(-|x - y|^2 / sigma^2).
Points deformation_field(const Points& x, const Points& controls, const Points& momenta,
                         double sigma);

// Integrates the stationary-velocity flow with explicit Euler steps of size
// 1/steps; control points are advected along. Throws if any single step
// displaces a point by more than sigma (integration would be unreliable).
struct FlowResult {
  Points points;
  Points controls;
};
FlowResult flow_points(const Points& points, const Points& controls, const Points& momenta,
                       double sigma, int steps);
TriangleMesh flow_mesh(const TriangleMesh& mesh, const Points& controls, const Points& momenta,
                       double sigma, int steps);

// Squared varifold distance between triangulated surfaces:
// <A,A> - 2<A,B> + <B,B> with the Gaussian position kernel (width sigma_w)
// and squared-cosine alignment between unit normals, weighted by face areas.
// Far pairs are pruned with a cell list at 6 * sigma_w.
double varifold_product(const TriangleMesh& a, const TriangleMesh& b, double sigma_w);
double varifold_distance2(const TriangleMesh& a, const TriangleMesh& b, double sigma_w);

struct AtlasConfig {
  int control_grid = 4;       // controls per axis over the template bounding box
  int flow_steps = 10;
  int outer_iterations = 25;
  int momenta_steps = 3;      // gradient steps on each subject's momenta per outer pass
  int template_steps = 1;     // gradient steps on the template per outer pass
  double sigma = -1.0;        // deformation kernel width; < 0 selects 0.15 * ensemble diagonal
  double sigma_w = -1.0;      // varifold kernel width; < 0 selects 0.08 * ensemble diagonal
  double regularity_weight = 1.0;
  int n_correspondences = 256;
};

struct Atlas {
  TriangleMesh template_mesh;
  Points controls;                  // shared initial control points
  std::vector<MatX> momenta;        // one P x 3 matrix per subject
  std::vector<std::string> ids;
  double sigma = 0.0;
  double sigma_w = 0.0;
  int flow_steps = 0;
  double regularity_weight = 1.0;
  double objective = 0.0;               // final total energy
  std::vector<double> data_terms;       // per-subject squared varifold distances
  std::vector<double> regularity_terms;
};

// Alternating gradient descent over per-subject momenta and template
// vertices, control points fixed at their initial grid.
Atlas estimate_atlas(const Ensemble& ensemble, const TriangleMesh& initial_template,
                     const AtlasConfig& config);

// Farthest-point samples of the template pushed through each subject's flow.
CorrespondenceModel correspond_deform(const Ensemble& ensemble, const Atlas& atlas,
                                      int n_points);

// Gradients of the per-subject energy, for verification and optimization:
// d/d(momenta) and d/d(template vertices) of
//   varifold_distance2(flow(template), target) + weight * regularity.
struct AtlasGradients {
  MatX d_momenta;
  Points d_template;
  double energy = 0.0;
  double data_term = 0.0;
  double regularity = 0.0;
};
AtlasGradients subject_energy_gradients(const TriangleMesh& template_mesh, const Points& controls,
                                        const MatX& momenta, const TriangleMesh& target,
                                        double sigma, double sigma_w, int steps,
                                        double regularity_weight);

// Template construction helpers: the mean of the aligned distance volumes
// resampled to a coarse grid, or a sphere matched to the ensemble's average
// radial size.
TriangleMesh build_mean_template(const Ensemble& ensemble, double coarse_spacing);
TriangleMesh build_sphere_template(const Ensemble& ensemble, int subdivision_level);

void write_atlas(const Atlas& atlas, const std::string& dir);
Atlas read_atlas(const std::string& dir);

}  // namespace ssm
