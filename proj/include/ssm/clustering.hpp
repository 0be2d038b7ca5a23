#pragma once

#include <cstdint>
#include <vector>

#include "ssm/pdm.hpp"
#include "ssm/types.hpp"

namespace ssm {

struct KMeansResult {
  std::vector<int> labels;
  MatX centers;  // k x dim
  double inertia = 0.0;
};

// Lloyd iterations with k-means++ seeding and restarts; an emptied cluster is
// reseeded at the point farthest from its assigned center. Labels are
// renumbered by first appearance so the output is stable.
KMeansResult kmeans(const MatX& rows, int k, int restarts, uint64_t seed, int max_iterations = 100);

// Agreement between two labelings, corrected for chance; 1 for identical
// partitions, about 0 for independent ones.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Clusters subjects by their aligned correspondence vectors.
std::vector<int> cluster_correspondences(const CorrespondenceModel& model, int k, int restarts,
                                         uint64_t seed);

}  // namespace ssm
