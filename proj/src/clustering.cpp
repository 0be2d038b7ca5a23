#include "ssm/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "ssm/generators.hpp"
#include "ssm/registration.hpp"

namespace ssm {

namespace {

double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

std::vector<int> assign_labels(const MatX& rows, const MatX& centers) {
  std::vector<int> labels(rows.rows());
  for (int i = 0; i < rows.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int c = 0; c < centers.rows(); ++c) {
      double d = (rows.row(i) - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    labels[i] = arg;
  }
  return labels;
}

KMeansResult run_once(const MatX& rows, int k, std::mt19937_64& rng, int max_iterations) {
  const int n = static_cast<int>(rows.rows());
  // k-means++ seeding.
  MatX centers(k, rows.cols());
  centers.row(0) = rows.row(static_cast<int>(rng() % uint64_t(n)));
  VecX d2(n);
  for (int c = 1; c < k; ++c) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) best = std::min(best, (rows.row(i) - centers.row(j)).squaredNorm());
      d2(i) = best;
    }
    double total = d2.sum();
    int pick = 0;
    if (total <= 0.0) {
      pick = static_cast<int>(rng() % uint64_t(n));
    } else {
      double r = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = rows.row(pick);
  }

  std::vector<int> labels = assign_labels(rows, centers);
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Update step.
    MatX sums = MatX::Zero(k, rows.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(labels[i]) += rows.row(i);
      counts[labels[i]] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Reseed an emptied cluster at the point farthest from its center.
      int far = 0;
      double best = -1.0;
      for (int i = 0; i < n; ++i) {
        double d = (rows.row(i) - centers.row(labels[i])).squaredNorm();
        if (d > best) {
          best = d;
          far = i;
        }
      }
      centers.row(c) = rows.row(far);
    }
    std::vector<int> next = assign_labels(rows, centers);
    bool changed = next != labels;
    labels = std::move(next);
    if (!changed) break;
  }

  KMeansResult result;
  result.labels = std::move(labels);
  result.centers = std::move(centers);
  for (int i = 0; i < n; ++i)
    result.inertia += (rows.row(i) - result.centers.row(result.labels[i])).squaredNorm();
  return result;
}

}  // namespace

KMeansResult kmeans(const MatX& rows, int k, int restarts, uint64_t seed, int max_iterations) {
  const int n = static_cast<int>(rows.rows());
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  if (restarts < 1) throw std::invalid_argument("kmeans: need at least one restart");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(split_seed(seed, 100 + r));
    KMeansResult cand = run_once(rows, k, rng, max_iterations);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  // Renumber clusters by first appearance.
  std::map<int, int> remap;
  for (int& l : best.labels) {
    auto it = remap.find(l);
    if (it == remap.end()) it = remap.emplace(l, static_cast<int>(remap.size())).first;
    l = it->second;
  }
  MatX centers(best.centers.rows(), best.centers.cols());
  for (const auto& [old_label, new_label] : remap) centers.row(new_label) = best.centers.row(old_label);
  // Clusters that ended empty keep their original rows at the tail.
  int tail = static_cast<int>(remap.size());
  for (int c = 0; c < best.centers.rows(); ++c)
    if (!remap.count(c)) centers.row(tail++) = best.centers.row(c);
  best.centers = std::move(centers);
  return best;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: label vectors differ in length");
  if (a.empty()) throw std::invalid_argument("adjusted_rand_index: empty labelings");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
  }
  auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, count] : joint) sum_joint += choose2(count);
  for (const auto& [key, count] : ca) sum_a += choose2(count);
  for (const auto& [key, count] : cb) sum_b += choose2(count);
  double expected = sum_a * sum_b / choose2(n);
  double max_index = 0.5 * (sum_a + sum_b);
  if (std::abs(max_index - expected) < 1e-300) return 1.0;  // both partitions trivial
  return (sum_joint - expected) / (max_index - expected);
}

std::vector<int> cluster_correspondences(const CorrespondenceModel& model, int k, int restarts,
                                         uint64_t seed) {
  model.validate();
  auto [aligned, transforms] = procrustes_align(model);
  MatX rows(aligned.n(), 3 * aligned.m());
  for (int i = 0; i < aligned.n(); ++i) rows.row(i) = aligned.flatten(i).transpose();
  return kmeans(rows, k, restarts, seed).labels;
}

}  // namespace ssm
