#include "ssm/particles.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ssm/generators.hpp"
#include "ssm/sdf.hpp"

namespace ssm {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Flatten one shape's particles into row `row` of x as [x0 y0 z0 x1 ...].
void flatten_into(const Points& p, MatX& x, int row) {
  const int m = static_cast<int>(p.rows());
  for (int i = 0; i < m; ++i)
    for (int d = 0; d < 3; ++d) x(row, 3 * i + d) = p(i, d);
}

// Eigenvalues of the covariance via the N x N Gram matrix, divisor N-1,
// descending, clamped to >= 0. Returns min(N-1, dM) values; the remaining
// covariance eigenvalues are exactly zero.
VecX gram_spectrum(const MatX& y) {
  const int n = static_cast<int>(y.rows());
  const int dm = static_cast<int>(y.cols());
  MatX gram = y * y.transpose() / double(n - 1);
  Eigen::SelfAdjointEigenSolver<MatX> eig(gram);
  if (eig.info() != Eigen::Success) throw std::runtime_error("particles: Gram eigendecomposition failed");
  const int r = std::min(n - 1, dm);
  VecX out(r);
  for (int i = 0; i < r; ++i) out(i) = std::max(0.0, eig.eigenvalues()(n - 1 - i));
  return out;
}

MatX centered_flat(const ParticleSystem& system) {
  const int n = system.n();
  const int dm = 3 * system.m();
  MatX x(n, dm);
  for (int k = 0; k < n; ++k) flatten_into(system.positions[k], x, k);
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  return x;
}

VecX nearest_neighbor_distances(const Points& p) {
  const int m = static_cast<int>(p.rows());
  VecX out(m);
  for (int i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      best = std::min(best, (p.row(i) - p.row(j)).norm());
    }
    out(i) = best;
  }
  return out;
}

struct QParts {
  double h = 0.0;
  double s = 0.0;
  double q = 0.0;
};

// Per-level optimizer state over all shapes, samples held in id order so the
// result does not depend on the order shapes were loaded.
class Optimizer {
 public:
  Optimizer(const Ensemble& ensemble, const PbmConfig& config)
      : ens_(ensemble), cfg_(config) {
    if (!is_power_of_two(cfg_.target_particles))
      throw std::invalid_argument("particles: target particle count must be a power of two");
    if (cfg_.iterations_per_level < 1)
      throw std::invalid_argument("particles: iterations_per_level must be positive");
    if (cfg_.relative_weight < 0.0)
      throw std::invalid_argument("particles: relative_weight must be non-negative");
    if (ens_.n() < 2) throw std::invalid_argument("particles: need at least two shapes");
    order_.resize(ens_.n());
    std::iota(order_.begin(), order_.end(), 0);
    std::sort(order_.begin(), order_.end(),
              [&](int a, int b) { return ens_.samples[a].id < ens_.samples[b].id; });
    for (int k : order_) {
      const ShapeSample& s = ens_.samples[k];
      if (!s.has_sdf) throw std::invalid_argument("particles: sample '" + s.id + "' has no distance volume");
      shapes_.push_back(&s);
      areas_.push_back(s.mesh.total_area());
    }
    mean_area_ = std::accumulate(areas_.begin(), areas_.end(), 0.0) / areas_.size();
    spacing_ = shapes_[0]->sdf.spacing;
    alpha_base_ = cfg_.alpha0 > 0.0 ? cfg_.alpha0 : 0.01 * spacing_ * spacing_;
  }

  ParticleSystem run(ParticleTrace* trace) {
    seed_first_particle();
    optimize_level();
    while (sys_.m() < cfg_.target_particles) {
      split();
      optimize_level();
    }
    if (trace) *trace = trace_;
    return sys_;
  }

  // Map internal (id-ordered) particle sets back to ensemble order.
  ParticleSystem reorder_to_input(const ParticleSystem& canonical) const {
    ParticleSystem out;
    out.positions.resize(ens_.n());
    for (int k = 0; k < ens_.n(); ++k) out.positions[order_[k]] = canonical.positions[k];
    return out;
  }

 private:
  double ideal_spacing(int m) const { return std::sqrt(mean_area_ / std::max(1, m)); }

  Vec3 project_or_reseed(const Vec3& p, int shape) {
    const ShapeSample& s = *shapes_[shape];
    try {
      if (s.sdf.contains(p, 1)) return project_to_surface(p, s.sdf);
    } catch (const std::exception&) {
      // fall through to reseed
    }
    // Reseed at a random surface point when the projection cannot recover.
    for (int attempt = 0; attempt < 32; ++attempt) {
      int v = static_cast<int>(rng_() % static_cast<uint64_t>(s.mesh.n_vertices()));
      try {
        return project_to_surface(s.mesh.vertex(v), s.sdf);
      } catch (const std::exception&) {
        continue;
      }
    }
    throw std::runtime_error("particles: cannot place particle on surface of sample '" + s.id + "'");
  }

  void seed_first_particle() {
    rng_.seed(split_seed(cfg_.seed, 1));
    Vec3 centroid = Vec3::Zero();
    for (const ShapeSample* s : shapes_) centroid += s->mesh.surface_centroid();
    centroid /= double(shapes_.size());
    sys_.positions.assign(shapes_.size(), Points(1, 3));
    for (size_t k = 0; k < shapes_.size(); ++k) {
      Vec3 p = project_or_reseed(centroid, static_cast<int>(k));
      sys_.positions[k].row(0) = p;
    }
  }

  void split() {
    const int m = sys_.m();
    level_ += 1;
    rng_.seed(split_seed(cfg_.seed, 1000 + level_));
    const double offset = 0.2 * ideal_spacing(2 * m);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // One offset direction per particle index, shared by every shape so the
    // split preserves correspondence.
    std::vector<Vec3> dirs(m);
    for (int i = 0; i < m; ++i) {
      Vec3 u;
      do {
        u = Vec3(gauss(rng_), gauss(rng_), gauss(rng_));
      } while (u.norm() < 1e-12);
      dirs[i] = u.normalized();
    }
    for (size_t k = 0; k < shapes_.size(); ++k) {
      Points next(2 * m, 3);
      next.topRows(m) = sys_.positions[k];
      for (int i = 0; i < m; ++i) {
        Vec3 child = Vec3(sys_.positions[k].row(i)) + offset * dirs[i];
        next.row(m + i) = project_or_reseed(child, static_cast<int>(k));
      }
      sys_.positions[k] = next;
    }
  }

  void refresh_bandwidths() {
    sigmas_.clear();
    const int m = sys_.m();
    for (size_t k = 0; k < shapes_.size(); ++k) {
      const double ideal = std::sqrt(areas_[k] / m);
      VecX nn = m >= 2 ? nearest_neighbor_distances(sys_.positions[k]) : VecX::Zero(m);
      for (int i = 0; i < m; ++i)
        nn(i) = std::clamp(nn(i), cfg_.bandwidth_clamp_lo * ideal, cfg_.bandwidth_clamp_hi * ideal);
      sigmas_.push_back(nn);
    }
  }

  QParts evaluate(const ParticleSystem& s) const {
    QParts parts;
    parts.h = entropy_of(s);
    if (s.m() >= 2) {
      for (size_t k = 0; k < s.positions.size(); ++k)
        parts.s += sampling_entropy(s.positions[k], sigmas_[k]);
    }
    parts.q = parts.h + cfg_.relative_weight * parts.s;
    return parts;
  }

  double entropy_of(const ParticleSystem& s) const {
    const int dm = 3 * s.m();
    MatX y = centered_flat(s);
    VecX lambda = gram_spectrum(y);
    double h = 0.0;
    for (int i = 0; i < lambda.size(); ++i) h += std::log(lambda(i) + alpha_);
    h += double(dm - lambda.size()) * std::log(alpha_);
    return 0.5 * h;
  }

  std::vector<Points> entropy_gradient() const { return ensemble_entropy_gradients(sys_, alpha_); }

  Points sampling_gradient(int k) const {
    return sampling_entropy_gradient(sys_.positions[k], sigmas_[k]);
  }

  void optimize_level() {
    alpha_ = alpha_base_ * std::pow(0.5, level_);
    refresh_bandwidths();
    QParts cur = evaluate(sys_);
    trace_.push_back({iter_, level_, cur.h, cur.s, cur.q});
    const double cap = 0.5 * ideal_spacing(sys_.m());
    double step = -1.0;  // chosen from the first gradient
    int stall = 0;
    for (int it = 0; it < cfg_.iterations_per_level; ++it) {
      std::vector<Points> grad = entropy_gradient();
      for (int k = 0; k < sys_.n(); ++k) {
        grad[k] += cfg_.relative_weight * sampling_gradient(k);
        // Remove the normal component so steps slide along the surface.
        for (int i = 0; i < sys_.m(); ++i) {
          Vec3 g = grad[k].row(i);
          Vec3 nrm = shapes_[k]->sdf.gradient(Vec3(sys_.positions[k].row(i)));
          double len = nrm.norm();
          if (len > 1e-12) {
            nrm /= len;
            g -= g.dot(nrm) * nrm;
          }
          grad[k].row(i) = g;
        }
      }
      double gmax = 0.0;
      for (const Points& g : grad) gmax = std::max(gmax, g.rowwise().norm().maxCoeff());
      if (gmax < 1e-14) break;
      if (step < 0.0 || step * gmax > cap) step = cap / gmax;

      bool accepted = false;
      for (int trial = 0; trial < 30 && !accepted; ++trial) {
        ParticleSystem cand;
        cand.positions.resize(sys_.n());
        bool valid = true;
        for (int k = 0; k < sys_.n() && valid; ++k) {
          cand.positions[k] = sys_.positions[k];
          for (int i = 0; i < sys_.m(); ++i) {
            Vec3 moved = Vec3(sys_.positions[k].row(i)) - step * Vec3(grad[k].row(i));
            const ShapeSample& sh = *shapes_[k];
            if (!sh.sdf.contains(moved, 1)) {
              valid = false;
              break;
            }
            try {
              cand.positions[k].row(i) = project_to_surface(moved, sh.sdf);
            } catch (const std::exception&) {
              valid = false;
              break;
            }
          }
        }
        if (valid) {
          QParts next = evaluate(cand);
          if (next.q < cur.q) {
            sys_ = std::move(cand);
            cur = next;
            iter_ += 1;
            trace_.push_back({iter_, level_, cur.h, cur.s, cur.q});
            accepted = true;
            step *= 1.5;
            if (step * gmax > cap) step = cap / gmax;
            break;
          }
        }
        step *= 0.5;
      }
      if (!accepted) {
        stall += 1;
        if (stall >= 2) break;  // no descent direction at this resolution
        step = cap / gmax;
      } else {
        stall = 0;
      }
    }
  }

  const Ensemble& ens_;
  PbmConfig cfg_;
  std::vector<int> order_;
  std::vector<const ShapeSample*> shapes_;
  std::vector<double> areas_;
  double mean_area_ = 0.0;
  double spacing_ = 0.0;
  double alpha_base_ = 0.0;
  double alpha_ = 0.0;
  int level_ = 0;
  int iter_ = 0;
  ParticleSystem sys_;
  std::vector<VecX> sigmas_;
  std::mt19937_64 rng_;
  ParticleTrace trace_;
};

}  // namespace

double ensemble_entropy(const ParticleSystem& system, double alpha) {
  if (system.n() < 2) throw std::invalid_argument("ensemble_entropy: need at least two shapes");
  if (alpha <= 0.0) throw std::invalid_argument("ensemble_entropy: alpha must be positive");
  const int dm = 3 * system.m();
  MatX y = centered_flat(system);
  VecX lambda = gram_spectrum(y);
  double h = 0.0;
  for (int i = 0; i < lambda.size(); ++i) h += std::log(lambda(i) + alpha);
  h += double(dm - lambda.size()) * std::log(alpha);
  return 0.5 * h;
}

double sampling_entropy(const Points& particles, const VecX& sigmas) {
  const int m = static_cast<int>(particles.rows());
  if (m < 2) throw std::invalid_argument("sampling_entropy: need at least two particles");
  if (sigmas.size() != m) throw std::invalid_argument("sampling_entropy: one bandwidth per particle required");
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    if (!(sigmas(i) > 0.0)) throw std::invalid_argument("sampling_entropy: bandwidths must be positive");
    double denom = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      double d2 = std::max((particles.row(i) - particles.row(j)).squaredNorm(), 1e-18);
      denom += std::exp(-d2 / (2.0 * sigmas(i) * sigmas(i)));
    }
    s += std::log(std::max(denom, 1e-300)) - 3.0 * std::log(sigmas(i));
  }
  return s;
}

double sampling_entropy(const Points& particles) {
  VecX nn = nearest_neighbor_distances(particles);
  for (int i = 0; i < nn.size(); ++i) nn(i) = std::max(nn(i), 1e-9);
  return sampling_entropy(particles, nn);
}

// d(H)/d(positions): (G + alpha I)^-1 Y / (N-1) with the across-shape
// centering projector applied, one gradient block per shape.
std::vector<Points> ensemble_entropy_gradients(const ParticleSystem& system, double alpha) {
  if (system.n() < 2)
    throw std::invalid_argument("ensemble_entropy_gradients: need at least two shapes");
  if (alpha <= 0.0) throw std::invalid_argument("ensemble_entropy_gradients: alpha must be positive");
  const int n = system.n();
  const int m = system.m();
  MatX y = centered_flat(system);
  MatX gram = y * y.transpose() / double(n - 1);
  gram.diagonal().array() += alpha;
  MatX g = gram.llt().solve(y) / double(n - 1);
  Eigen::RowVectorXd colmean = g.colwise().mean();
  g.rowwise() -= colmean;
  std::vector<Points> out(n, Points(m, 3));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < m; ++i)
      for (int d = 0; d < 3; ++d) out[k](i, d) = g(k, 3 * i + d);
  return out;
}

// d(S_n)/d(particle positions), bandwidths frozen.
Points sampling_entropy_gradient(const Points& particles, const VecX& sigmas) {
  const int m = static_cast<int>(particles.rows());
  if (sigmas.size() != m)
    throw std::invalid_argument("sampling_entropy_gradient: one bandwidth per particle required");
  Points grad = Points::Zero(m, 3);
  if (m < 2) return grad;
  MatX kernel(m, m);  // kernel(i, j) = exp(-d_ij^2 / (2 sigma_i^2))
  VecX denom = VecX::Zero(m);
  for (int i = 0; i < m; ++i) {
    if (!(sigmas(i) > 0.0))
      throw std::invalid_argument("sampling_entropy_gradient: bandwidths must be positive");
    for (int j = 0; j < m; ++j) {
      if (j == i) {
        kernel(i, j) = 0.0;
        continue;
      }
      double d2 = std::max((particles.row(i) - particles.row(j)).squaredNorm(), 1e-18);
      kernel(i, j) = std::exp(-d2 / (2.0 * sigmas(i) * sigmas(i)));
      denom(i) += kernel(i, j);
    }
    denom(i) = std::max(denom(i), 1e-300);
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      double w = kernel(i, j) / (denom(i) * sigmas(i) * sigmas(i)) +
                 kernel(j, i) / (denom(j) * sigmas(j) * sigmas(j));
      grad.row(i) -= w * (particles.row(i) - particles.row(j));
    }
  }
  return grad;
}

ParticleSystem initialize_particles(const Ensemble& ensemble, const PbmConfig& config) {
  Optimizer opt(ensemble, config);
  ParticleSystem canonical = opt.run(nullptr);
  return opt.reorder_to_input(canonical);
}

CorrespondenceModel optimize_particles(const Ensemble& ensemble, const PbmConfig& config,
                                       ParticleTrace* trace) {
  Optimizer opt(ensemble, config);
  ParticleSystem canonical = opt.run(trace);
  ParticleSystem sys = opt.reorder_to_input(canonical);
  CorrespondenceModel model;
  model.method = "particles";
  for (const ShapeSample& s : ensemble.samples) model.ids.push_back(s.id);
  model.points = std::move(sys.positions);
  model.validate();
  return model;
}

void write_particle_trace(const ParticleTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "iter,ensemble_entropy,sampling_term,objective\n";
  for (const ParticleTraceRow& row : trace)
    out << row.iter << ',' << row.ensemble_entropy << ',' << row.sampling_term << ',' << row.objective
        << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace ssm
