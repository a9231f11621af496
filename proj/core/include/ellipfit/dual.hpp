#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ellipfit/fitter.hpp"
#include "ellipfit/point_cloud.hpp"
#include "ellipfit/random.hpp"

namespace ellip::dual {

// Candidate infeasibility certificate: weights z summing to zero for which
// M(z) = sum_i z_i x_i x_i^T is negative definite.  Such a z rules out any
// exact ellipsoid interpolant of the cloud.
struct DualVector {
  Eigen::VectorXd z;
  double sum_violation = 0.0;  // |sum_i z_i|
  double lambda_max = 0.0;     // largest eigenvalue of M(z)
  bool valid = false;
};

// Evaluates a candidate: valid iff z is (numerically) mean-zero, nonzero, and
// M(z) is strictly negative definite.
DualVector certificate_check(const Eigen::VectorXd& z, const PointCloud& cloud);

struct SearchOptions {
  int max_iters = 2000;
  int restarts = 8;
  double step_scale = 0.1;  // step at iteration k is step_scale / sqrt(k)
  int threads = 1;
};

struct SearchResult {
  DualVector best;
  int best_restart = -1;
  // Running minimum of lambda_max(M(z_k)) over the concatenated iterate
  // sequence, restart-major; non-increasing by construction.
  std::vector<double> trace;
};

// Projected subgradient descent on z -> lambda_max(M(z)) over the sphere of
// mean-zero weight vectors, restarted from independent random points.  The
// subgradient at z is (<x_i, u>^2)_i with u a top eigenvector of M(z).
// Restart streams are pre-derived from `stream` so the result does not
// depend on the thread count.
SearchResult certificate_search(const PointCloud& cloud,
                                const SearchOptions& opts,
                                RandomStream& stream);

// Draws random mean-zero weight vectors against a successful fit and counts
// how many produce lambda_max(M(z)) below the scale-aware floor
// -1e-8 * |z|_2 * max_i d_i.  Weak duality says the count must be zero.
// Throws PreconditionError when fit.success is false.
std::int64_t weak_duality_probe(const PointCloud& cloud,
                                const fitter::FitResult& fit,
                                std::int64_t num_probes, RandomStream& stream);

}  // namespace ellip::dual
