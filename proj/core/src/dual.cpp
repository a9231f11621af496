#include "ellipfit/dual.hpp"

#include <cmath>
#include <limits>

#include "ellipfit/errors.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/parallel.hpp"

namespace ellip::dual {
namespace {

SymMatrix weighted_outer_sum(const Eigen::VectorXd& z,
                             const PointCloud& cloud) {
  Eigen::MatrixXd m =
      cloud.points.transpose() * z.asDiagonal() * cloud.points;
  return SymMatrix::mirror_lower(m);
}

// Center to mean zero and scale to the unit sphere; returns false when the
// projection collapses to (numerically) nothing.
bool project_mean_zero_unit(Eigen::VectorXd& z) {
  z.array() -= z.mean();
  double norm = z.norm();
  if (!(norm > 1e-14)) return false;
  z /= norm;
  return true;
}

struct RestartOutcome {
  Eigen::VectorXd best_z;
  double best_lambda = std::numeric_limits<double>::infinity();
  std::vector<double> lambda_path;  // lambda_max at each iterate
};

RestartOutcome run_restart(const PointCloud& cloud, const SearchOptions& opts,
                           RandomStream stream) {
  RestartOutcome out;
  out.lambda_path.reserve(opts.max_iters);

  Eigen::VectorXd z = stream.normal_vector(cloud.n);
  if (!project_mean_zero_unit(z)) {
    // Degenerate initialization (all coordinates equal); fall back to a
    // deterministic mean-zero direction.
    z = Eigen::VectorXd::Zero(cloud.n);
    if (cloud.n >= 2) {
      z[0] = 1.0 / std::sqrt(2.0);
      z[1] = -1.0 / std::sqrt(2.0);
    }
  }

  for (int k = 1; k <= opts.max_iters; ++k) {
    Eigen::VectorXd u;
    double lambda = lambda_max_with_vector(weighted_outer_sum(z, cloud), &u);
    out.lambda_path.push_back(lambda);
    if (lambda < out.best_lambda) {
      out.best_lambda = lambda;
      out.best_z = z;
    }
    Eigen::VectorXd grad = (cloud.points * u).array().square();
    z -= (opts.step_scale / std::sqrt(static_cast<double>(k))) * grad;
    if (!project_mean_zero_unit(z)) break;
  }
  return out;
}

}  // namespace

DualVector certificate_check(const Eigen::VectorXd& z,
                             const PointCloud& cloud) {
  if (z.size() != cloud.n)
    throw InvalidShapeError("certificate_check: weight length != cloud size");
  DualVector out;
  out.z = z;
  out.sum_violation = std::abs(z.sum());
  out.lambda_max = sym_eig_extremes(weighted_outer_sum(z, cloud)).max;
  const double norm1 = z.cwiseAbs().sum();
  out.valid = z.norm() > 0.0 && out.sum_violation <= 1e-10 * norm1 &&
              out.lambda_max < -1e-10;
  return out;
}

SearchResult certificate_search(const PointCloud& cloud,
                                const SearchOptions& opts,
                                RandomStream& stream) {
  if (opts.max_iters < 1 || opts.restarts < 1)
    throw PreconditionError("certificate_search: iters and restarts >= 1");
  if (cloud.n < 2)
    throw PreconditionError("certificate_search: need at least two points");

  // One sub-seed per restart, drawn up front, so restarts can run on any
  // number of threads without changing the outcome.
  std::vector<RandomStream> restart_streams;
  restart_streams.reserve(opts.restarts);
  for (int r = 0; r < opts.restarts; ++r)
    restart_streams.emplace_back(stream.next_u64(), 0);

  std::vector<RestartOutcome> outcomes(opts.restarts);
  parallel_for(opts.restarts, opts.threads, [&](std::int64_t r) {
    outcomes[r] = run_restart(cloud, opts, restart_streams[r]);
  });

  SearchResult result;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    if (outcomes[r].best_lambda < best) {
      best = outcomes[r].best_lambda;
      result.best_restart = r;
    }
    for (double lambda : outcomes[r].lambda_path) {
      double prev = result.trace.empty()
                        ? std::numeric_limits<double>::infinity()
                        : result.trace.back();
      result.trace.push_back(std::min(prev, lambda));
    }
  }
  result.best = certificate_check(outcomes[result.best_restart].best_z, cloud);
  return result;
}

std::int64_t weak_duality_probe(const PointCloud& cloud,
                                const fitter::FitResult& fit,
                                std::int64_t num_probes,
                                RandomStream& stream) {
  if (!fit.success)
    throw PreconditionError("weak_duality_probe: requires a successful fit");
  const double scale = cloud.norms_sq.maxCoeff();
  std::int64_t violations = 0;
  for (std::int64_t p = 0; p < num_probes; ++p) {
    Eigen::VectorXd z = stream.normal_vector(cloud.n);
    z.array() -= z.mean();
    double lambda = sym_eig_extremes(weighted_outer_sum(z, cloud)).max;
    if (lambda < -1e-8 * z.norm() * scale) ++violations;
  }
  return violations;
}

}  // namespace ellip::dual
