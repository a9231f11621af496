#include <algorithm>
#include <cmath>
#include <vector>

#include "ellipfit/conclab.hpp"
#include "ellipfit/errors.hpp"
#include "ellipfit/fitter.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/parallel.hpp"
#include "ellipfit/stats.hpp"

#include "conclab_internal.hpp"

namespace ellip::conclab {

DirectionDiagnostics direction_diagnostics(const PointCloud& cloud,
                                           const Eigen::VectorXd& weights,
                                           const Eigen::VectorXd& a,
                                           double eta) {
  if (weights.size() != cloud.n)
    throw InvalidShapeError("direction_diagnostics: weight length != n");
  if (a.size() != cloud.d)
    throw InvalidShapeError("direction_diagnostics: direction length != d");
  if (std::abs(a.norm() - 1.0) > 1e-6)
    throw PreconditionError("direction_diagnostics: direction must be unit");
  if (!(eta > 0.0))
    throw PreconditionError("direction_diagnostics: eta must be positive");

  DirectionDiagnostics out;
  Eigen::VectorXd overlaps = cloud.directions * a;
  out.u = overlaps.array().square();
  for (Eigen::Index i = 0; i < cloud.n; ++i) {
    const double term = weights[i] * out.u[i];
    if (std::abs(overlaps[i]) > eta) {
      out.spike.push_back(i);
      out.f_spike += term;
    } else {
      out.f_bulk += term;
    }
  }
  out.f = out.f_spike + out.f_bulk;
  return out;
}

DirectionProfile direction_profile(Eigen::Index d, Eigen::Index n, double eta,
                                   int num_directions, std::int64_t trials,
                                   const RandomStream& base, int threads) {
  if (num_directions < 1 || trials < 1)
    throw PreconditionError("direction_profile: need directions and trials");

  struct TrialOut {
    std::vector<double> abs_f;
    std::vector<double> abs_spike;
    std::vector<double> abs_bulk;
    std::int64_t resamples = 0;
  };
  std::vector<TrialOut> slots(trials);

  parallel_for(trials, threads, [&](std::int64_t t) {
    TrialOut& slot = slots[t];
    RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    PointCloud cloud =
        internal::conditioned_cloud(d, n, stream, &slot.resamples);
    TruncatedWeights tw = truncate_center(qtilde(cloud), d);
    SymMatrix theta = fitter::kernel_gram(cloud).theta;
    Eigen::VectorXd weights = spd_solve(theta, tw.y);

    slot.abs_f.reserve(num_directions);
    for (int j = 0; j < num_directions; ++j) {
      Eigen::VectorXd a = sample_sphere_direction(d, stream);
      DirectionDiagnostics diag =
          direction_diagnostics(cloud, weights, a, eta);
      slot.abs_f.push_back(std::abs(diag.f));
      slot.abs_spike.push_back(std::abs(diag.f_spike));
      slot.abs_bulk.push_back(std::abs(diag.f_bulk));
    }
  });

  std::vector<double> all_f, all_spike, all_bulk;
  DirectionProfile out;
  for (const TrialOut& slot : slots) {
    out.resamples += slot.resamples;
    all_f.insert(all_f.end(), slot.abs_f.begin(), slot.abs_f.end());
    all_spike.insert(all_spike.end(), slot.abs_spike.begin(),
                     slot.abs_spike.end());
    all_bulk.insert(all_bulk.end(), slot.abs_bulk.begin(),
                    slot.abs_bulk.end());
  }
  out.d = d;
  out.n = n;
  out.eta = eta;
  out.trials = trials;
  out.num_directions = num_directions;
  out.max_abs_f = *std::max_element(all_f.begin(), all_f.end());
  out.p99_abs_f = quantile(all_f, 0.99);
  out.p99_abs_spike = quantile(all_spike, 0.99);
  out.p99_abs_bulk = quantile(all_bulk, 0.99);
  return out;
}

}  // namespace ellip::conclab
