#include <cmath>

#include "ellipfit/conclab.hpp"
#include "ellipfit/errors.hpp"
#include "ellipfit/fitter.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/parallel.hpp"
#include "ellipfit/stats.hpp"

#include "conclab_internal.hpp"

namespace ellip::conclab {

double DeviationStats::median_dev_theta() const {
  return quantile(dev_theta, 0.5);
}

double DeviationStats::median_dev_inverse() const {
  return quantile(dev_inverse, 0.5);
}

double DeviationStats::freq_inv_norm_below(double cap) const {
  if (inv_op_norm.empty()) return 0.0;
  std::int64_t hits = 0;
  for (double v : inv_op_norm)
    if (v <= cap) ++hits;
  return static_cast<double>(hits) / static_cast<double>(trials);
}

DeviationStats gram_deviation(Eigen::Index d, Eigen::Index n,
                              std::int64_t trials, const RandomStream& base,
                              int threads) {
  if (d < 1 || n < 1 || trials < 1)
    throw PreconditionError("gram_deviation: d, n, trials must be >= 1");

  struct Slot {
    double dev_theta = 0.0;
    double dev_inverse = 0.0;
    double inv_norm = 0.0;
    bool factorized = false;
  };
  std::vector<Slot> slots(trials);

  const SymMatrix mean = fitter::expected_kernel_gram(n, d);
  const Eigen::MatrixXd inv_mean_target =
      Eigen::MatrixXd::Identity(n, n) -
      Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));

  parallel_for(trials, threads, [&](std::int64_t t) {
    RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    Eigen::MatrixXd dirs = sample_sphere_directions(d, n, stream);
    Eigen::MatrixXd overlaps = dirs * dirs.transpose();
    SymMatrix theta =
        SymMatrix::mirror_lower(overlaps.cwiseProduct(overlaps));

    Slot& s = slots[t];
    s.dev_theta = op_norm(SymMatrix::mirror_lower(theta.mat() - mean.mat()));
    try {
      Eigen::MatrixXd inv = spd_inverse(theta);
      s.dev_inverse =
          op_norm(SymMatrix::mirror_lower(inv - inv_mean_target));
      s.inv_norm = op_norm(SymMatrix::mirror_lower(inv));
      s.factorized = true;
    } catch (const NotPositiveDefiniteError&) {
      s.factorized = false;
    }
  });

  DeviationStats out;
  out.d = d;
  out.n = n;
  out.trials = trials;
  for (const Slot& s : slots) {
    out.dev_theta.push_back(s.dev_theta);
    if (s.factorized) {
      out.dev_inverse.push_back(s.dev_inverse);
      out.inv_op_norm.push_back(s.inv_norm);
    } else {
      ++out.factorization_failures;
    }
  }
  return out;
}

double infty_norm_ratio(const Eigen::VectorXd& v, double scale,
                        Eigen::Index d) {
  if (!(scale > 0.0))
    throw PreconditionError("infty_norm_ratio: scale must be positive");
  const double floor = scale * std::pow(static_cast<double>(d), -0.375);
  return v.cwiseAbs().maxCoeff() / floor;
}

InftyNormEvent infty_norm_event(Eigen::Index d, Eigen::Index n,
                                std::int64_t trials, const RandomStream& base,
                                const InftyNormOptions& opts, int threads) {
  if (trials < 1)
    throw PreconditionError("infty_norm_event: trials must be >= 1");
  if (opts.c_values.empty())
    throw PreconditionError("infty_norm_event: need at least one C value");

  std::vector<double> ratios(trials);
  std::vector<std::int64_t> resample_counts(trials, 0);

  parallel_for(trials, threads, [&](std::int64_t t) {
    RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    PointCloud cloud =
        internal::conditioned_cloud(d, n, stream, &resample_counts[t]);
    TruncatedWeights tw = truncate_center(qtilde(cloud), d);
    if (opts.identity_mode) {
      ratios[t] = infty_norm_ratio(tw.y, 1.0, d);
      return;
    }
    SymMatrix theta = fitter::kernel_gram(cloud).theta;
    Eigen::VectorXd solved = spd_solve(theta, tw.y);
    const double inv_norm = 1.0 / sym_eig_extremes(theta).min;
    ratios[t] = infty_norm_ratio(solved, inv_norm, d);
  });

  InftyNormEvent out;
  out.d = d;
  out.n = n;
  out.identity_mode = opts.identity_mode;
  out.c_values = opts.c_values;
  out.trials = trials;
  for (std::int64_t c : resample_counts) out.resamples += c;
  for (double c : opts.c_values) {
    std::int64_t hits = 0;
    for (double r : ratios)
      if (r <= c) ++hits;
    out.frequency.push_back(static_cast<double>(hits) /
                            static_cast<double>(trials));
  }
  return out;
}

}  // namespace ellip::conclab
