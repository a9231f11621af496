#include "ellipfit/fitter.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "ellipfit/errors.hpp"

namespace ellip::fitter {

namespace {
constexpr double kDegenerateNormSq = 1e-12;
}

KernelGram kernel_gram(const PointCloud& cloud) {
  Eigen::MatrixXd overlaps = cloud.directions * cloud.directions.transpose();
  overlaps = overlaps.cwiseProduct(overlaps);
  return {SymMatrix::mirror_lower(overlaps)};
}

SymMatrix expected_kernel_gram(Eigen::Index n, Eigen::Index d) {
  const double off = 1.0 / static_cast<double>(d);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, off);
  m.diagonal().setOnes();
  return SymMatrix::mirror_lower(m);
}

const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::none: return "none";
    case FailureReason::theta_not_pd: return "theta_not_pd";
    case FailureReason::residual_violation: return "residual_violation";
    case FailureReason::psd_violation: return "psd_violation";
  }
  return "unknown";
}

FitResult solve_identity_perturbation(const PointCloud& cloud,
                                      const Tolerances& tol,
                                      bool with_theta_diagnostic) {
  for (Eigen::Index i = 0; i < cloud.n; ++i)
    if (cloud.norms_sq[i] < kDegenerateNormSq)
      throw DegenerateInputError(
          "solve_identity_perturbation: degenerate point norm");

  KernelGram gram = kernel_gram(cloud);

  // The boundary conditions x_i^T S x_i = 1 reduce to the n x n linear
  // system D Theta D q = 1 - D 1 in the weights, with D = diag(d_i).
  Eigen::VectorXd rhs =
      cloud.norms_sq.cwiseInverse() - Eigen::VectorXd::Ones(cloud.n);
  Eigen::VectorXd w = spd_solve(gram.theta, rhs);
  FitResult out;
  out.q = w.cwiseQuotient(cloud.norms_sq);

  Eigen::MatrixXd perturb = cloud.points.transpose() *
                            out.q.asDiagonal() * cloud.points;
  perturb.diagonal().array() += 1.0;
  out.sigma = SymMatrix::mirror_lower(perturb);

  FitVerdict verdict = check_fit(out.sigma, cloud, tol);
  out.residual_max = verdict.residual_max;
  out.lambda_min_sigma = verdict.lambda_min;
  out.success = verdict.success;

  if (with_theta_diagnostic) {
    EigExtremes e = sym_eig_extremes(gram.theta);
    out.theta_inv_op_norm = 1.0 / e.min;
  }
  return out;
}

FitVerdict check_fit(const SymMatrix& sigma, const PointCloud& cloud,
                     const Tolerances& tol) {
  if (sigma.dim() != cloud.d)
    throw InvalidShapeError("check_fit: sigma dimension != cloud dimension");
  FitVerdict v;
  Eigen::VectorXd quad = (cloud.points * sigma.mat())
                             .cwiseProduct(cloud.points)
                             .rowwise()
                             .sum();
  v.residual_max = (quad.array() - 1.0).abs().maxCoeff();
  v.lambda_min = sym_eig_extremes(sigma).min;
  v.success = v.residual_max <= tol.residual && v.lambda_min >= -tol.psd;
  return v;
}

Eigen::Index constraint_rank(const PointCloud& cloud) {
  Eigen::MatrixXd flats(cloud.n, flat_dim(cloud.d));
  for (Eigen::Index i = 0; i < cloud.n; ++i)
    flats.row(i) = flatten_outer(cloud.points.row(i)).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(flats);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = 1e-10 * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

TrialRecord fit_trial(Eigen::Index d, Eigen::Index n,
                      std::uint64_t master_seed, std::int64_t trial_index,
                      const Tolerances& tol) {
  TrialRecord rec;
  rec.d = d;
  rec.n = n;
  rec.trial_index = trial_index;

  RandomStream stream = RandomStream::for_purpose(
      master_seed, purpose::kFitTrial, static_cast<std::uint64_t>(trial_index));
  PointCloud cloud = sample_gaussian_cloud(d, n, stream);

  FitResult fit;
  try {
    fit = solve_identity_perturbation(cloud, tol);
  } catch (const NotPositiveDefiniteError&) {
    rec.failure = FailureReason::theta_not_pd;
    rec.lambda_min_sigma = std::numeric_limits<double>::quiet_NaN();
    rec.residual_max = std::numeric_limits<double>::quiet_NaN();
    return rec;
  } catch (const DegenerateInputError&) {
    rec.failure = FailureReason::theta_not_pd;
    rec.lambda_min_sigma = std::numeric_limits<double>::quiet_NaN();
    rec.residual_max = std::numeric_limits<double>::quiet_NaN();
    return rec;
  }

  rec.success = fit.success;
  rec.lambda_min_sigma = fit.lambda_min_sigma;
  rec.residual_max = fit.residual_max;
  if (fit.success) {
    rec.failure = FailureReason::none;
  } else if (fit.residual_max > tol.residual) {
    rec.failure = FailureReason::residual_violation;
  } else {
    rec.failure = FailureReason::psd_violation;
  }
  return rec;
}

}  // namespace ellip::fitter
