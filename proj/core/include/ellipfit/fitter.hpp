#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "ellipfit/linalg.hpp"
#include "ellipfit/point_cloud.hpp"
#include "ellipfit/sym_matrix.hpp"

namespace ellip::fitter {

// Gram matrix of the squared direction overlaps: theta(i,j) = <w_i, w_j>^2.
struct KernelGram {
  SymMatrix theta;
};

KernelGram kernel_gram(const PointCloud& cloud);

// Mean of the kernel Gram matrix over uniform directions:
// (1 - 1/d) I_n + (1/d) 1 1^T.
SymMatrix expected_kernel_gram(Eigen::Index n, Eigen::Index d);

struct Tolerances {
  double residual = 1e-8;  // allowed |x_i^T S x_i - 1|
  double psd = 1e-8;       // allowed negative part of lambda_min(S)
};

enum class FailureReason {
  none,
  theta_not_pd,        // kernel Gram not positive definite (or degenerate d_i)
  residual_violation,  // solved, but a constraint residual exceeds tolerance
  psd_violation,       // solved and feasible, but S has a negative eigenvalue
};

const char* to_string(FailureReason r);

// Outcome of the identity-perturbation construction S = I + sum_i q_i x_i x_i^T
// with the weights chosen so every x_i lands exactly on the ellipsoid
// boundary x^T S x = 1 (up to solver roundoff).
struct FitResult {
  Eigen::VectorXd q;
  SymMatrix sigma;
  double residual_max = 0.0;
  double lambda_min_sigma = 0.0;
  bool success = false;
  // 1 / lambda_min(theta); filled only when requested, since it costs a
  // dense eigendecomposition of an n x n matrix.
  std::optional<double> theta_inv_op_norm;
};

// Throws NotPositiveDefiniteError if the kernel Gram cannot be factorized and
// DegenerateInputError if some |x_i|^2 < 1e-12.
FitResult solve_identity_perturbation(const PointCloud& cloud,
                                      const Tolerances& tol = {},
                                      bool with_theta_diagnostic = false);

struct FitVerdict {
  bool success = false;
  double residual_max = 0.0;
  double lambda_min = 0.0;
};

// Checks an arbitrary candidate S against the exact-interpolation and
// positive-semidefiniteness conditions.
FitVerdict check_fit(const SymMatrix& sigma, const PointCloud& cloud,
                     const Tolerances& tol = {});

// Rank of the span of the flattened outer products x_i x_i^T, i.e. the number
// of independent linear constraints the cloud imposes on S.
Eigen::Index constraint_rank(const PointCloud& cloud);

// One fully reproducible experiment: sample a Gaussian cloud from the stream
// determined by (master_seed, trial_index), run the construction, classify.
struct TrialRecord {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  std::int64_t trial_index = 0;
  bool success = false;
  double lambda_min_sigma = 0.0;
  double residual_max = 0.0;
  FailureReason failure = FailureReason::none;
};

TrialRecord fit_trial(Eigen::Index d, Eigen::Index n,
                      std::uint64_t master_seed, std::int64_t trial_index,
                      const Tolerances& tol = {});

}  // namespace ellip::fitter
