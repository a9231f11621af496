#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "ellipfit/errors.hpp"
#include "ellipfit/fitter.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/point_cloud.hpp"
#include "ellipfit/random.hpp"
#include "ellipfit/stats.hpp"

using namespace ellip;
using namespace ellip::fitter;

namespace {

PointCloud cloud_from_rows(const Eigen::MatrixXd& rows) {
  return PointCloud::from_points(rows);
}

// Points s_i e_i on distinct axes; the solution is diagonal and exact.
PointCloud axis_cloud(Eigen::Index d, const std::vector<double>& scales) {
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(Eigen::Index(scales.size()), d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) pts(i, i) = scales[i];
  return PointCloud::from_points(pts);
}

}  // namespace

TEST_CASE("kernel gram matches the direct definition") {
  RandomStream s(20, 0);
  PointCloud cloud = sample_gaussian_cloud(6, 5, s);
  KernelGram gram = kernel_gram(cloud);
  for (Eigen::Index i = 0; i < cloud.n; ++i)
    for (Eigen::Index j = 0; j < cloud.n; ++j) {
      double ip = cloud.directions.row(i).dot(cloud.directions.row(j));
      CHECK(gram.theta(i, j) == doctest::Approx(ip * ip).epsilon(1e-14));
    }
  CHECK(gram.theta(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("expected kernel gram entries") {
  SymMatrix mean = expected_kernel_gram(4, 10);
  CHECK(mean(0, 0) == doctest::Approx(1.0));
  CHECK(mean(0, 3) == doctest::Approx(0.1));
  CHECK(mean(2, 1) == doctest::Approx(0.1));
}

TEST_CASE("single point closed form") {
  RandomStream s(21, 0);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd pts(1, 7);
    pts.row(0) = s.normal_vector(7).transpose();
    PointCloud cloud = cloud_from_rows(pts);
    double d1 = cloud.norms_sq(0);

    FitResult fit = solve_identity_perturbation(cloud);
    CHECK(fit.q.size() == 1);
    CHECK(fit.q(0) == doctest::Approx((1.0 - d1) / (d1 * d1)).epsilon(1e-10));
    CHECK(fit.residual_max <= 1e-10);
    CHECK(fit.lambda_min_sigma ==
          doctest::Approx(std::min(1.0, 1.0 / d1)).epsilon(1e-10));
    CHECK(fit.success);
  }
}

TEST_CASE("axis-aligned points are fitted exactly by a diagonal matrix") {
  PointCloud cloud = axis_cloud(5, {2.0, 0.5, 1.25});
  FitResult fit = solve_identity_perturbation(cloud);
  CHECK(fit.success);
  CHECK(fit.residual_max <= 1e-12);
  // Theta = I, so q_i = (1/s_i^2 - 1)/s_i^2 and Sigma has 1/s_i^2 on the
  // touched axes and 1 elsewhere.
  for (Eigen::Index i = 0; i < cloud.n; ++i) {
    double di = cloud.norms_sq(i);
    CHECK(fit.q(i) == doctest::Approx((1.0 / di - 1.0) / di).epsilon(1e-12));
    CHECK(fit.sigma(i, i) == doctest::Approx(1.0 / di).epsilon(1e-12));
  }
  CHECK(fit.sigma(3, 3) == doctest::Approx(1.0));
  CHECK(fit.sigma(0, 1) == doctest::Approx(0.0));
  CHECK(fit.lambda_min_sigma == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("theta diagnostic is filled only on request") {
  PointCloud cloud = axis_cloud(4, {1.0, 2.0});
  FitResult plain = solve_identity_perturbation(cloud);
  CHECK(!plain.theta_inv_op_norm.has_value());
  FitResult with = solve_identity_perturbation(cloud, {},
                                               /*with_theta_diagnostic=*/true);
  REQUIRE(with.theta_inv_op_norm.has_value());
  // Orthogonal directions give Theta = I.
  CHECK(*with.theta_inv_op_norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fit is equivariant under rotation and permutation") {
  RandomStream s(22, 0);
  PointCloud cloud = sample_gaussian_cloud(8, 6, s);
  FitResult fit = solve_identity_perturbation(cloud);

  Eigen::MatrixXd rot = random_orthogonal(8, s);
  PointCloud rotated = cloud_from_rows(cloud.points * rot);
  FitResult rfit = solve_identity_perturbation(rotated);
  CHECK((rfit.q - fit.q).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(rfit.lambda_min_sigma == doctest::Approx(fit.lambda_min_sigma).epsilon(1e-9));
  // Sigma transforms as R^T Sigma R.
  Eigen::MatrixXd expected = rot.transpose() * fit.sigma.mat() * rot;
  CHECK((rfit.sigma.mat() - expected).cwiseAbs().maxCoeff() <= 1e-9);

  Eigen::MatrixXd perm = cloud.points;
  perm.row(0).swap(perm.row(3));
  FitResult pfit = solve_identity_perturbation(cloud_from_rows(perm));
  CHECK(pfit.q(0) == doctest::Approx(fit.q(3)).epsilon(1e-12));
  CHECK(pfit.q(3) == doctest::Approx(fit.q(0)).epsilon(1e-12));
  CHECK((pfit.sigma.mat() - fit.sigma.mat()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("check_fit agrees with the solver's own verdict") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    auto stream = RandomStream::for_purpose(23, purpose::kFitTrial, trial);
    PointCloud cloud = sample_gaussian_cloud(12, 20, stream);
    FitResult fit = solve_identity_perturbation(cloud);
    FitVerdict verdict = check_fit(fit.sigma, cloud);
    CHECK(verdict.success == fit.success);
    CHECK(verdict.residual_max == doctest::Approx(fit.residual_max).epsilon(1e-12));
    CHECK(verdict.lambda_min == doctest::Approx(fit.lambda_min_sigma).epsilon(1e-12));
  }
}

TEST_CASE("check_fit rejects bad candidates") {
  PointCloud cloud = axis_cloud(3, {1.0, 1.0});
  FitVerdict identity_ok = check_fit(SymMatrix::identity(3), cloud);
  CHECK(identity_ok.success);

  Eigen::VectorXd shrunk(3);
  shrunk << 0.5, 1.0, 1.0;
  FitVerdict bad = check_fit(SymMatrix::from_diagonal(shrunk), cloud);
  CHECK(!bad.success);
  CHECK(bad.residual_max == doctest::Approx(0.5));

  Eigen::VectorXd indef(3);
  indef << 1.0, 1.0, -0.5;
  FitVerdict notpsd = check_fit(SymMatrix::from_diagonal(indef), cloud);
  CHECK(!notpsd.success);
  CHECK(notpsd.lambda_min == doctest::Approx(-0.5));
}

TEST_CASE("duplicate directions make the kernel gram singular") {
  Eigen::MatrixXd pts(2, 4);
  pts.row(0) = Eigen::RowVector4d(1, 0, 0, 0);
  pts.row(1) = Eigen::RowVector4d(2, 0, 0, 0);
  CHECK_THROWS_AS(solve_identity_perturbation(cloud_from_rows(pts)),
                  NotPositiveDefiniteError);
}

TEST_CASE("near-zero points are rejected before the solve") {
  Eigen::MatrixXd pts(2, 3);
  pts << 1, 0, 0, 1e-8, 0, 0;
  CHECK_THROWS_AS(solve_identity_perturbation(cloud_from_rows(pts)),
                  DegenerateInputError);
}

TEST_CASE("constraint rank saturates at d(d+1)/2") {
  RandomStream s(24, 0);
  PointCloud small = sample_gaussian_cloud(3, 4, s);
  CHECK(constraint_rank(small) == 4);
  PointCloud big = sample_gaussian_cloud(3, 10, s);
  CHECK(constraint_rank(big) == 6);
}

TEST_CASE("fit_trial replays bit-identically") {
  TrialRecord a = fit_trial(15, 30, 99, 4);
  TrialRecord b = fit_trial(15, 30, 99, 4);
  CHECK(a.success == b.success);
  CHECK(a.lambda_min_sigma == b.lambda_min_sigma);
  CHECK(a.residual_max == b.residual_max);
  CHECK(a.failure == b.failure);
  CHECK(a.d == 15);
  CHECK(a.n == 30);
  CHECK(a.trial_index == 4);

  bool any_diff = false;
  for (std::int64_t t = 0; t < 5; ++t)
    if (fit_trial(15, 30, 99, t).lambda_min_sigma != a.lambda_min_sigma)
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("success frequency collapses past the ansatz range") {
  const Eigen::Index d = 30;
  auto freq = [&](Eigen::Index n) {
    int ok = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t)
      ok += fit_trial(d, n, 7, t).success ? 1 : 0;
    return double(ok) / trials;
  };
  double sparse = freq(45);   // n ~ d^2/20
  double dense = freq(270);   // n ~ 0.3 d^2
  CHECK(sparse >= 0.9);
  CHECK(dense <= 0.1);
}

TEST_CASE("dense clouds fail with a definiteness violation, not a residual one") {
  auto stream = RandomStream::for_purpose(25, purpose::kFitTrial, 0);
  PointCloud cloud = sample_gaussian_cloud(10, 30, stream);
  FitResult fit = solve_identity_perturbation(cloud);
  // Exact interpolation holds whenever the solve goes through; failure at
  // this density means Sigma lost positive semidefiniteness.
  CHECK(fit.residual_max <= 1e-8);
  if (!fit.success) CHECK(fit.lambda_min_sigma < -1e-8);
}

TEST_CASE("failure reasons have stable names") {
  CHECK(std::string(to_string(FailureReason::none)) == "none");
  CHECK(std::string(to_string(FailureReason::theta_not_pd)) == "theta_not_pd");
  CHECK(std::string(to_string(FailureReason::residual_violation)) ==
        "residual_violation");
  CHECK(std::string(to_string(FailureReason::psd_violation)) == "psd_violation");
}
