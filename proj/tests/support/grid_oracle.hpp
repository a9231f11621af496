#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ellipfit/point_cloud.hpp"

namespace testsupport {

// Brute-force certificate oracle for d = 2, n = 4: the mean-zero weight
// vectors form a 3-dimensional subspace, whose unit sphere is swept with a
// Fibonacci grid.  Returns the smallest lambda_max(sum_i z_i x_i x_i^T) seen;
// a negative value exhibits a concrete certificate, so the verdict
// "certificate exists" is grid_min < 0.
inline double grid_certificate_min(const ellip::PointCloud& cloud,
                                   int grid_points = 10000) {
  Eigen::MatrixXd basis(4, 3);
  basis.col(0) << 1, -1, 0, 0;
  basis.col(1) << 1, 1, -2, 0;
  basis.col(2) << 1, 1, 1, -3;
  basis.col(0) /= std::sqrt(2.0);
  basis.col(1) /= std::sqrt(6.0);
  basis.col(2) /= std::sqrt(12.0);

  const double pi = 4.0 * std::atan(1.0);
  const double golden = pi * (3.0 - std::sqrt(5.0));
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    double y = 1.0 - 2.0 * (i + 0.5) / grid_points;
    double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    double t = golden * i;
    Eigen::Vector3d c(r * std::cos(t), y, r * std::sin(t));
    Eigen::Vector4d z = basis * c;
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    for (int k = 0; k < 4; ++k) {
      Eigen::Vector2d x = cloud.points.row(k).transpose();
      m += z(k) * x * x.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m, Eigen::EigenvaluesOnly);
    best = std::min(best, es.eigenvalues().maxCoeff());
  }
  return best;
}

}  // namespace testsupport
