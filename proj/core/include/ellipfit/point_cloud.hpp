#pragma once

#include <Eigen/Core>

#include "ellipfit/random.hpp"

namespace ellip {

// A batch of n points in R^d, stored as rows, together with the derived
// quantities every fitting step needs: squared norms d_i = |x_i|^2 and unit
// directions omega_i = x_i / |x_i|.
struct PointCloud {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  Eigen::MatrixXd points;      // n x d
  Eigen::VectorXd norms_sq;    // n
  Eigen::MatrixXd directions;  // n x d, unit rows

  // Throws DegenerateInputError if any point has zero or non-finite norm.
  static PointCloud from_points(Eigen::MatrixXd pts);
};

// n i.i.d. points from N(0, I_d / d).  With this scaling |x_i|^2
// concentrates around 1, so the identity is already an approximate fit.
PointCloud sample_gaussian_cloud(Eigen::Index d, Eigen::Index n,
                                 RandomStream& stream);

// Uniform direction on the unit sphere in R^d.
Eigen::VectorXd sample_sphere_direction(Eigen::Index d, RandomStream& stream);

// n uniform sphere directions as rows.
Eigen::MatrixXd sample_sphere_directions(Eigen::Index d, Eigen::Index n,
                                         RandomStream& stream);

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign
// convention fixed so the distribution is exactly Haar).
Eigen::MatrixXd random_orthogonal(Eigen::Index d, RandomStream& stream);

}  // namespace ellip
