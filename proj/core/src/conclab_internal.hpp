#pragma once

#include <cstdint>

#include "ellipfit/conclab.hpp"
#include "ellipfit/errors.hpp"
#include "ellipfit/point_cloud.hpp"

namespace ellip::conclab::internal {

// Gaussian cloud conditioned on the truncation event all |q~_i| <= 1.  The
// event depends only on the norms, so rejected clouds are simply thrown away
// and the accepted one keeps the unconditioned direction law.
inline PointCloud conditioned_cloud(Eigen::Index d, Eigen::Index n,
                                    RandomStream& stream,
                                    std::int64_t* resamples) {
  constexpr int kMaxAttempts = 100000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    PointCloud cloud = sample_gaussian_cloud(d, n, stream);
    Eigen::VectorXd qt = qtilde(cloud);
    if (qt.cwiseAbs().maxCoeff() <= 1.0) return cloud;
    if (resamples) ++*resamples;
  }
  throw NumericError("conditioned_cloud: truncation event never held");
}

// Profile of the weighted squared overlaps in direction a:
// f(a) = sum_i w_i <omega_i, a>^2.
inline double direction_value(const Eigen::MatrixXd& directions,
                              const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& a) {
  return weights.dot((directions * a).array().square().matrix());
}

}  // namespace ellip::conclab::internal
