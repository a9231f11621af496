#include "ellipfit/point_cloud.hpp"

#include <cmath>

#include <Eigen/QR>

#include "ellipfit/errors.hpp"

namespace ellip {

PointCloud PointCloud::from_points(Eigen::MatrixXd pts) {
  PointCloud c;
  c.d = pts.cols();
  c.n = pts.rows();
  c.points = std::move(pts);
  if (!c.points.allFinite())
    throw DegenerateInputError("PointCloud: non-finite coordinates");
  c.norms_sq = c.points.rowwise().squaredNorm();
  for (Eigen::Index i = 0; i < c.n; ++i)
    if (!(c.norms_sq[i] > 0.0))
      throw DegenerateInputError("PointCloud: point with zero norm");
  c.directions = c.points.array().colwise() /
                 c.norms_sq.array().sqrt();
  return c;
}

PointCloud sample_gaussian_cloud(Eigen::Index d, Eigen::Index n,
                                 RandomStream& stream) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) pts(i, j) = scale * stream.normal();
  return PointCloud::from_points(std::move(pts));
}

Eigen::VectorXd sample_sphere_direction(Eigen::Index d, RandomStream& stream) {
  Eigen::VectorXd g;
  double norm;
  do {
    g = stream.normal_vector(d);
    norm = g.norm();
  } while (!(norm > 0.0));
  return g / norm;
}

Eigen::MatrixXd sample_sphere_directions(Eigen::Index d, Eigen::Index n,
                                         RandomStream& stream) {
  Eigen::MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    out.row(i) = sample_sphere_direction(d, stream).transpose();
  return out;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index d, RandomStream& stream) {
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = stream.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // QR alone is not Haar: fix the sign ambiguity with the R diagonal.
  Eigen::VectorXd r_diag = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < d; ++j)
    if (r_diag[j] < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace ellip
