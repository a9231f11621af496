#include "ellipfit/sym_matrix.hpp"

#include <cmath>

namespace ellip {

SymMatrix SymMatrix::identity(Eigen::Index dim) {
  SymMatrix s;
  s.m_ = Eigen::MatrixXd::Identity(dim, dim);
  return s;
}

SymMatrix SymMatrix::from_diagonal(const Eigen::VectorXd& diag) {
  SymMatrix s;
  s.m_ = diag.asDiagonal();
  return s;
}

SymMatrix SymMatrix::mirror_lower(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw InvalidShapeError("mirror_lower: matrix must be square");
  SymMatrix s;
  s.m_ = m.selfadjointView<Eigen::Lower>();
  return s;
}

FlatVector FlatVector::from_coords(Eigen::VectorXd coords) {
  // Solve d(d+1)/2 = len for integer d.
  Eigen::Index len = coords.size();
  auto d = static_cast<Eigen::Index>((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0 + 0.5);
  if (d <= 0 || flat_dim(d) != len)
    throw InvalidShapeError("FlatVector: length is not of the form d(d+1)/2");
  return FlatVector{d, std::move(coords)};
}

FlatVector flatten(const SymMatrix& m) {
  const Eigen::Index d = m.dim();
  const double root2 = std::sqrt(2.0);
  FlatVector v;
  v.d = d;
  v.coords.resize(flat_dim(d));
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) v.coords[k++] = root2 * m(a, b);
  for (Eigen::Index a = 0; a < d; ++a) v.coords[k++] = m(a, a);
  return v;
}

SymMatrix unflatten(const FlatVector& v) {
  const Eigen::Index d = v.d;
  if (v.coords.size() != flat_dim(d))
    throw InvalidShapeError("unflatten: coordinate length does not match d");
  const double inv_root2 = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd m(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) {
      double x = inv_root2 * v.coords[k++];
      m(a, b) = x;
      m(b, a) = x;
    }
  const Eigen::Index noff = d * (d - 1) / 2;
  for (Eigen::Index a = 0; a < d; ++a) m(a, a) = v.coords[noff + a];
  return SymMatrix::mirror_lower(m);
}

Eigen::VectorXd flatten_outer(const Eigen::VectorXd& x) {
  const Eigen::Index d = x.size();
  const double root2 = std::sqrt(2.0);
  Eigen::VectorXd out(flat_dim(d));
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) out[k++] = root2 * x[a] * x[b];
  for (Eigen::Index a = 0; a < d; ++a) out[k++] = x[a] * x[a];
  return out;
}

Eigen::VectorXd flatten_identity(Eigen::Index d) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(flat_dim(d));
  out.tail(d).setOnes();
  return out;
}

}  // namespace ellip
