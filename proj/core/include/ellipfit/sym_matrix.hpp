#pragma once

#include <Eigen/Core>

#include "ellipfit/errors.hpp"

namespace ellip {

// Dense symmetric matrix.  The invariant m(i,j) == m(j,i) holds exactly (not
// just up to rounding): factories mirror the lower triangle and set() writes
// both entries, so downstream symmetric eigensolvers never see a skew part.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Eigen::Index dim)
      : m_(Eigen::MatrixXd::Zero(dim, dim)) {}

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix from_diagonal(const Eigen::VectorXd& diag);

  // Builds from the lower triangle of an arbitrary square matrix; the upper
  // triangle of the argument is ignored.
  static SymMatrix mirror_lower(const Eigen::MatrixXd& m);

  Eigen::Index dim() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  void set(Eigen::Index i, Eigen::Index j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  const Eigen::MatrixXd& mat() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

// Coordinates of a symmetric matrix in an orthonormal basis of the space of
// symmetric d x d matrices: first the d(d-1)/2 off-diagonal entries (a < b,
// row-major) scaled by sqrt(2), then the d diagonal entries.  With this
// scaling the Euclidean inner product of two flattenings equals the trace
// inner product of the matrices.
struct FlatVector {
  Eigen::Index d = 0;
  Eigen::VectorXd coords;

  // Infers d from the length; throws InvalidShapeError if the length is not
  // of the form d(d+1)/2.
  static FlatVector from_coords(Eigen::VectorXd coords);
};

inline Eigen::Index flat_dim(Eigen::Index d) { return d * (d + 1) / 2; }

FlatVector flatten(const SymMatrix& m);
SymMatrix unflatten(const FlatVector& v);

// flatten(x x^T) without forming the outer product; hot path for ensembles.
Eigen::VectorXd flatten_outer(const Eigen::VectorXd& x);

// flatten of the identity: zeros on the off-diagonal block, ones on the
// diagonal block.
Eigen::VectorXd flatten_identity(Eigen::Index d);

}  // namespace ellip
