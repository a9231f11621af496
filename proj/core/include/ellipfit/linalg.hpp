#pragma once

#include <Eigen/Core>

#include "ellipfit/sym_matrix.hpp"

namespace ellip {

struct EigExtremes {
  double min = 0.0;
  double max = 0.0;
};

// Extreme eigenvalues of a symmetric matrix (dense solver).  Throws
// NumericError on non-finite input.
EigExtremes sym_eig_extremes(const SymMatrix& m);

// Largest eigenvalue together with a unit eigenvector for it.
double lambda_max_with_vector(const SymMatrix& m, Eigen::VectorXd* eigvec);

// Operator (spectral) norm.
double op_norm(const SymMatrix& m);

// Solves A x = b for symmetric positive definite A by Cholesky.  Throws
// NotPositiveDefiniteError when the factorization fails or any pivot falls
// below the relative floor 1e-12 * trace(A)/dim.
Eigen::VectorXd spd_solve(const SymMatrix& a, const Eigen::VectorXd& b);
Eigen::MatrixXd spd_solve_many(const SymMatrix& a, const Eigen::MatrixXd& b);
Eigen::MatrixXd spd_inverse(const SymMatrix& a);

}  // namespace ellip
