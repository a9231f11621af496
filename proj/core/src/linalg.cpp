#include "ellipfit/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ellipfit/errors.hpp"

namespace ellip {
namespace {

void require_finite(const SymMatrix& m, const char* who) {
  if (!m.mat().allFinite())
    throw NumericError(std::string(who) + ": matrix has non-finite entries");
}

Eigen::LLT<Eigen::MatrixXd> checked_llt(const SymMatrix& a, const char* who) {
  require_finite(a, who);
  Eigen::LLT<Eigen::MatrixXd> llt(a.mat());
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefiniteError(std::string(who) +
                                   ": Cholesky factorization failed");
  // LLT can "succeed" on a nearly singular matrix with tiny pivots; reject
  // those too so callers never divide by numerical noise.
  const Eigen::Index n = a.dim();
  const double scale = a.mat().trace() / static_cast<double>(n);
  const double floor_sq = 1e-12 * scale;
  double min_pivot_sq = llt.matrixLLT().diagonal().minCoeff();
  min_pivot_sq *= min_pivot_sq;
  if (!(min_pivot_sq >= floor_sq))
    throw NotPositiveDefiniteError(std::string(who) +
                                   ": pivot below relative floor");
  return llt;
}

}  // namespace

EigExtremes sym_eig_extremes(const SymMatrix& m) {
  require_finite(m, "sym_eig_extremes");
  if (m.dim() == 0) throw InvalidShapeError("sym_eig_extremes: empty matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat(),
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericError("sym_eig_extremes: eigensolver did not converge");
  const auto& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

double lambda_max_with_vector(const SymMatrix& m, Eigen::VectorXd* eigvec) {
  require_finite(m, "lambda_max_with_vector");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat());
  if (es.info() != Eigen::Success)
    throw NumericError("lambda_max_with_vector: eigensolver did not converge");
  const Eigen::Index last = m.dim() - 1;
  if (eigvec) *eigvec = es.eigenvectors().col(last);
  return es.eigenvalues()(last);
}

double op_norm(const SymMatrix& m) {
  EigExtremes e = sym_eig_extremes(m);
  return std::max(std::abs(e.min), std::abs(e.max));
}

Eigen::VectorXd spd_solve(const SymMatrix& a, const Eigen::VectorXd& b) {
  if (a.dim() != b.size())
    throw InvalidShapeError("spd_solve: dimension mismatch");
  return checked_llt(a, "spd_solve").solve(b);
}

Eigen::MatrixXd spd_solve_many(const SymMatrix& a, const Eigen::MatrixXd& b) {
  if (a.dim() != b.rows())
    throw InvalidShapeError("spd_solve_many: dimension mismatch");
  return checked_llt(a, "spd_solve_many").solve(b);
}

Eigen::MatrixXd spd_inverse(const SymMatrix& a) {
  return checked_llt(a, "spd_inverse")
      .solve(Eigen::MatrixXd::Identity(a.dim(), a.dim()));
}

}  // namespace ellip
