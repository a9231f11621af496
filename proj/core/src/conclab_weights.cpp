#include <cmath>
#include <functional>

#include "ellipfit/conclab.hpp"
#include "ellipfit/errors.hpp"

namespace ellip::conclab {
namespace {

constexpr double kDegenerateNormSq = 1e-12;

double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                            double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                              depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                              depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Density of z = chi^2_d / d at z > 0.
double z_density(double z, Eigen::Index d) {
  const double k = static_cast<double>(d);
  const double x = k * z;  // chi^2_d variable
  const double log_pdf = (0.5 * k - 1.0) * std::log(x) - 0.5 * x -
                         0.5 * k * std::log(2.0) - std::lgamma(0.5 * k);
  return k * std::exp(log_pdf);
}

}  // namespace

Eigen::VectorXd qtilde(const PointCloud& cloud) {
  for (Eigen::Index i = 0; i < cloud.n; ++i)
    if (cloud.norms_sq[i] < kDegenerateNormSq)
      throw DegenerateInputError("qtilde: degenerate point norm");
  return cloud.norms_sq.cwiseInverse().array() - 1.0;
}

double expected_truncated_qtilde(Eigen::Index d) {
  if (d < 3)
    throw PreconditionError("expected_truncated_qtilde: requires d >= 3");
  // |q~| <= 1 is exactly z >= 1/2 (q~ >= -1 always).  Integrate the density
  // far enough into the upper tail that the remainder is below the
  // quadrature tolerance.
  const double k = static_cast<double>(d);
  const double u = 60.0;
  const double z_hi = 1.0 + 2.0 * std::sqrt(u / k) + 2.0 * u / k;
  const double tol = 1e-12;
  auto mass = [d](double z) { return z_density(z, d); };
  auto weighted = [d](double z) { return (1.0 / z - 1.0) * z_density(z, d); };
  const double denom = adaptive_simpson(mass, 0.5, z_hi, tol);
  const double numer = adaptive_simpson(weighted, 0.5, z_hi, tol);
  if (!(denom > 0.0))
    throw NumericError("expected_truncated_qtilde: vanishing event mass");
  return numer / denom;
}

TruncatedWeights truncate_center(const Eigen::VectorXd& q_tilde,
                                 Eigen::Index d) {
  TruncatedWeights out;
  out.q_tilde = q_tilde;
  out.truncated_ok = q_tilde.size() > 0 &&
                     q_tilde.cwiseAbs().maxCoeff() <= 1.0;
  out.expected_r = expected_truncated_qtilde(d);
  if (out.truncated_ok) {
    out.r = q_tilde;
    out.y = q_tilde.array() - out.expected_r;
  }
  return out;
}

}  // namespace ellip::conclab
