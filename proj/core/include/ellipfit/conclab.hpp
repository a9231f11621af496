#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ellipfit/point_cloud.hpp"
#include "ellipfit/random.hpp"
#include "ellipfit/sym_matrix.hpp"

namespace ellip::conclab {

// ---------------------------------------------------------------------------
// Empirical tail curves vs. theoretical bounds
// ---------------------------------------------------------------------------

// Survival probabilities of a statistic at increasing thresholds, next to the
// theoretical bound evaluated at the same points (capped at 1).
struct TailCurve {
  std::string name;
  Eigen::VectorXd thresholds;
  Eigen::VectorXd empirical;
  Eigen::VectorXd bound;
  std::int64_t trials = 0;

  // empirical <= bound + slack_sigmas * binomial standard error, pointwise.
  bool dominated(double slack_sigmas = 3.0) const;
};

// ---------------------------------------------------------------------------
// Norm weights q~_i = 1/d_i - 1 and their truncation/centering
// ---------------------------------------------------------------------------

// Throws DegenerateInputError if any d_i < 1e-12.
Eigen::VectorXd qtilde(const PointCloud& cloud);

struct TruncatedWeights {
  Eigen::VectorXd q_tilde;
  bool truncated_ok = false;  // all |q~_i| <= 1
  Eigen::VectorXd r;          // equals q_tilde when truncated_ok, else empty
  double expected_r = 0.0;    // conditional mean of one coordinate given the event
  Eigen::VectorXd y;          // r - expected_r when truncated_ok, else empty
};

TruncatedWeights truncate_center(const Eigen::VectorXd& q_tilde,
                                 Eigen::Index d);

// Conditional mean E[1/z - 1 | 1/2 <= z], z = (chi^2_d)/d, by adaptive
// quadrature with absolute tolerance 1e-10.  Requires d >= 3.
double expected_truncated_qtilde(Eigen::Index d);

// ---------------------------------------------------------------------------
// Kernel Gram deviation from its mean
// ---------------------------------------------------------------------------

struct DeviationStats {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  std::int64_t trials = 0;
  std::vector<double> dev_theta;    // |Theta - E Theta|_op per trial
  std::vector<double> dev_inverse;  // |Theta^{-1} - (I - 11^T/n)|_op
  std::vector<double> inv_op_norm;  // |Theta^{-1}|_op
  std::int64_t factorization_failures = 0;

  double median_dev_theta() const;
  double median_dev_inverse() const;
  double freq_inv_norm_below(double cap) const;
};

DeviationStats gram_deviation(Eigen::Index d, Eigen::Index n,
                              std::int64_t trials, const RandomStream& base,
                              int threads = 1);

// ---------------------------------------------------------------------------
// Coordinate-wise smallness of Theta^{-1} y (and of y itself)
// ---------------------------------------------------------------------------

// Ratio |v|_inf / (scale * d^{-3/8}); the event of interest is ratio <= C.
double infty_norm_ratio(const Eigen::VectorXd& v, double scale,
                        Eigen::Index d);

struct InftyNormEvent {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  bool identity_mode = false;     // measure y itself instead of Theta^{-1} y
  std::vector<double> c_values;
  std::vector<double> frequency;  // P[ratio <= C] per C
  std::int64_t trials = 0;
  std::int64_t resamples = 0;     // clouds rejected by the truncation event
};

struct InftyNormOptions {
  bool identity_mode = false;
  std::vector<double> c_values = {1.0, 2.0, 4.0, 8.0};
};

// Per trial: sample a cloud conditioned on all |q~_i| <= 1 (resampling whole
// clouds until the event holds), form y, and measure |Theta^{-1} y|_inf
// against |Theta^{-1}|_op d^{-3/8}.  In identity mode the matrix is skipped
// and |y|_inf is measured against d^{-3/8} directly.
InftyNormEvent infty_norm_event(Eigen::Index d, Eigen::Index n,
                                std::int64_t trials, const RandomStream& base,
                                const InftyNormOptions& opts = {},
                                int threads = 1);

// ---------------------------------------------------------------------------
// Tail curves for the individual concentration statements
// ---------------------------------------------------------------------------

// |S(eta)| = #{i : |<w_i, a>| > eta} against the Poisson-domination bound
// (e*lam/x)^x * e^{-lam} with lam = 4n exp(-c_exponent * d * eta^2).
TailCurve s_eta_tail(Eigen::Index d, Eigen::Index n, double eta,
                     const Eigen::VectorXd& count_grid, std::int64_t trials,
                     const RandomStream& base, double c_exponent = 0.5,
                     int threads = 1);

// sum_i <w_i, a>^4 1{|<w_i,a>| <= eta} exceeding (n/d^2)(3 + v), against
// 2 exp(-c_bound * min(n d^{2/q-4} eta^{4/q-8} v^2, n^q d^{1-2q} eta^{2-4q} v^q)).
TailCurve weibull_sum_tail(Eigen::Index d, Eigen::Index n, double eta,
                           const Eigen::VectorXd& v_grid, std::int64_t trials,
                           const RandomStream& base, double c_bound = 0.125,
                           double weibull_q = 0.6, int threads = 1);

// |d w^T M w - tr M| for a uniform direction w, against
// 2 exp(-c_bound * min(u^2/|M|_F^2, u/|M|_op)).
TailCurve hanson_wright_tail(Eigen::Index d, const SymMatrix& m,
                             const Eigen::VectorXd& u_grid,
                             std::int64_t trials, const RandomStream& base,
                             double c_bound = 0.125, int threads = 1);

// z = chi^2_d / d.  Upper curve: P[z - 1 >= 2 sqrt(u/d) + 2u/d] vs e^{-u}.
// Lower curve: P[1 - z >= 2 sqrt(u/d)] vs e^{-u}; thresholds are the deficit.
struct TwoSidedTails {
  TailCurve upper;
  TailCurve lower;
};
TwoSidedTails chi2_tail(Eigen::Index d, const Eigen::VectorXd& u_grid,
                        std::int64_t trials, const RandomStream& base,
                        int threads = 1);

// |q~| = |1/z - 1| against 2 exp(-d t^2 / 16) for t in (0, 1).
TailCurve qtilde_tail(Eigen::Index d, const Eigen::VectorXd& t_grid,
                      std::int64_t trials, const RandomStream& base,
                      int threads = 1);

// ---------------------------------------------------------------------------
// Flattened ensembles and moment identities
// ---------------------------------------------------------------------------

// Row-wise flattening of sphere directions: X_i = flatten(w_i w_i^T),
// Y_i = X_i - flatten(I)/d, P the projector orthogonal to flatten(I),
// V_i = P Y_i, H = Gram of the Y rows.
struct FlattenedEnsemble {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;  // d(d+1)/2
  Eigen::MatrixXd x;   // n x p
  Eigen::MatrixXd y;   // n x p
  Eigen::MatrixXd proj;  // p x p
  Eigen::MatrixXd v;   // n x p
  SymMatrix h;         // n x n
  double sigma_scale = 0.0;  // 1 - 1/d
};

FlattenedEnsemble build_flattened_ensemble(const Eigen::MatrixXd& directions);

struct MomentCheck {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct MomentReport {
  Eigen::Index d = 0;
  std::int64_t trials = 0;
  std::vector<MomentCheck> checks;
  bool all_pass = false;
};

// Monte Carlo verification of the direction-moment identities:
// E<w,a>^2 = 1/d, E<w,a>^4 = 3/(d(d+2)), E<w,a>^2<w,b>^2 = 1/(d(d+2)) for
// orthogonal a,b, E q~ = 2/(d-2), |E r| <= 3/d, and the covariance identity
// E[Y Y^T] = 2/(d(d+2)) P (tested in operator norm against its Monte Carlo
// standard error).  Statistical tolerances are 5 standard errors.
MomentReport moment_suite(Eigen::Index d, std::int64_t trials,
                          const RandomStream& base, int threads = 1);

// L^k-norm growth of one projected coordinate <V, t> for a unit Frobenius,
// trace-zero direction t:  l_hat(k) = d * |<V,t>|_{L^k} / k.  Bounded in k
// for each fixed direction; k must be even and >= 2.  Throws
// PreconditionError if |tr T| > 1e-10.
double moment_growth_for_direction(Eigen::Index d, const SymMatrix& t, int k,
                                   std::int64_t trials, RandomStream stream);

struct MomentGrowth {
  Eigen::Index d = 0;
  std::vector<int> orders;       // even k
  std::vector<double> l_hat_max; // max over sampled directions
  std::vector<double> l_hat_min; // min over sampled directions
};

MomentGrowth projected_moment_growth(Eigen::Index d, int k_max,
                                     int num_directions, std::int64_t trials,
                                     const RandomStream& base,
                                     int threads = 1);

// ---------------------------------------------------------------------------
// Resolvent perturbation inequality
// ---------------------------------------------------------------------------

struct InversePerturbation {
  double lhs = 0.0;  // |A^{-1} - B^{-1}|_op
  double rhs = 0.0;  // eps |B^{-1}|_op^2 / (1 - eps |B^{-1}|_op)
  double eps = 0.0;  // |A - B|_op
  bool admissible = false;  // eps |B^{-1}|_op < 1
  bool holds = false;
};

// Checks |A^{-1} - B^{-1}|_op <= eps |B^{-1}|_op^2 / (1 - eps |B^{-1}|_op)
// for positive definite A, B; holds is reported with a 1e-9 relative slack
// for roundoff.  When the pair is not admissible the bound is vacuous and
// holds is true by convention.
InversePerturbation inverse_perturbation_check(const SymMatrix& a,
                                               const SymMatrix& b);

// ---------------------------------------------------------------------------
// Direction profiles of the fitted perturbation
// ---------------------------------------------------------------------------

// For a fixed direction a: U_i = <w_i, a>^2, S = {i : |<w_i,a>| > eta}, and
// the decomposition f = f1 + f2 of f = sum_i w_i(Theta^{-1} y) U_i into the
// spike part (i in S) and the bulk part.
struct DirectionDiagnostics {
  Eigen::VectorXd u;
  std::vector<Eigen::Index> spike;
  double f = 0.0;
  double f_spike = 0.0;
  double f_bulk = 0.0;
};

DirectionDiagnostics direction_diagnostics(const PointCloud& cloud,
                                           const Eigen::VectorXd& weights,
                                           const Eigen::VectorXd& a,
                                           double eta);

struct DirectionProfile {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  double eta = 0.0;
  std::int64_t trials = 0;
  int num_directions = 0;
  std::int64_t resamples = 0;
  double p99_abs_f = 0.0;
  double max_abs_f = 0.0;
  double p99_abs_spike = 0.0;
  double p99_abs_bulk = 0.0;
};

// Full pipeline: per trial sample a cloud conditioned on the truncation
// event, form weights Theta^{-1} y, and profile f over random directions.
DirectionProfile direction_profile(Eigen::Index d, Eigen::Index n, double eta,
                                   int num_directions, std::int64_t trials,
                                   const RandomStream& base, int threads = 1);

// ---------------------------------------------------------------------------
// Explicit half-nets and the sphere-to-net reduction
// ---------------------------------------------------------------------------

// Explicit (1/2)-net of the unit sphere, rows are net points; exact
// construction for d in {1, 2, 3}.
Eigen::MatrixXd half_net(Eigen::Index d);

// Largest chordal distance from a sampled sphere point to the net (Monte
// Carlo upper-bound check of the covering radius).
double net_covering_radius_estimate(const Eigen::MatrixXd& net,
                                    std::int64_t samples, RandomStream stream);

struct NetDomination {
  double op_norm = 0.0;       // max_|a|=1 |a^T M a|
  double net_abs_max = 0.0;   // max over net points of |a^T M a|
  bool holds = false;         // op_norm <= 2 * net_abs_max (+ roundoff slack)
};

NetDomination net_max_relation(const SymMatrix& m, const Eigen::MatrixXd& net);

struct NetProfileEvent {
  Eigen::Index d = 0;
  Eigen::Index n = 0;
  std::int64_t trials = 0;
  int num_directions = 0;
  std::vector<double> c2_values;
  std::vector<double> frequency;  // P[max over directions of |f(a)| <= C2]
};

// Frequency of the event max over sampled directions of |f(a)| <= C2 for the
// fitted-weight profile f; directions play the role of a net on the sphere.
NetProfileEvent net_profile_event(Eigen::Index d, Eigen::Index n,
                                  int num_directions, std::int64_t trials,
                                  const RandomStream& base,
                                  const std::vector<double>& c2_values = {0.5, 1.0, 2.0},
                                  int threads = 1);

}  // namespace ellip::conclab
