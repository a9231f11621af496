#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "ellipfit/conclab.hpp"
#include "ellipfit/errors.hpp"
#include "ellipfit/fitter.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/parallel.hpp"

#include "conclab_internal.hpp"

namespace ellip::conclab {
namespace {

// Trials used for the O(p^2) covariance accumulation; beyond this the extra
// precision is not worth the quadratic cost.
constexpr std::int64_t kCovarianceTrialCap = 20000;
constexpr Eigen::Index kCovarianceDimCap = 30;

MomentCheck statistical_check(std::string name, double mean, double se,
                              double target) {
  MomentCheck c;
  c.name = std::move(name);
  c.value = mean;
  c.target = target;
  c.tolerance = 5.0 * se;
  c.pass = std::abs(mean - target) <= c.tolerance;
  return c;
}

}  // namespace

FlattenedEnsemble build_flattened_ensemble(const Eigen::MatrixXd& directions) {
  FlattenedEnsemble e;
  e.n = directions.rows();
  e.d = directions.cols();
  if (e.n < 1 || e.d < 1)
    throw InvalidShapeError("build_flattened_ensemble: empty direction set");
  e.p = flat_dim(e.d);
  e.sigma_scale = 1.0 - 1.0 / static_cast<double>(e.d);

  const Eigen::VectorXd id_flat = flatten_identity(e.d);
  e.x.resize(e.n, e.p);
  for (Eigen::Index i = 0; i < e.n; ++i)
    e.x.row(i) = flatten_outer(directions.row(i)).transpose();
  e.y = e.x.rowwise() - id_flat.transpose() / static_cast<double>(e.d);

  e.proj = Eigen::MatrixXd::Identity(e.p, e.p) -
           (id_flat * id_flat.transpose()) / static_cast<double>(e.d);
  e.v = e.y * e.proj;
  e.h = SymMatrix::mirror_lower(e.y * e.y.transpose());
  return e;
}

MomentReport moment_suite(Eigen::Index d, std::int64_t trials,
                          const RandomStream& base, int threads) {
  if (d < 5)
    throw PreconditionError("moment_suite: requires d >= 5");
  if (trials < 100)
    throw PreconditionError("moment_suite: requires at least 100 trials");

  struct Scalars {
    double t2, t4, t2s2, qt;
    bool accepted;  // |q~| <= 1
  };
  std::vector<Scalars> per_trial(trials);

  parallel_for(trials, threads, [&](std::int64_t t) {
    RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    Eigen::VectorXd g = stream.normal_vector(d);
    const double norm_sq = g.squaredNorm();
    const double t1 = g[0] / std::sqrt(norm_sq);
    const double t2 = g[1] / std::sqrt(norm_sq);
    const double z = norm_sq / static_cast<double>(d);
    const double qt = 1.0 / z - 1.0;
    per_trial[t] = {t1 * t1, t1 * t1 * t1 * t1, t1 * t1 * t2 * t2, qt,
                    std::abs(qt) <= 1.0};
  });

  // Sequential reductions keep the report identical for any thread count.
  const double nt = static_cast<double>(trials);
  double s_t2 = 0, s_t4 = 0, s_t8 = 0, s_t2s2 = 0, s_qt = 0;
  double ss_t2 = 0, ss_t2s2 = 0, ss_qt = 0;
  double s_r = 0, ss_r = 0;
  std::int64_t n_acc = 0;
  for (const Scalars& s : per_trial) {
    s_t2 += s.t2;
    ss_t2 += s.t2 * s.t2;
    s_t4 += s.t4;
    s_t8 += s.t4 * s.t4;
    s_t2s2 += s.t2s2;
    ss_t2s2 += s.t2s2 * s.t2s2;
    s_qt += s.qt;
    ss_qt += s.qt * s.qt;
    if (s.accepted) {
      s_r += s.qt;
      ss_r += s.qt * s.qt;
      ++n_acc;
    }
  }
  auto mean_se = [](double sum, double sum_sq, double count) {
    const double mean = sum / count;
    const double var = std::max(0.0, sum_sq / count - mean * mean);
    return std::pair<double, double>(mean, std::sqrt(var / count));
  };

  const double dd = static_cast<double>(d);
  MomentReport report;
  report.d = d;
  report.trials = trials;

  {
    auto [m, se] = mean_se(s_t2, ss_t2, nt);
    report.checks.push_back(
        statistical_check("overlap_sq_mean", m, se, 1.0 / dd));
  }
  {
    auto [m, se] = mean_se(s_t4, s_t8, nt);
    report.checks.push_back(statistical_check("overlap_fourth_mean", m, se,
                                              3.0 / (dd * (dd + 2.0))));
  }
  {
    auto [m, se] = mean_se(s_t2s2, ss_t2s2, nt);
    report.checks.push_back(statistical_check("overlap_cross_mean", m, se,
                                              1.0 / (dd * (dd + 2.0))));
  }
  {
    auto [m, se] = mean_se(s_qt, ss_qt, nt);
    report.checks.push_back(
        statistical_check("qtilde_mean", m, se, 2.0 / (dd - 2.0)));
  }

  const double r_quad = expected_truncated_qtilde(d);
  if (n_acc > 1) {
    auto [m, se] = mean_se(s_r, ss_r, static_cast<double>(n_acc));
    report.checks.push_back(
        statistical_check("truncated_mean_vs_quadrature", m, se, r_quad));
  }
  {
    MomentCheck c;
    c.name = "truncated_mean_small";
    c.value = std::abs(r_quad);
    c.target = 0.0;
    c.tolerance = 3.0 / dd;
    c.pass = c.value <= c.tolerance;
    report.checks.push_back(c);
  }

  if (d <= kCovarianceDimCap) {
    // E[Y Y^T] = 2/(d(d+2)) P, checked in operator norm against the Monte
    // Carlo standard error in Frobenius norm.  Trials are replayed from the
    // same streams as above, so the result is reproducible by construction.
    const std::int64_t nc = std::min(trials, kCovarianceTrialCap);
    const Eigen::Index p = flat_dim(d);
    const Eigen::VectorXd id_flat = flatten_identity(d);
    Eigen::MatrixXd sum_outer = Eigen::MatrixXd::Zero(p, p);
    double sum_norm4 = 0.0;
    for (std::int64_t t = 0; t < nc; ++t) {
      RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
      Eigen::VectorXd g = stream.normal_vector(d);
      Eigen::VectorXd w = g / g.norm();
      Eigen::VectorXd y = flatten_outer(w) - id_flat / dd;
      sum_outer.selfadjointView<Eigen::Lower>().rankUpdate(y, 1.0);
      double ns = y.squaredNorm();
      sum_norm4 += ns * ns;
    }
    Eigen::MatrixXd mhat =
        Eigen::MatrixXd(sum_outer.selfadjointView<Eigen::Lower>()) /
        static_cast<double>(nc);
    const double scale = 2.0 / (dd * (dd + 2.0));
    Eigen::MatrixXd target =
        scale * (Eigen::MatrixXd::Identity(p, p) -
                 (id_flat * id_flat.transpose()) / dd);
    const double dev = op_norm(SymMatrix::mirror_lower(mhat - target));
    const double se_frob = std::sqrt(std::max(
        0.0, (sum_norm4 / static_cast<double>(nc) - mhat.squaredNorm()) /
                 static_cast<double>(nc)));
    MomentCheck c;
    c.name = "flattened_covariance";
    c.value = dev;
    c.target = 0.0;
    c.tolerance = 5.0 * se_frob;
    c.pass = dev <= c.tolerance;
    report.checks.push_back(c);
  }

  report.all_pass = true;
  for (const MomentCheck& c : report.checks) report.all_pass &= c.pass;
  return report;
}

double moment_growth_for_direction(Eigen::Index d, const SymMatrix& t, int k,
                                   std::int64_t trials, RandomStream stream) {
  if (k < 2 || k % 2 != 0)
    throw PreconditionError("moment_growth_for_direction: k must be even >= 2");
  if (t.dim() != d)
    throw InvalidShapeError("moment_growth_for_direction: dimension mismatch");
  const double frob = t.mat().norm();
  if (!(frob > 0.0))
    throw PreconditionError("moment_growth_for_direction: zero direction");
  if (std::abs(t.mat().trace()) > 1e-10 * frob)
    throw PreconditionError(
        "moment_growth_for_direction: direction must be trace-zero");

  double sum = 0.0;
  for (std::int64_t i = 0; i < trials; ++i) {
    Eigen::VectorXd w = sample_sphere_direction(d, stream);
    const double s = w.dot(t.mat() * w) / frob;
    sum += std::pow(std::abs(s), k);
  }
  const double lk = std::pow(sum / static_cast<double>(trials),
                             1.0 / static_cast<double>(k));
  return static_cast<double>(d) * lk / static_cast<double>(k);
}

MomentGrowth projected_moment_growth(Eigen::Index d, int k_max,
                                     int num_directions, std::int64_t trials,
                                     const RandomStream& base, int threads) {
  if (k_max < 2) throw PreconditionError("projected_moment_growth: k_max >= 2");
  if (num_directions < 1)
    throw PreconditionError("projected_moment_growth: need directions");

  std::vector<int> orders;
  for (int k = 2; k <= k_max; k += 2) orders.push_back(k);

  // One row of l_hat values per direction; per-direction streams are forked
  // from the base so the direction loop can run on any number of threads.
  std::vector<std::vector<double>> rows(num_directions);
  parallel_for(num_directions, threads, [&](std::int64_t j) {
    RandomStream stream = base.fork(static_cast<std::uint64_t>(j));
    // Random trace-zero direction of unit Frobenius norm.
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) g(a, b) = stream.normal();
    Eigen::MatrixXd s = 0.5 * (g + g.transpose());
    s.diagonal().array() -= s.trace() / static_cast<double>(d);
    SymMatrix dir = SymMatrix::mirror_lower(s / s.norm());

    std::vector<double> moment_sums(orders.size(), 0.0);
    for (std::int64_t i = 0; i < trials; ++i) {
      Eigen::VectorXd w = sample_sphere_direction(d, stream);
      const double base_val = std::abs(w.dot(dir.mat() * w));
      double power = base_val * base_val;
      for (std::size_t m = 0; m < orders.size(); ++m) {
        moment_sums[m] += power;
        power *= base_val * base_val;
      }
    }
    rows[j].resize(orders.size());
    for (std::size_t m = 0; m < orders.size(); ++m) {
      const double lk =
          std::pow(moment_sums[m] / static_cast<double>(trials),
                   1.0 / static_cast<double>(orders[m]));
      rows[j][m] = static_cast<double>(d) * lk / static_cast<double>(orders[m]);
    }
  });

  MomentGrowth out;
  out.d = d;
  out.orders = orders;
  out.l_hat_max.assign(orders.size(), 0.0);
  out.l_hat_min.assign(orders.size(),
                       std::numeric_limits<double>::infinity());
  for (const auto& row : rows)
    for (std::size_t m = 0; m < orders.size(); ++m) {
      out.l_hat_max[m] = std::max(out.l_hat_max[m], row[m]);
      out.l_hat_min[m] = std::min(out.l_hat_min[m], row[m]);
    }
  return out;
}

InversePerturbation inverse_perturbation_check(const SymMatrix& a,
                                               const SymMatrix& b) {
  if (a.dim() != b.dim())
    throw InvalidShapeError("inverse_perturbation_check: dimension mismatch");
  InversePerturbation out;
  out.eps = op_norm(SymMatrix::mirror_lower(a.mat() - b.mat()));
  Eigen::MatrixXd a_inv = spd_inverse(a);
  Eigen::MatrixXd b_inv = spd_inverse(b);
  const double b_inv_norm = op_norm(SymMatrix::mirror_lower(b_inv));
  out.admissible = out.eps * b_inv_norm < 1.0;
  out.lhs = op_norm(SymMatrix::mirror_lower(a_inv - b_inv));
  if (!out.admissible) {
    out.rhs = std::numeric_limits<double>::infinity();
    out.holds = true;  // bound is vacuous outside the admissible regime
    return out;
  }
  out.rhs = out.eps * b_inv_norm * b_inv_norm / (1.0 - out.eps * b_inv_norm);
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-9) + 1e-15;
  return out;
}

}  // namespace ellip::conclab
