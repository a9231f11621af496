#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "ellipfit/conclab.hpp"
#include "ellipfit/errors.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/parallel.hpp"

#include "conclab_internal.hpp"

namespace ellip::conclab {
namespace {

void require_increasing(const Eigen::VectorXd& grid, const char* who) {
  if (grid.size() == 0)
    throw PreconditionError(std::string(who) + ": empty threshold grid");
  for (Eigen::Index i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw PreconditionError(std::string(who) +
                              ": thresholds must be strictly increasing");
}

// Survival curve of per-trial statistics at the given thresholds, with the
// bound evaluated pointwise and capped at 1.
TailCurve make_survival_curve(std::string name,
                              const Eigen::VectorXd& thresholds,
                              const std::vector<double>& samples,
                              const std::function<double(double)>& bound_at) {
  TailCurve curve;
  curve.name = std::move(name);
  curve.thresholds = thresholds;
  curve.trials = static_cast<std::int64_t>(samples.size());
  curve.empirical.resize(thresholds.size());
  curve.bound.resize(thresholds.size());
  for (Eigen::Index j = 0; j < thresholds.size(); ++j) {
    std::int64_t hits = 0;
    for (double s : samples)
      if (s >= thresholds[j]) ++hits;
    curve.empirical[j] =
        static_cast<double>(hits) / static_cast<double>(curve.trials);
    curve.bound[j] = std::min(1.0, bound_at(thresholds[j]));
  }
  return curve;
}

std::vector<double> collect_samples(
    std::int64_t trials, const RandomStream& base, int threads,
    const std::function<double(RandomStream&)>& one_trial) {
  if (trials < 1) throw PreconditionError("tail curve: trials must be >= 1");
  std::vector<double> samples(trials);
  parallel_for(trials, threads, [&](std::int64_t t) {
    RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    samples[t] = one_trial(stream);
  });
  return samples;
}

}  // namespace

bool TailCurve::dominated(double slack_sigmas) const {
  for (Eigen::Index j = 0; j < thresholds.size(); ++j) {
    const double b = bound[j];
    const double se =
        std::sqrt(std::max(0.0, b * (1.0 - b)) / static_cast<double>(trials));
    if (empirical[j] > b + slack_sigmas * se) return false;
  }
  return true;
}

TailCurve s_eta_tail(Eigen::Index d, Eigen::Index n, double eta,
                     const Eigen::VectorXd& count_grid, std::int64_t trials,
                     const RandomStream& base, double c_exponent,
                     int threads) {
  require_increasing(count_grid, "s_eta_tail");
  if (!(eta > 0.0)) throw PreconditionError("s_eta_tail: eta must be > 0");

  auto samples = collect_samples(trials, base, threads, [&](RandomStream& s) {
    std::int64_t count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // Only the overlap with a fixed direction matters; by rotation
      // invariance the first coordinate of a uniform direction has the
      // right law.
      Eigen::VectorXd g = s.normal_vector(d);
      if (std::abs(g[0]) > eta * g.norm()) ++count;
    }
    return static_cast<double>(count);
  });

  const double lam = 4.0 * static_cast<double>(n) *
                     std::exp(-c_exponent * static_cast<double>(d) * eta * eta);
  auto bound_at = [lam](double x) {
    if (x <= 0.0) return 1.0;
    // Poisson domination: (e lam / x)^x e^{-lam}.
    return std::exp(x * (1.0 + std::log(lam) - std::log(x)) - lam);
  };
  TailCurve curve = make_survival_curve("s_eta", count_grid, samples, bound_at);
  return curve;
}

TailCurve weibull_sum_tail(Eigen::Index d, Eigen::Index n, double eta,
                           const Eigen::VectorXd& v_grid, std::int64_t trials,
                           const RandomStream& base, double c_bound,
                           double weibull_q, int threads) {
  require_increasing(v_grid, "weibull_sum_tail");
  if (!(weibull_q > 0.0 && weibull_q < 1.0))
    throw PreconditionError("weibull_sum_tail: q must lie in (0, 1)");

  auto samples = collect_samples(trials, base, threads, [&](RandomStream& s) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd g = s.normal_vector(d);
      const double overlap = g[0] / g.norm();
      if (std::abs(overlap) <= eta) {
        const double o2 = overlap * overlap;
        sum += o2 * o2;
      }
    }
    return sum;
  });

  const double nd = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double q = weibull_q;
  // Statistic thresholds are (n/d^2)(3 + v); build the curve on the v grid
  // and map to statistic space inside the sampler comparison.
  Eigen::VectorXd stat_grid(v_grid.size());
  for (Eigen::Index j = 0; j < v_grid.size(); ++j)
    stat_grid[j] = nd / (dd * dd) * (3.0 + v_grid[j]);

  TailCurve curve;
  curve.name = "weibull_sum";
  curve.thresholds = v_grid;
  curve.trials = trials;
  curve.empirical.resize(v_grid.size());
  curve.bound.resize(v_grid.size());
  for (Eigen::Index j = 0; j < v_grid.size(); ++j) {
    std::int64_t hits = 0;
    for (double s : samples)
      if (s >= stat_grid[j]) ++hits;
    curve.empirical[j] =
        static_cast<double>(hits) / static_cast<double>(trials);
    const double v = v_grid[j];
    if (v <= 0.0) {
      curve.bound[j] = 1.0;
      continue;
    }
    const double gaussian_part = nd * std::pow(dd, 2.0 / q - 4.0) *
                                 std::pow(eta, 4.0 / q - 8.0) * v * v;
    const double weibull_part = std::pow(nd, q) * std::pow(dd, 1.0 - 2.0 * q) *
                                std::pow(eta, 2.0 - 4.0 * q) * std::pow(v, q);
    curve.bound[j] = std::min(
        1.0, 2.0 * std::exp(-c_bound * std::min(gaussian_part, weibull_part)));
  }
  return curve;
}

TailCurve hanson_wright_tail(Eigen::Index d, const SymMatrix& m,
                             const Eigen::VectorXd& u_grid,
                             std::int64_t trials, const RandomStream& base,
                             double c_bound, int threads) {
  require_increasing(u_grid, "hanson_wright_tail");
  if (m.dim() != d)
    throw InvalidShapeError("hanson_wright_tail: matrix dimension != d");

  const double frob_sq = m.mat().squaredNorm();
  const double op = op_norm(m);
  const double trace = m.mat().trace();
  if (!(frob_sq > 0.0))
    throw PreconditionError("hanson_wright_tail: zero matrix");

  auto samples = collect_samples(trials, base, threads, [&](RandomStream& s) {
    Eigen::VectorXd w = sample_sphere_direction(d, s);
    const double quad = w.dot(m.mat() * w);
    return std::abs(static_cast<double>(d) * quad - trace);
  });

  auto bound_at = [=](double u) {
    return 2.0 * std::exp(-c_bound * std::min(u * u / frob_sq, u / op));
  };
  return make_survival_curve("hanson_wright", u_grid, samples, bound_at);
}

TwoSidedTails chi2_tail(Eigen::Index d, const Eigen::VectorXd& u_grid,
                        std::int64_t trials, const RandomStream& base,
                        int threads) {
  require_increasing(u_grid, "chi2_tail");
  if (u_grid[0] <= 0.0)
    throw PreconditionError("chi2_tail: u values must be positive");

  struct Pair {
    double excess;
    double deficit;
  };
  std::vector<Pair> samples(trials);
  parallel_for(trials, threads, [&](std::int64_t t) {
    RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    double z = stream.normal_vector(d).squaredNorm() / static_cast<double>(d);
    samples[t] = {z - 1.0, 1.0 - z};
  });

  const double dd = static_cast<double>(d);
  Eigen::VectorXd up_thr(u_grid.size()), lo_thr(u_grid.size()),
      bounds(u_grid.size());
  for (Eigen::Index j = 0; j < u_grid.size(); ++j) {
    const double u = u_grid[j];
    up_thr[j] = 2.0 * std::sqrt(u / dd) + 2.0 * u / dd;
    lo_thr[j] = 2.0 * std::sqrt(u / dd);
    bounds[j] = std::exp(-u);
  }

  std::vector<double> excess(trials), deficit(trials);
  for (std::int64_t t = 0; t < trials; ++t) {
    excess[t] = samples[t].excess;
    deficit[t] = samples[t].deficit;
  }

  TwoSidedTails out;
  out.upper = make_survival_curve("chi2_upper", up_thr, excess,
                                  [&](double) { return 0.0; });
  out.lower = make_survival_curve("chi2_lower", lo_thr, deficit,
                                  [&](double) { return 0.0; });
  out.upper.bound = bounds.cwiseMin(1.0);
  out.lower.bound = bounds.cwiseMin(1.0);
  return out;
}

TailCurve qtilde_tail(Eigen::Index d, const Eigen::VectorXd& t_grid,
                      std::int64_t trials, const RandomStream& base,
                      int threads) {
  require_increasing(t_grid, "qtilde_tail");
  if (t_grid[0] <= 0.0 || t_grid[t_grid.size() - 1] >= 1.0)
    throw PreconditionError("qtilde_tail: thresholds must lie in (0, 1)");

  auto samples = collect_samples(trials, base, threads, [&](RandomStream& s) {
    double z = s.normal_vector(d).squaredNorm() / static_cast<double>(d);
    return std::abs(1.0 / z - 1.0);
  });

  const double dd = static_cast<double>(d);
  auto bound_at = [dd](double t) {
    return 2.0 * std::exp(-dd * t * t / 16.0);
  };
  return make_survival_curve("qtilde", t_grid, samples, bound_at);
}

}  // namespace ellip::conclab
