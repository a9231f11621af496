#include "ellipfit/stats.hpp"

#include <algorithm>
#include <cmath>

#include "ellipfit/errors.hpp"

namespace ellip {

WilsonInterval wilson95(std::int64_t successes, std::int64_t trials) {
  if (trials <= 0) throw PreconditionError("wilson95: trials must be > 0");
  if (successes < 0 || successes > trials)
    throw PreconditionError("wilson95: successes out of range");
  const double z = 1.959963984540054;  // 97.5% standard normal quantile
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = phat + z2 / (2.0 * n);
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  return {(center - half) / denom, (center + half) / denom};
}

double quantile(std::vector<double> sample, double p) {
  if (sample.empty()) throw PreconditionError("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0))
    throw PreconditionError("quantile: p outside [0, 1]");
  std::sort(sample.begin(), sample.end());
  const double pos = p * static_cast<double>(sample.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sample.size()) return sample.back();
  const double frac = pos - static_cast<double>(lo);
  return sample[lo] * (1.0 - frac) + sample[lo + 1] * frac;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw PreconditionError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double dist = 0.0;
  while (ia < a.size() && ib < b.size()) {
    // Step past one observation value in both samples at once so ties do not
    // produce a spurious gap between the two empirical CDFs.
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    double diff = std::abs(static_cast<double>(ia) / na -
                           static_cast<double>(ib) / nb);
    if (diff > dist) dist = diff;
  }
  return dist;
}

}  // namespace ellip
