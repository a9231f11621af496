#pragma once

#include <cstdint>
#include <vector>

namespace ellip {

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

// 95% Wilson score interval for a binomial proportion.
WilsonInterval wilson95(std::int64_t successes, std::int64_t trials);

// Quantile with linear interpolation between order statistics; p in [0, 1].
// Takes the sample by value because it sorts.
double quantile(std::vector<double> sample, double p);

// Two-sample Kolmogorov-Smirnov distance, sup_t |F_a(t) - F_b(t)|.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace ellip
