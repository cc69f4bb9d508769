#pragma once

// Sample statistics with Student-t confidence limits.

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace crbf::harness {

struct Summary {
  std::size_t n = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();  // sample (n - 1)
  double ci95_low = std::numeric_limits<double>::quiet_NaN();
  double ci95_high = std::numeric_limits<double>::quiet_NaN();
};

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Two-sided 95 % interval; NaN bounds when fewer than two samples.
inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = mean(v);
  if (v.size() < 2) return s;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  const boost::math::students_t dist(static_cast<double>(v.size() - 1));
  const double half = boost::math::quantile(dist, 0.975) * s.stddev / std::sqrt(static_cast<double>(v.size()));
  s.ci95_low = s.mean - half;
  s.ci95_high = s.mean + half;
  return s;
}

/// One-sided lower confidence bound on the mean of x at the given level.
inline double lower_confidence_bound(const std::vector<double>& x, double level = 0.95) {
  if (x.size() < 2) throw std::invalid_argument("lower_confidence_bound needs at least two samples");
  const Summary s = summarize(x);
  const boost::math::students_t dist(static_cast<double>(x.size() - 1));
  return s.mean - boost::math::quantile(dist, level) * s.stddev / std::sqrt(static_cast<double>(x.size()));
}

/// Element-wise a - b for paired samples.
inline std::vector<double> paired_differences(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

}  // namespace crbf::harness
