#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "pbbench/rng.hpp"

namespace pbbench::stats {

// Phi^{-1}(0.975); the fixed two-sided 5% significance cut used by the
// step-selection DGM and the selection-model cutpoint.
inline constexpr double kZ975 = 1.959963984540054;

inline double norm_pdf(double x) {
  return 0.3989422804014327 * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865476); }

// Upper tail P(Z > x).
inline double norm_sf(double x) { return 0.5 * std::erfc(x * 0.7071067811865476); }

inline double norm_quantile(double p) { return detail::inverse_normal_cdf(p); }

inline double t_cdf(double x, double df) {
  boost::math::students_t_distribution<double> d(df);
  return boost::math::cdf(d, x);
}

inline double t_sf(double x, double df) {
  boost::math::students_t_distribution<double> d(df);
  return boost::math::cdf(boost::math::complement(d, x));
}

inline double t_quantile(double p, double df) {
  boost::math::students_t_distribution<double> d(df);
  return boost::math::quantile(d, p);
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample variance (ddof = 1).
inline double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

// Population variance (ddof = 0).
inline double population_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace pbbench::stats
