#pragma once

#include <aoi/error.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <vector>

namespace aoi::harness {

struct Summary {
  double mean = 0.0;
  double ci = 0.0;  // half-width of the two-sided interval
  std::size_t n = 0;

  double lo() const { return mean - ci; }
  double hi() const { return mean + ci; }
};

/// Mean and Student-t confidence half-width; a single sample has width 0.
inline Summary summarize(const std::vector<double>& xs, double level = 0.95) {
  if (xs.empty()) throw Error("empty_sample", "cannot summarize an empty sample");
  Summary s;
  s.n = xs.size();
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(s.n);
  if (s.n < 2) return s;
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  const boost::math::students_t dist(static_cast<double>(s.n - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
  s.ci = t * sd / std::sqrt(static_cast<double>(s.n));
  return s;
}

/// a lies strictly above b with non-overlapping intervals.
inline bool clearly_above(const Summary& a, const Summary& b) { return a.lo() > b.hi(); }

/// Least-squares slope of y on x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("invalid_argument", "slope needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error("invalid_argument", "slope needs distinct x values");
  return sxy / sxx;
}

}  // namespace aoi::harness
