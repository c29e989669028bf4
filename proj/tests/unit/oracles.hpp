#pragma once

// Reference implementations used only by tests. Deliberately written
// differently from the library: full sort, two-pass moments, textbook
// formulas.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

struct Stats {
  double min, max, mean, std, p25, p50, p75;
};

inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const std::size_t below = static_cast<std::size_t>(rank);
  const std::size_t above = std::min(below + 1, sorted.size() - 1);
  const double w = rank - static_cast<double>(below);
  return sorted[below] * (1.0 - w) + sorted[above] * w;
}

inline Stats stats(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {v.front(), v.back(), mean, std::sqrt(ss / static_cast<double>(v.size())),
          percentile_sorted(v, 0.25), percentile_sorted(v, 0.50), percentile_sorted(v, 0.75)};
}

// Spherical law of cosines in the numerically safe haversine-free form
// via chord length on the unit sphere.
inline double great_circle_km(double lat1, double lon1, double lat2, double lon2, double radius_km) {
  const double d = std::numbers::pi / 180.0;
  const double x1 = std::cos(lat1 * d) * std::cos(lon1 * d), y1 = std::cos(lat1 * d) * std::sin(lon1 * d),
               z1 = std::sin(lat1 * d);
  const double x2 = std::cos(lat2 * d) * std::cos(lon2 * d), y2 = std::cos(lat2 * d) * std::sin(lon2 * d),
               z2 = std::sin(lat2 * d);
  const double chord = std::sqrt((x1 - x2) * (x1 - x2) + (y1 - y2) * (y1 - y2) + (z1 - z2) * (z1 - z2));
  return 2.0 * radius_km * std::asin(std::min(1.0, chord / 2.0));
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double num = n * sxy - sx * sy;
  const double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
  return den == 0.0 ? 0.0 : num / den;
}

inline bool close_rel(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace oracle
