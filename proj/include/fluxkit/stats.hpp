#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fluxkit/errors.hpp"

namespace fluxkit::stats {

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw PreconditionError("mean of empty sample");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1 denominator). Zero for a single value.
inline double sample_std(const std::vector<double>& v) {
  if (v.empty()) throw PreconditionError("std of empty sample");
  if (v.size() == 1) return 0.0;
  double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw PreconditionError("median of empty sample");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Linear-interpolation quantile on the sorted sample, h = q*(n-1)
// (the inclusive convention; pinned so the outlier cut is deterministic).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw PreconditionError("quantile of empty sample");
  std::sort(v.begin(), v.end());
  double h = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

struct LineFit {
  double slope = 0, intercept = 0;
  double slope_err = 0, intercept_err = 0;
  double r2 = 0;
  std::size_t n = 0;
};

// Ordinary least squares y = a*x + b with the usual residual-variance
// parameter errors.
inline LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw PreconditionError("ols: size mismatch");
  std::size_t n = x.size();
  if (n < 2) throw PreconditionError("ols: need at least 2 points");
  double xm = mean(x), ym = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
    syy += (y[i] - ym) * (y[i] - ym);
  }
  if (sxx <= 0) throw PreconditionError("ols: degenerate abscissa");
  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (f.slope * x[i] + f.intercept);
    ssr += r * r;
  }
  if (n > 2) {
    double s2 = ssr / static_cast<double>(n - 2);
    f.slope_err = std::sqrt(s2 / sxx);
    f.intercept_err = std::sqrt(s2 * (1.0 / static_cast<double>(n) + xm * xm / sxx));
  }
  f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

inline double coth(double x) { return 1.0 / std::tanh(x); }

struct GaussianFit {
  double x0 = 0, sigma = 0;
};

// Gaussian location/scale by maximum likelihood on the 90% of the sample
// closest to the median. The truncated-Gaussian MLE has a closed form: the
// trimmed mean, and the trimmed std corrected for the mass removed by the
// central-90% window (z = 1.6449, variance ratio 1 - 2*z*pdf(z)/0.9).
inline GaussianFit fit_gaussian_trimmed(const std::vector<double>& v) {
  if (v.empty()) throw PreconditionError("gaussian fit of empty sample");
  double med = median(v);
  std::vector<double> kept(v);
  std::sort(kept.begin(), kept.end(), [med](double a, double b) {
    return std::abs(a - med) < std::abs(b - med);
  });
  std::size_t k = static_cast<std::size_t>(std::llround(0.9 * static_cast<double>(v.size())));
  k = std::max<std::size_t>(1, std::min(k, v.size()));
  kept.resize(k);
  GaussianFit g;
  g.x0 = mean(kept);
  double s = 0;
  for (double x : kept) s += (x - g.x0) * (x - g.x0);
  double sigma_trim = std::sqrt(s / static_cast<double>(k));
  constexpr double z = 1.6448536269514722;
  const double pdf_z = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.141592653589793);
  const double var_ratio = 1.0 - 2.0 * z * pdf_z / 0.9;
  g.sigma = sigma_trim / std::sqrt(var_ratio);
  return g;
}

}  // namespace fluxkit::stats
