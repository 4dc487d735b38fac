#include "metastab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace metastab::stats {

double MeanVar::std_error() const {
  if (count < 2) return 0.0;
  return std::sqrt(variance / static_cast<double>(count));
}

MeanVar mean_var(std::span<const double> xs) {
  MeanVar out;
  out.count = xs.size();
  if (xs.empty()) return out;
  // Welford
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : xs) {
    ++k;
    const double delta = x - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (x - mean);
  }
  out.mean = mean;
  out.variance = xs.size() > 1 ? m2 / static_cast<double>(xs.size() - 1) : 0.0;
  return out;
}

VarianceEstimate variance_with_error(std::span<const double> xs) {
  VarianceEstimate out;
  const std::size_t n = xs.size();
  if (n < 2) return out;
  const auto mv = mean_var(xs);
  double m4 = 0.0;
  for (double x : xs) {
    const double d = x - mv.mean;
    m4 += d * d * d * d;
  }
  m4 /= static_cast<double>(n);
  const double s2 = mv.variance;
  out.mean = mv.mean;
  out.variance = s2;
  out.std_error = std::sqrt(std::max(m4 - s2 * s2, 0.0) / static_cast<double>(n));
  return out;
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

double ks_distance_exponential(std::vector<double> samples, double rate) {
  return ks_distance(std::move(samples),
                     [rate](double t) { return t <= 0.0 ? 0.0 : -std::expm1(-rate * t); });
}

double ks_critical_95(std::size_t n) { return 1.36 / std::sqrt(static_cast<double>(n)); }

double binomial_std_error(double p, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

namespace {

double r_squared(std::span<const double> y, const std::vector<double>& residuals) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += residuals[i] * residuals[i];
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

} // namespace

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.residuals.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fit.residuals[i] = y[i] - (fit.intercept + fit.slope * x[i]);
  fit.r_squared = r_squared(y, fit.residuals);
  return fit;
}

LinearFit fit_through_origin(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw std::invalid_argument("fit_through_origin: size mismatch");
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.residuals.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fit.residuals[i] = y[i] - fit.slope * x[i];
  fit.r_squared = r_squared(y, fit.residuals);
  return fit;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson_correlation: size mismatch");
  const auto mx = mean_var(x), my = mean_var(y);
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (x[i] - mx.mean) * (y[i] - my.mean);
  cov /= static_cast<double>(x.size() - 1);
  const double denom = std::sqrt(mx.variance * my.variance);
  return denom > 0 ? cov / denom : 0.0;
}

} // namespace metastab::stats
