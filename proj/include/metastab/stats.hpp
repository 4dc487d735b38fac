#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace metastab::stats {

struct MeanVar {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0; // unbiased
  double std_error() const;
};

MeanVar mean_var(std::span<const double> xs);

// Sample variance together with its standard error, the latter from the
// fourth central moment: se^2 = (m4 - s^4) / n.
struct VarianceEstimate {
  double variance = 0.0;
  double std_error = 0.0;
  double mean = 0.0;
};
VarianceEstimate variance_with_error(std::span<const double> xs);

// Kolmogorov-Smirnov distance between the empirical law of `samples` and a
// continuous CDF. Ties are handled through one-sided limits.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_distance_exponential(std::vector<double> samples, double rate);

// Asymptotic 95% critical value 1.36 / sqrt(n).
double ks_critical_95(std::size_t n);

double binomial_std_error(double p, std::size_t n);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
};

// Ordinary least squares y = intercept + slope * x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Least squares through the origin y = slope * x. R^2 is the centered
// coefficient 1 - SS_res / SS_tot.
LinearFit fit_through_origin(std::span<const double> x, std::span<const double> y);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

} // namespace metastab::stats
