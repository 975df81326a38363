#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace dcal {

/// Smallest N with 2B sqrt(2 ln(2/delta) / N) <= t.
std::int64_t hoeffding_sample_size(double bound, double t, double delta);

/// 2B sqrt(2 ln(2/delta) / N).
double hoeffding_halfwidth(double bound, std::int64_t n, double delta);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;     // at the mean of x
  double x_mean = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double residual_sd = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope (x - x_mean). Needs >= 3 points.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Two-sided Student t quantile, P(|T| <= q) = level.
double t_quantile(double level, double dof);

/// Central interval [lo, hi] for the count of a Binomial(trials, p) with
/// coverage at least `level`.
std::pair<std::int64_t, std::int64_t> binomial_interval(std::int64_t trials, double p,
                                                        double level);

/// Clopper-Pearson interval for a proportion.
std::pair<double, double> clopper_pearson(std::int64_t successes, std::int64_t trials,
                                          double level);

struct ChiSquaredResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Homogeneity test on a 2 x k table of counts; columns empty in both rows are
/// dropped.
ChiSquaredResult chi_squared_homogeneity(const std::vector<std::int64_t>& a,
                                         const std::vector<std::int64_t>& b);

/// Probability that n uniform draws from d values with fair independent signs
/// show no value with discordant signs: E[2^(distinct - n)].
double collision_accept_probability(std::int64_t d, std::int64_t n);

}  // namespace dcal
