#include "dcal/stats.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "dcal/errors.hpp"

namespace dcal {

std::int64_t hoeffding_sample_size(double bound, double t, double delta) {
  if (!(bound > 0.0) || !(t > 0.0)) throw InvalidInput("B and t must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0,1)");
  if (std::isinf(t)) return 1;
  const double n = 8.0 * bound * bound * std::log(2.0 / delta) / (t * t);
  if (n <= 1.0) return 1;
  return static_cast<std::int64_t>(std::ceil(n));
}

double hoeffding_halfwidth(double bound, std::int64_t n, double delta) {
  if (n < 1) throw InvalidInput("sample size must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("delta must lie in (0,1)");
  return 2.0 * bound * std::sqrt(2.0 * std::log(2.0 / delta) / static_cast<double>(n));
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidInput("fit needs paired data");
  if (x.size() < 3) throw InvalidInput("fit needs at least 3 points");
  LineFit f;
  f.points = x.size();
  const double k = static_cast<double>(x.size());
  f.x_mean = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - f.x_mean) * (x[i] - f.x_mean);
    sxy += (x[i] - f.x_mean) * (y[i] - y_mean);
  }
  if (!(sxx > 0.0)) throw InvalidInput("fit needs distinct x values");
  f.slope = sxy / sxx;
  f.intercept = y_mean;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * (x[i] - f.x_mean);
    rss += r * r;
  }
  f.residual_sd = std::sqrt(rss / (k - 2.0));
  f.slope_se = f.residual_sd / std::sqrt(sxx);
  f.intercept_se = f.residual_sd / std::sqrt(k);
  return f;
}

double t_quantile(double level, double dof) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("level must lie in (0,1)");
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 0.5 + level / 2.0);
}

std::pair<std::int64_t, std::int64_t> binomial_interval(std::int64_t trials, double p,
                                                        double level) {
  if (trials < 1) throw InvalidInput("trials must be >= 1");
  if (p <= 0.0) return {0, 0};
  if (p >= 1.0) return {trials, trials};
  boost::math::binomial dist(static_cast<double>(trials), p);
  const double tail = (1.0 - level) / 2.0;
  const double lo = boost::math::quantile(dist, tail);
  const double hi = boost::math::quantile(boost::math::complement(dist, tail));
  return {static_cast<std::int64_t>(std::floor(lo)), static_cast<std::int64_t>(std::ceil(hi))};
}

std::pair<double, double> clopper_pearson(std::int64_t successes, std::int64_t trials,
                                          double level) {
  if (trials < 1 || successes < 0 || successes > trials)
    throw InvalidInput("invalid binomial counts");
  const double tail = (1.0 - level) / 2.0;
  const double n = static_cast<double>(trials);
  const double k = static_cast<double>(successes);
  const double lo = successes == 0
                        ? 0.0
                        : boost::math::binomial_distribution<>::find_lower_bound_on_p(n, k, tail);
  const double hi = successes == trials
                        ? 1.0
                        : boost::math::binomial_distribution<>::find_upper_bound_on_p(n, k, tail);
  return {lo, hi};
}

ChiSquaredResult chi_squared_homogeneity(const std::vector<std::int64_t>& a,
                                         const std::vector<std::int64_t>& b) {
  if (a.size() != b.size()) throw InvalidInput("contingency rows differ in length");
  const double na = static_cast<double>(std::accumulate(a.begin(), a.end(), std::int64_t{0}));
  const double nb = static_cast<double>(std::accumulate(b.begin(), b.end(), std::int64_t{0}));
  if (na <= 0.0 || nb <= 0.0) throw InvalidInput("contingency rows must be nonempty");
  ChiSquaredResult r;
  std::size_t used = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double col = static_cast<double>(a[j] + b[j]);
    if (col == 0.0) continue;
    ++used;
    const double ea = col * na / (na + nb);
    const double eb = col * nb / (na + nb);
    r.statistic += (static_cast<double>(a[j]) - ea) * (static_cast<double>(a[j]) - ea) / ea +
                   (static_cast<double>(b[j]) - eb) * (static_cast<double>(b[j]) - eb) / eb;
  }
  if (used < 2) return r;
  r.dof = static_cast<double>(used - 1);
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

double collision_accept_probability(std::int64_t d, std::int64_t n) {
  if (d < 1 || n < 0) throw InvalidInput("collision oracle needs d >= 1 and n >= 0");
  // prob[k] = P(k distinct values so far) weighted by 2^-(repeats so far)
  std::vector<double> prob(static_cast<std::size_t>(std::min(d, n) + 1), 0.0);
  prob[0] = 1.0;
  const double dd = static_cast<double>(d);
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> next(prob.size(), 0.0);
    for (std::size_t k = 0; k < prob.size(); ++k) {
      if (prob[k] == 0.0) continue;
      const double kd = static_cast<double>(k);
      if (k + 1 < prob.size()) next[k + 1] += prob[k] * (dd - kd) / dd;
      next[k] += prob[k] * (kd / dd) * 0.5;
    }
    prob = std::move(next);
  }
  return std::accumulate(prob.begin(), prob.end(), 0.0);
}

}  // namespace dcal
