#include "dcal/synth.hpp"

#include <cmath>

#include <fmt/format.h>

namespace dcal {

LossFunction make_piecewise_linear_loss(const Kernel& kernel, const Eigen::VectorXd& k1,
                                        const Eigen::VectorXd& k2, const Eigen::VectorXd& c,
                                        double bound, std::string id) {
  if (kernel.kind() != KernelKind::Min) throw ConfigError("piecewise-linear losses use the min kernel");
  if (k1.size() != k2.size() || k1.size() != c.size() || k1.size() == 0)
    throw InvalidInput("piecewise-linear loss needs k1, k2, c per action");
  std::vector<RkhsElement> per_action;
  for (Eigen::Index a = 0; a < k1.size(); ++a) {
    if (!(c(a) >= 0.0 && c(a) <= 1.0)) throw InvalidInput("turning point c must lie in [0,1]");
    if (std::abs(k1(a)) > bound || std::abs(k2(a)) > bound)
      throw InvalidInput("slopes exceed the declared bound");
    Eigen::MatrixXd anchors(1, 2);
    anchors << 1.0, c(a);
    Eigen::VectorXd coeffs(2);
    coeffs << k2(a), k1(a) - k2(a);
    per_action.emplace_back(kernel, std::move(anchors), std::move(coeffs));
  }
  return LossFunction(std::move(id), std::move(per_action), bound);
}

LossFunction make_cobb_douglas_loss(const Kernel& kernel, const Eigen::MatrixXd& alpha,
                                    double sign, double bound, std::string id) {
  if (kernel.kind() != KernelKind::Exp) throw ConfigError("Cobb-Douglas losses use the exp kernel");
  if (sign != 1.0 && sign != -1.0) throw InvalidInput("sign must be +1 or -1");
  if (alpha.rows() != kernel.dim() || alpha.cols() == 0)
    throw InvalidInput("Cobb-Douglas loss needs one exponent vector per action");
  std::vector<RkhsElement> per_action;
  for (Eigen::Index a = 0; a < alpha.cols(); ++a) {
    const auto col = alpha.col(a);
    if ((col.array() < 0.0).any() || (col.array() > 1.0).any() || std::abs(col.sum() - 1.0) > 1e-12)
      throw InvalidInput("Cobb-Douglas exponents must lie on the simplex");
    per_action.emplace_back(kernel, Eigen::MatrixXd(col), Eigen::VectorXd::Constant(1, sign));
  }
  return LossFunction(std::move(id), std::move(per_action), bound);
}

std::string_view to_string(WorldKind kind) {
  switch (kind) {
    case WorldKind::Deterministic: return "deterministic";
    case WorldKind::Noisy: return "noisy";
    case WorldKind::Planted: return "planted";
  }
  return "unknown";
}

WorldKind world_kind_from_string(std::string_view name) {
  if (name == "deterministic") return WorldKind::Deterministic;
  if (name == "noisy") return WorldKind::Noisy;
  if (name == "planted") return WorldKind::Planted;
  throw InvalidInput("unknown world '" + std::string(name) + "'");
}

Eigen::MatrixXd make_support(const Kernel& kernel, Eigen::Index m, Rng& rng) {
  if (m < 2) throw InvalidInput("support needs at least 2 points");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd s(kernel.dim(), m);
  if (kernel.kind() == KernelKind::Min) {
    s(0, 0) = 0.0;
    s(0, 1) = 1.0;
    for (Eigen::Index j = 2; j < m; ++j) s(0, j) = unif(rng);
    return s;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double radius = kernel.domain_radius();
  const double d = static_cast<double>(kernel.dim());
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd v(kernel.dim());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
    const double n = v.norm();
    if (n == 0.0) v(0) = 1.0;
    const double r = j == 0 ? radius : radius * std::pow(unif(rng), 1.0 / d);
    s.col(j) = v.normalized() * r * (1.0 - 1e-12);
  }
  return s;
}

Batch FiniteWorld::sample(Eigen::Index n, Rng& rng) const {
  std::uniform_int_distribution<Eigen::Index> ctx(0, truth.cols() - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Batch b;
  b.x = Eigen::MatrixXd::Zero(truth.cols(), n);
  b.y.resize(support.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index c = ctx(rng);
    b.x(c, i) = 1.0;
    const double u = unif(rng);
    double acc = 0.0;
    Eigen::Index j = truth.rows() - 1;
    for (Eigen::Index k = 0; k < truth.rows(); ++k) {
      acc += truth(k, c);
      if (u < acc) {
        j = k;
        break;
      }
    }
    b.y.col(i) = support.col(j);
  }
  return b;
}

FiniteWorld make_world(const Kernel& kernel, const WorldSpec& spec) {
  if (spec.contexts < 1) throw InvalidInput("world needs at least one context");
  if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) throw InvalidInput("noise must lie in [0,1]");
  Rng rng(spec.seed);
  const Eigen::MatrixXd support = make_support(kernel, spec.support, rng);
  const Eigen::Index m = support.cols();
  const Eigen::Index c = spec.contexts;

  std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(m, c);
  for (Eigen::Index k = 0; k < c; ++k) {
    Eigen::VectorXd dir(m);
    for (Eigen::Index j = 0; j < m; ++j) dir(j) = gamma(rng);
    dir /= dir.sum();
    const Eigen::Index peak = pick(rng);
    if (spec.kind == WorldKind::Deterministic) {
      base(peak, k) = 1.0;
    } else {
      base.col(k) = spec.noise * dir;
      base(peak, k) += 1.0 - spec.noise;
    }
  }

  FiniteWorld w{kernel, support, base, base, RkhsElement(kernel), spec};
  if (spec.kind != WorldKind::Planted) return w;

  if (!(spec.shift_norm >= 0.0)) throw InvalidInput("shift norm must be >= 0");
  const Eigen::MatrixXd g = kernel.gram(support, support);
  Eigen::Index jp = 0, jm = 1;
  double best = -1.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double dist2 = g(i, i) + g(j, j) - 2.0 * g(i, j);
      if (dist2 > best) {
        best = dist2;
        jp = i;
        jm = j;
      }
    }
  const double dist = std::sqrt(std::max(0.0, best));
  const double tau = dist > 0.0 ? spec.shift_norm / dist : 0.0;
  if (tau > 1.0) throw InvalidInput("shift norm too large for this support");
  for (Eigen::Index k = 0; k < c; ++k) {
    w.planted.col(k) = (1.0 - tau) * base.col(k);
    w.planted(jm, k) += tau;
    w.truth.col(k) = (1.0 - tau) * base.col(k);
    w.truth(jp, k) += tau;
  }
  Eigen::MatrixXd anchors(kernel.dim(), 2);
  anchors << support.col(jp), support.col(jm);
  Eigen::VectorXd coeffs(2);
  coeffs << tau, -tau;
  w.shift = RkhsElement(kernel, std::move(anchors), std::move(coeffs));
  return w;
}

Predictor planted_predictor(const FiniteWorld& w) {
  return tabular_predictor(w.kernel, w.support, w.planted);
}

Predictor truth_predictor(const FiniteWorld& w) {
  return tabular_predictor(w.kernel, w.support, w.truth);
}

Predictor marginal_predictor(const FiniteWorld& w) {
  return constant_predictor(w.kernel, w.support, w.truth.rowwise().mean(), w.truth.cols());
}

LowerBoundInstance gen_lower_bound(Eigen::Index d, double epsilon, Eigen::Index n,
                                   LowerBoundWorld world, Rng& rng,
                                   std::optional<Eigen::VectorXd> sigma) {
  if (d < 2) throw InvalidInput("lower-bound instance needs d >= 2");
  if (!(epsilon > 0.0 && epsilon < 1.0 / 3.0)) throw InvalidInput("epsilon must lie in (0,1/3)");
  if (n < 1) throw InvalidInput("lower-bound instance needs n >= 1");
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<Eigen::Index> vertex(0, d - 1);
  LowerBoundInstance inst;
  inst.d = d;
  inst.epsilon = epsilon;
  inst.world = world;
  const double unit = 1.0 / std::sqrt(static_cast<double>(d));
  if (world == LowerBoundWorld::D2) {
    if (sigma) {
      if (sigma->size() != d) throw InvalidInput("sigma has the wrong dimension");
      inst.sigma = *sigma;
    } else {
      inst.sigma.resize(d);
      for (Eigen::Index i = 0; i < d; ++i) inst.sigma(i) = coin(rng) ? unit : -unit;
    }
  }
  inst.predictions = Eigen::MatrixXd::Zero(d, n);
  inst.outcomes = Eigen::MatrixXd::Zero(d, n);
  inst.index.resize(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::Index i = vertex(rng);
    inst.index[static_cast<std::size_t>(s)] = i;
    inst.predictions(i, s) = 0.5;
    double sign;
    if (world == LowerBoundWorld::D1)
      sign = coin(rng) ? 1.0 : -1.0;
    else
      sign = inst.sigma(i) > 0.0 ? 1.0 : -1.0;
    inst.outcomes.col(s) = inst.predictions.col(s);
    inst.outcomes(0, s) += epsilon * sign;
  }
  return inst;
}

bool collision_accepts(const LowerBoundInstance& inst) {
  std::vector<int> seen(static_cast<std::size_t>(inst.d), 0);
  for (Eigen::Index s = 0; s < inst.n(); ++s) {
    const int sign = inst.outcomes(0, s) - inst.predictions(0, s) > 0.0 ? 1 : -1;
    int& slot = seen[static_cast<std::size_t>(inst.index[static_cast<std::size_t>(s)])];
    if (slot == 0)
      slot = sign;
    else if (slot != sign)
      return false;
  }
  return true;
}

double decce_linear_binary(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& outcomes,
                           const Eigen::MatrixXd& r_grid) {
  if (r_grid.cols() == 0) throw InvalidInput("r grid is empty");
  if (outcomes.cols() == 0) throw InvalidInput("no samples");
  if (r_grid.rows() != predictions.rows()) throw InvalidInput("r grid dimension mismatch");
  const Eigen::MatrixXd res = outcomes - predictions;
  const Eigen::MatrixXd proj = r_grid.transpose() * predictions;  // grid x n
  const double n = static_cast<double>(outcomes.cols());
  double best = 0.0;
  for (Eigen::Index g = 0; g < r_grid.cols(); ++g) {
    Eigen::VectorXd pos = Eigen::VectorXd::Zero(res.rows());
    Eigen::VectorXd neg = Eigen::VectorXd::Zero(res.rows());
    for (Eigen::Index s = 0; s < res.cols(); ++s) {
      if (proj(g, s) > 0.0)
        pos += res.col(s);
      else
        neg += res.col(s);
    }
    best = std::max(best, pos.norm() / n + neg.norm() / n);
  }
  return best;
}

Eigen::MatrixXd default_r_grid(Eigen::Index d, Rng& rng, Eigen::Index random_count) {
  if (d < 1) throw InvalidInput("grid dimension must be >= 1");
  if (d <= 12) {
    const Eigen::Index count = Eigen::Index(1) << d;
    const double unit = 1.0 / std::sqrt(static_cast<double>(d));
    Eigen::MatrixXd g(d, count);
    for (Eigen::Index m = 0; m < count; ++m)
      for (Eigen::Index i = 0; i < d; ++i) g(i, m) = ((m >> i) & 1) ? unit : -unit;
    return g;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(d, random_count);
  for (Eigen::Index m = 0; m < random_count; ++m) {
    for (Eigen::Index i = 0; i < d; ++i) g(i, m) = gauss(rng);
    g.col(m).normalize();
  }
  return g;
}

bool shatters_vertices(Eigen::Index d, const Eigen::MatrixXd& r_grid) {
  if (d < 1 || d > 20) throw InvalidInput("exhaustive shattering check needs 1 <= d <= 20");
  if (r_grid.rows() != d) throw InvalidInput("r grid dimension mismatch");
  std::vector<bool> hit(std::size_t{1} << d, false);
  for (Eigen::Index g = 0; g < r_grid.cols(); ++g) {
    std::size_t mask = 0;
    for (Eigen::Index i = 0; i < d; ++i)
      if (0.5 * r_grid(i, g) > 0.0) mask |= std::size_t{1} << i;
    hit[mask] = true;
  }
  for (bool h : hit)
    if (!h) return false;
  return true;
}

}  // namespace dcal
