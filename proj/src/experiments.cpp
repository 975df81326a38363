#include "dcal/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <fmt/format.h>

#include "dcal/stats.hpp"

namespace dcal {

double ExperimentCell::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics)
    if (k == key) return v;
  throw InvalidInput("cell '" + name + "' has no metric '" + key + "'");
}

bool ExperimentResult::passed() const {
  if (degenerate || checks.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ExperimentCell& ExperimentResult::cell(const std::string& name) const {
  for (const auto& c : cells)
    if (c.name == name) return c;
  throw InvalidInput("no cell named '" + name + "'");
}

double ExperimentResult::fit(const std::string& key) const {
  for (const auto& [k, v] : fits)
    if (k == key) return v;
  throw InvalidInput("no fit named '" + key + "'");
}

std::string results_csv(const ExperimentResult& r) {
  std::string out = "experiment,cell,params,metric,value\n";
  for (const auto& c : r.cells) {
    std::vector<std::string> p;
    for (const auto& [k, v] : c.params) p.push_back(fmt::format("{}={}", k, format_double(v)));
    const std::string params = fmt::format("{}", fmt::join(p, ";"));
    out += fmt::format("{},{},{},seed,{}\n", r.id, c.name, params, c.seed);
    for (const auto& [k, v] : c.metrics)
      out += fmt::format("{},{},{},{},{}\n", r.id, c.name, params, k, format_double(v));
  }
  for (const auto& [k, v] : r.fits)
    out += fmt::format("{},fit,,{},{}\n", r.id, k, format_double(v));
  return out;
}

Json summary_json(const ExperimentResult& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  Json fits = Json::object();
  for (const auto& [k, v] : r.fits) fits[k] = v;
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json params = Json::object();
    for (const auto& [k, v] : c.params) params[k] = v;
    Json metrics = Json::object();
    for (const auto& [k, v] : c.metrics) metrics[k] = v;
    cells.push_back(Json{{"name", c.name},
                         {"seed", c.seed},
                         {"params", std::move(params)},
                         {"metrics", std::move(metrics)},
                         {"labels", c.labels}});
  }
  return Json{{"experiment", r.id},     {"seed", r.seed},       {"passed", r.passed()},
              {"degenerate", r.degenerate}, {"params", r.params}, {"fits", std::move(fits)},
              {"checks", std::move(checks)}, {"cells", std::move(cells)}};
}

namespace {

void add_check(ExperimentResult& r, std::string name, bool ok, std::string detail = {}) {
  r.checks.push_back(ExperimentCheck{std::move(name), ok, std::move(detail)});
}

Json to_json(const std::vector<Eigen::Index>& v) {
  Json j = Json::array();
  for (auto x : v) j.push_back(x);
  return j;
}

}  // namespace

// -- convergence --------------------------------------------------------------

namespace {

ConvergenceCellSpec cell_spec(std::string name, KernelKind kind, Eigen::Index dim, double epsilon,
                              double r1, double r2, double shift) {
  ConvergenceCellSpec c;
  c.name = std::move(name);
  c.kernel = kind;
  c.dim = dim;
  c.epsilon = epsilon;
  c.r1 = r1;
  c.r2 = r2;
  c.shift_norm = shift;
  return c;
}

}  // namespace

std::vector<ConvergenceCellSpec> default_convergence_cells() {
  std::vector<ConvergenceCellSpec> cells;
  cells.push_back(cell_spec("min-eps0.5", KernelKind::Min, 1, 0.5, 1.0, 1.0, 0.5));
  cells.push_back(cell_spec("min-eps0.3", KernelKind::Min, 1, 0.3, 1.0, 1.0, 0.3));
  cells.push_back(cell_spec("min-eps0.3-R1=2", KernelKind::Min, 1, 0.3, 2.0, 1.0, 0.3));
  cells.push_back(cell_spec("linear3-eps0.4-R2=1.5", KernelKind::Linear, 3, 0.4, 1.0, 1.5, 0.4));
  cells.push_back(cell_spec("exp2-eps0.4-R2=2", KernelKind::Exp, 2, 0.4, 1.0, 2.0, 0.4));
  ConvergenceCellSpec start =
      cell_spec("min-eps0.3-calibrated-start", KernelKind::Min, 1, 0.3, 1.0, 1.0, 0.3);
  start.start = StartPredictor::Marginal;
  cells.push_back(start);
  return cells;
}

double min_decrease_margin(const CalibrationTrace& t, double eta, double r1) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : t.records)
    m = std::min(m, (r.pot_before - r.pot_after) - (2.0 * eta * r.gap - eta * eta * r1 * r1));
  return m;
}

namespace {

struct CellRun {
  CalibrationResult result;
  CalibConfig config;
};

CellRun run_cell(const ConvergenceConfig& cfg, const ConvergenceCellSpec& spec,
                 std::uint64_t cell_seed) {
  const Kernel kernel = Kernel::make(spec.kernel, spec.dim, spec.r2);
  WorldSpec ws{WorldKind::Planted, cfg.contexts, cfg.support, spec.shift_norm, cfg.noise,
               derive_seed(cell_seed, 0)};
  const FiniteWorld world = make_world(kernel, ws);
  const Predictor p0 =
      spec.start == StartPredictor::Planted ? planted_predictor(world) : marginal_predictor(world);
  CalibConfig cc;
  cc.epsilon = spec.epsilon;
  cc.beta = cfg.beta;
  cc.r1 = spec.r1;
  cc.r2 = spec.r2;
  cc.max_iters = spec.max_iters;
  cc.actions = cfg.actions;
  cc.audit_batch_size = cfg.audit_batch_size;
  cc.heldout_size = cfg.heldout_size;
  cc.pool_size = cfg.pool_size;
  cc.seed = cell_seed;
  cc.algorithm = spec.algorithm;
  cc.threads = cfg.threads;
  cc = resolve(cc);
  WorldSource source(world, derive_seed(cell_seed, 1));
  return CellRun{run_calibration(p0, source, cc), cc};
}

double status_code(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::Calibrated: return 0.0;
    case TerminalStatus::IterationCap: return 1.0;
    default: return 2.0;
  }
}

}  // namespace

ExperimentResult convergence_experiment(const ConvergenceConfig& cfg) {
  if (cfg.cells.empty()) throw InvalidInput("convergence experiment needs at least one cell");
  ExperimentResult out;
  out.id = "convergence";
  out.seed = cfg.seed;
  out.params = Json{{"actions", cfg.actions},       {"beta", cfg.beta},
                    {"audit_batch_size", cfg.audit_batch_size},
                    {"heldout_size", cfg.heldout_size}, {"pool_size", cfg.pool_size},
                    {"contexts", cfg.contexts},     {"support", cfg.support},
                    {"noise", cfg.noise}};

  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    const auto& spec = cfg.cells[i];
    const std::uint64_t cell_seed = derive_seed(cfg.seed, i);
    const CellRun run = run_cell(cfg, spec, cell_seed);
    const CalibrationTrace& t = run.result.trace;
    const long bound = default_max_iters(spec.epsilon, spec.r1, spec.r2);
    const auto iters = static_cast<long>(t.records.size());
    const double margin = min_decrease_margin(t, *run.config.eta, spec.r1);

    ExperimentCell c;
    c.name = spec.name;
    c.seed = cell_seed;
    c.params = {{"epsilon", spec.epsilon},
                {"R1", spec.r1},
                {"R2", spec.r2},
                {"shift_norm", spec.shift_norm},
                {"kernel", static_cast<double>(spec.kernel)},
                {"dim", static_cast<double>(spec.dim)},
                {"planted_start", spec.start == StartPredictor::Planted ? 1.0 : 0.0}};
    c.metrics = {{"iterations", static_cast<double>(iters)},
                 {"iteration_bound", static_cast<double>(bound)},
                 {"max_iters", static_cast<double>(*run.config.max_iters)},
                 {"status", status_code(t.status)},
                 {"eta", *run.config.eta},
                 {"min_decrease_margin", iters > 0 ? margin : 0.0},
                 {"heldout_decce_before", t.heldout_decce_before},
                 {"heldout_decce_after", t.heldout_decce_after},
                 {"heldout_potential_before", t.heldout_potential_before},
                 {"heldout_potential_after", t.heldout_potential_after},
                 {"heldout_halfwidth", t.heldout_halfwidth},
                 {"samples_used", static_cast<double>(t.samples_used)}};
    c.labels.push_back(std::string(to_string(spec.algorithm)));
    if (spec.start == StartPredictor::Marginal) c.labels.push_back("calibrated-start");
    out.cells.push_back(c);

    add_check(out, spec.name + ": terminated without error", t.status != TerminalStatus::Error,
              t.error);
    add_check(out, spec.name + ": iterations <= 16 R1^2 R2^2 / eps^2", iters <= bound,
              fmt::format("{} <= {}", iters, bound));
    if (spec.algorithm == PatchAlgorithm::Alg1)
      add_check(out, spec.name + ": per-iteration potential decrease", iters == 0 || margin >= -1e-9,
                fmt::format("min margin {}", format_double(iters > 0 ? margin : 0.0)));
    if (spec.start == StartPredictor::Planted)
      add_check(out, spec.name + ": held-out decce below epsilon",
                t.heldout_decce_after < spec.epsilon,
                fmt::format("{} < {}", format_double(t.heldout_decce_after), spec.epsilon));
  }

  // Samples consumed against 1/epsilon for both algorithms; recorded, not gated.
  for (PatchAlgorithm alg : {PatchAlgorithm::Alg1, PatchAlgorithm::Alg2}) {
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < cfg.sweep_epsilons.size(); ++j) {
      ConvergenceCellSpec spec =
          cell_spec(fmt::format("sweep-{}-eps{}", to_string(alg), cfg.sweep_epsilons[j]),
                    KernelKind::Min, 1, cfg.sweep_epsilons[j], 1.0, 1.0, cfg.sweep_shift);
      spec.algorithm = alg;
      const std::uint64_t cell_seed = derive_seed(cfg.seed, 1000 + j);
      const CellRun run = run_cell(cfg, spec, cell_seed);
      const auto& t = run.result.trace;
      ExperimentCell c;
      c.name = spec.name;
      c.seed = cell_seed;
      c.params = {{"epsilon", spec.epsilon}, {"shift_norm", spec.shift_norm}};
      c.metrics = {{"iterations", static_cast<double>(t.records.size())},
                   {"samples_used", static_cast<double>(t.samples_used)},
                   {"status", status_code(t.status)},
                   {"heldout_decce_after", t.heldout_decce_after}};
      c.labels = {std::string(to_string(alg)), "ungated"};
      out.cells.push_back(c);
      lx.push_back(std::log(1.0 / spec.epsilon));
      ly.push_back(std::log(static_cast<double>(t.samples_used)));
    }
    if (lx.size() >= 3) {
      const LineFit f = fit_line(lx, ly);
      out.fits.emplace_back(fmt::format("{}_sample_exponent", to_string(alg)), f.slope);
    }
  }
  return out;
}

// -- uniform convergence -------------------------------------------------------

Eigen::MatrixXd gap_contributions(const Predictor& p,
                                  const std::vector<std::pair<LossFunction, LossFunction>>& pairs,
                                  const Batch& batch, const DecisionRule& rule, int threads) {
  require_nonempty(batch);
  const ColumnGroups cg = group_columns(batch.x);
  Eigen::MatrixXd ux(batch.x.rows(), cg.num_groups());
  for (Eigen::Index g = 0; g < cg.num_groups(); ++g)
    ux.col(g) = batch.x.col(cg.representative[static_cast<std::size_t>(g)]);
  const auto st = p.states(ux, threads);
  const Eigen::Index len = p.state_length();
  Eigen::MatrixXd alpha(len, cg.num_groups());
  for (Eigen::Index g = 0; g < cg.num_groups(); ++g) alpha.col(g) = st[static_cast<std::size_t>(g)].alpha;

  const ColumnGroups yg = group_columns(batch.y);
  Eigen::MatrixXd uy(batch.y.rows(), yg.num_groups());
  for (Eigen::Index g = 0; g < yg.num_groups(); ++g)
    uy.col(g) = batch.y.col(yg.representative[static_cast<std::size_t>(g)]);
  const Eigen::MatrixXd anchors = p.anchors().leftCols(len);

  Eigen::MatrixXd h(batch.size(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& [loss, lossprime] = pairs[j];
    const Eigen::MatrixXd fl = loss.values_at(anchors) * alpha;
    const Eigen::MatrixXd flp = lossprime.values_at(anchors) * alpha;
    Eigen::MatrixXd k(flp.rows(), flp.cols());
    for (Eigen::Index g = 0; g < flp.cols(); ++g) k.col(g) = decision_probabilities(flp.col(g), rule);
    const Eigen::MatrixXd ly = loss.values_at(uy);
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const auto gx = cg.group_of[static_cast<std::size_t>(i)];
      const auto gy = yg.group_of[static_cast<std::size_t>(i)];
      h(i, static_cast<Eigen::Index>(j)) = (ly.col(gy) - fl.col(gx)).dot(k.col(gx));
    }
  }
  return h;
}

namespace {

struct DecayRun {
  std::vector<double> metric;  // per grid point
  bool degenerate = false;
};

using Sampler = std::function<Batch(Eigen::Index, Rng&)>;

DecayRun decay_protocol(const Predictor& p,
                        const std::vector<std::pair<LossFunction, LossFunction>>& pairs,
                        const Sampler& draw, const UniformConvergenceConfig& cfg,
                        std::uint64_t seed) {
  const DecisionRule rule{cfg.beta, DecisionMode::Smooth};
  Rng ref_rng(derive_seed(seed, 1));
  const Eigen::VectorXd ref =
      gap_contributions(p, pairs, draw(cfg.reference_n, ref_rng), rule, cfg.threads)
          .colwise()
          .mean()
          .transpose();
  DecayRun out;
  for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    double acc = 0.0;
    for (std::size_t r = 0; r < cfg.resamples; ++r) {
      Rng rng(derive_seed(seed, 100 + gi * 1000 + r));
      const Eigen::VectorXd g =
          gap_contributions(p, pairs, draw(cfg.n_grid[gi], rng), rule, cfg.threads)
              .colwise()
              .mean()
              .transpose();
      acc += (g - ref).cwiseAbs().maxCoeff();
    }
    out.metric.push_back(acc / static_cast<double>(cfg.resamples));
  }
  out.degenerate = std::any_of(out.metric.begin(), out.metric.end(),
                               [](double m) { return !(m > 0.0); });
  return out;
}

std::vector<std::pair<LossFunction, LossFunction>> make_pairs(const Kernel& kernel,
                                                              const Eigen::MatrixXd& outcomes,
                                                              const UniformConvergenceConfig& cfg,
                                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<LossFunction, LossFunction>> pairs;
  for (std::size_t i = 0; i < cfg.pairs; ++i) {
    LossFunction l = random_span_loss(kernel, cfg.actions, 1.0, outcomes, rng, fmt::format("l{}", i));
    LossFunction lp =
        random_span_loss(kernel, cfg.actions, 1.0, outcomes, rng, fmt::format("lp{}", i));
    if (cfg.zero_losses) {
      std::vector<RkhsElement> zeros(cfg.actions, RkhsElement(kernel));
      l = LossFunction(l.id(), zeros, 1.0);
    }
    pairs.emplace_back(std::move(l), std::move(lp));
  }
  return pairs;
}

std::vector<double> log_grid(const std::vector<Eigen::Index>& grid) {
  std::vector<double> x;
  for (auto n : grid) x.push_back(std::log(static_cast<double>(n)));
  return x;
}

std::vector<double> logs(const std::vector<double>& v) {
  std::vector<double> out;
  for (double m : v) out.push_back(std::log(m));
  return out;
}

}  // namespace

ExperimentResult uniform_convergence_experiment(const UniformConvergenceConfig& cfg) {
  if (cfg.n_grid.size() < 3) throw InvalidInput("uniform convergence needs at least 3 grid points");
  if (cfg.resamples < 1 || cfg.pairs < 1) throw InvalidInput("resamples and pairs must be >= 1");
  const Eigen::Index max_n = *std::max_element(cfg.n_grid.begin(), cfg.n_grid.end());
  if (cfg.reference_n < 10 * max_n)
    throw InvalidInput("reference_n must be at least 10x the largest grid n");

  ExperimentResult out;
  out.id = "uniform_convergence";
  out.seed = cfg.seed;
  out.params = Json{{"n_grid", to_json(cfg.n_grid)},
                    {"reference_n", cfg.reference_n},
                    {"resamples", cfg.resamples},
                    {"pairs", cfg.pairs},
                    {"actions", cfg.actions},
                    {"beta", cfg.beta},
                    {"slope_min", cfg.slope_min},
                    {"slope_max", cfg.slope_max},
                    {"ci_level", cfg.ci_level},
                    {"dims", to_json(cfg.dims)}};
  const std::vector<double> lx = log_grid(cfg.n_grid);

  // Fit self-test on exact c / sqrt(n) data.
  {
    std::vector<double> ly;
    for (auto n : cfg.n_grid) ly.push_back(std::log(0.7 / std::sqrt(static_cast<double>(n))));
    const LineFit f = fit_line(lx, ly);
    out.fits.emplace_back("selftest_slope", f.slope);
    add_check(out, "fit self-test slope -0.5 +- 0.02", std::abs(f.slope + 0.5) <= 0.02,
              format_double(f.slope));
  }

  // Main run: min kernel on [0,1], contexts uniform, y = (x + u) / 2.
  {
    const Kernel kernel = Kernel::min(1.0);
    Eigen::MatrixXd anchors(1, 3);
    anchors << 0.2, 0.5, 0.8;
    AffineBase base{Eigen::MatrixXd(3, 1), Eigen::VectorXd(3)};
    base.weights << -0.5, 0.0, 0.7;
    base.offset << 0.6, 0.2, 0.0;
    const Predictor p(kernel, anchors, base);
    Rng grid_rng(derive_seed(cfg.seed, 10));
    Eigen::MatrixXd spanned(1, 32);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index j = 0; j < spanned.cols(); ++j) spanned(0, j) = unif(grid_rng);
    const auto pairs = make_pairs(kernel, spanned, cfg, derive_seed(cfg.seed, 11));
    const Sampler draw = [](Eigen::Index n, Rng& rng) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Batch b;
      b.x.resize(1, n);
      b.y.resize(1, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        b.x(0, i) = u(rng);
        b.y(0, i) = 0.5 * (b.x(0, i) + u(rng));
      }
      return b;
    };
    const DecayRun run = decay_protocol(p, pairs, draw, cfg, derive_seed(cfg.seed, 12));
    for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
      ExperimentCell c;
      c.name = fmt::format("min-n{}", cfg.n_grid[gi]);
      c.seed = derive_seed(cfg.seed, 12);
      c.params = {{"n", static_cast<double>(cfg.n_grid[gi])}};
      c.metrics = {{"mean_sup_gap_error", run.metric[gi]}};
      c.labels = {"min"};
      out.cells.push_back(c);
    }
    if (run.degenerate) {
      out.degenerate = true;
      add_check(out, "non-degenerate loss pool", false, "sup-gap error is identically zero");
      return out;
    }
    const LineFit f = fit_line(lx, logs(run.metric));
    out.fits.emplace_back("min_slope", f.slope);
    out.fits.emplace_back("min_slope_se", f.slope_se);
    add_check(out, fmt::format("min kernel slope in [{}, {}]", cfg.slope_min, cfg.slope_max),
              f.slope >= cfg.slope_min && f.slope <= cfg.slope_max, format_double(f.slope));
  }

  // Dimension check: the same 4-dimensional geometry embedded in each dim.
  std::vector<LineFit> dim_fits;
  {
    const Kernel k4 = Kernel::linear(4, 1.0);
    WorldSpec ws{WorldKind::Planted, 4, 16, 0.3, 0.5, derive_seed(cfg.seed, 20)};
    const FiniteWorld w4 = make_world(k4, ws);
    for (auto d : cfg.dims) {
      if (d < 4) throw InvalidInput("dimension check needs dims >= 4");
      Rng qrng(derive_seed(cfg.seed, 21 + static_cast<std::uint64_t>(d)));
      std::normal_distribution<double> gauss(0.0, 1.0);
      Eigen::MatrixXd g(d, 4);
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = gauss(qrng);
      const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                                Eigen::MatrixXd::Identity(d, 4);
      const Kernel kd = Kernel::linear(d, 1.0);
      FiniteWorld wd{kd, q * w4.support, w4.truth, w4.planted, RkhsElement(kd), ws};
      const Predictor p = planted_predictor(wd);
      const auto pairs = make_pairs(kd, wd.support, cfg, derive_seed(cfg.seed, 22));
      const Sampler draw = [&wd](Eigen::Index n, Rng& rng) { return wd.sample(n, rng); };
      const std::uint64_t seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(d));
      const DecayRun run = decay_protocol(p, pairs, draw, cfg, seed);
      for (std::size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
        ExperimentCell c;
        c.name = fmt::format("linear{}-n{}", d, cfg.n_grid[gi]);
        c.seed = seed;
        c.params = {{"n", static_cast<double>(cfg.n_grid[gi])}, {"dim", static_cast<double>(d)}};
        c.metrics = {{"mean_sup_gap_error", run.metric[gi]}};
        c.labels = {fmt::format("linear{}", d)};
        out.cells.push_back(c);
      }
      if (run.degenerate) {
        out.degenerate = true;
        add_check(out, fmt::format("linear({}) non-degenerate", d), false);
        return out;
      }
      const LineFit f = fit_line(lx, logs(run.metric));
      out.fits.emplace_back(fmt::format("linear{}_slope", d), f.slope);
      out.fits.emplace_back(fmt::format("linear{}_intercept", d), f.intercept);
      out.fits.emplace_back(fmt::format("linear{}_intercept_se", d), f.intercept_se);
      dim_fits.push_back(f);
    }
  }
  for (std::size_t i = 1; i < dim_fits.size(); ++i) {
    const LineFit& a = dim_fits[0];
    const LineFit& b = dim_fits[i];
    const double dof = static_cast<double>(a.points + b.points) - 4.0;
    const double band =
        t_quantile(cfg.ci_level, dof) * std::sqrt(a.intercept_se * a.intercept_se +
                                                  b.intercept_se * b.intercept_se);
    const double diff = std::abs(a.intercept - b.intercept);
    out.fits.emplace_back(fmt::format("intercept_band_{}_{}", cfg.dims[0], cfg.dims[i]), band);
    add_check(out,
              fmt::format("linear({}) vs linear({}) intercepts within {} band", cfg.dims[0],
                          cfg.dims[i], cfg.ci_level),
              diff < band, fmt::format("|diff| {} < {}", format_double(diff), format_double(band)));
  }
  return out;
}

// -- regret ---------------------------------------------------------------------

RegretSummary regret_check(const Predictor& p, const std::vector<LossFunction>& losses,
                           const Batch& batch, double epsilon, double beta, double r1, double r2,
                           double delta) {
  if (losses.empty()) throw InvalidInput("regret check needs a nonempty loss set");
  require_nonempty(batch);
  const ColumnGroups cg = group_columns(batch.x);
  Eigen::MatrixXd ux(batch.x.rows(), cg.num_groups());
  for (Eigen::Index g = 0; g < cg.num_groups(); ++g)
    ux.col(g) = batch.x.col(cg.representative[static_cast<std::size_t>(g)]);
  const auto st = p.states(ux);
  const Eigen::Index len = p.state_length();
  Eigen::MatrixXd alpha(len, cg.num_groups());
  for (Eigen::Index g = 0; g < cg.num_groups(); ++g) alpha.col(g) = st[static_cast<std::size_t>(g)].alpha;
  const Eigen::MatrixXd anchors = p.anchors().leftCols(len);

  const double actions = static_cast<double>(losses.front().num_actions());
  const double smooth_term = (std::log(actions) + 1.0) / beta;
  RegretSummary s;
  s.slack = hoeffding_halfwidth(2.0 * r1 * r2, batch.size(), delta);
  s.bound = 2.0 * epsilon + smooth_term + s.slack;
  s.max_regret = -std::numeric_limits<double>::infinity();
  s.worst_smooth_margin = std::numeric_limits<double>::infinity();

  std::vector<Eigen::MatrixXd> probs, truth;
  for (const auto& l : losses) {
    const Eigen::MatrixXd f = l.values_at(anchors) * alpha;
    Eigen::MatrixXd k(f.rows(), f.cols());
    for (Eigen::Index g = 0; g < f.cols(); ++g) {
      k.col(g) = smooth_best_response(f.col(g), beta);
      const double margin = smooth_term - (k.col(g).dot(f.col(g)) - f.col(g).minCoeff());
      s.worst_smooth_margin = std::min(s.worst_smooth_margin, margin);
      if (margin < -1e-9) s.smooth_ok = false;
    }
    probs.push_back(std::move(k));
    truth.push_back(l.values_at(batch.y));
  }
  const double n = static_cast<double>(batch.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    for (std::size_t j = 0; j < losses.size(); ++j) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < batch.size(); ++t) {
        const auto g = cg.group_of[static_cast<std::size_t>(t)];
        acc += (probs[i].col(g) - probs[j].col(g)).dot(truth[i].col(t));
      }
      const double regret = acc / n;
      s.max_regret = std::max(s.max_regret, regret);
      if (regret > s.bound) s.pairs_ok = false;
    }
  }
  return s;
}

ExperimentResult regret_experiment(const RegretConfig& cfg) {
  if (cfg.losses < 1) throw InvalidInput("regret experiment needs a nonempty loss set");
  ExperimentResult out;
  out.id = "regret";
  out.seed = cfg.seed;
  out.params = Json{{"epsilon", cfg.epsilon}, {"beta", cfg.beta},   {"actions", cfg.actions},
                    {"losses", cfg.losses},   {"R1", cfg.r1},       {"delta", cfg.delta},
                    {"eval_size", cfg.eval_size}, {"audit_batch_size", cfg.audit_batch_size},
                    {"world", std::string(to_string(cfg.world.kind))},
                    {"shift_norm", cfg.world.shift_norm}};
  const Kernel kernel = Kernel::min(1.0);
  WorldSpec ws = cfg.world;
  ws.seed = derive_seed(cfg.seed, 0);
  const FiniteWorld world = make_world(kernel, ws);
  Rng loss_rng(derive_seed(cfg.seed, 1));
  const std::vector<LossFunction> losses =
      random_loss_pool(kernel, cfg.actions, cfg.r1, world.support, cfg.losses, loss_rng, "user");

  CalibConfig cc;
  cc.epsilon = cfg.epsilon;
  cc.beta = cfg.beta;
  cc.r1 = cfg.r1;
  cc.r2 = kernel.r2();
  cc.actions = cfg.actions;
  cc.audit_batch_size = cfg.audit_batch_size;
  cc.heldout_size = cfg.heldout_size;
  cc.pool_size = cfg.pool_size;
  cc.seed = derive_seed(cfg.seed, 2);
  cc.user_losses = losses;
  cc.threads = cfg.threads;
  WorldSource source(world, derive_seed(cfg.seed, 3));
  const CalibrationResult cal = run_calibration(planted_predictor(world), source, cc);
  add_check(out, "calibration reached the audit threshold",
            cal.trace.status == TerminalStatus::Calibrated,
            std::string(to_string(cal.trace.status)));

  Rng eval_rng(derive_seed(cfg.seed, 4));
  const Batch eval = world.sample(cfg.eval_size, eval_rng);
  std::vector<double> sweep = cfg.beta_sweep;
  if (std::find(sweep.begin(), sweep.end(), cfg.beta) == sweep.end()) sweep.push_back(cfg.beta);
  for (double b : sweep) {
    const RegretSummary s =
        regret_check(cal.predictor, losses, eval, cfg.epsilon, b, cfg.r1, kernel.r2(), cfg.delta);
    ExperimentCell c;
    c.name = fmt::format("beta={}", b);
    c.seed = derive_seed(cfg.seed, 4);
    c.params = {{"beta", b}, {"epsilon", cfg.epsilon}};
    c.metrics = {{"max_regret", s.max_regret},
                 {"bound", s.bound},
                 {"slack", s.slack},
                 {"worst_smooth_margin", s.worst_smooth_margin},
                 {"iterations", static_cast<double>(cal.trace.records.size())}};
    if (b != cfg.beta) c.labels.push_back("ungated");
    out.cells.push_back(c);
    // the smoothing lemma holds for any beta, so it is gated everywhere
    add_check(out, fmt::format("smooth-approx per sample at beta={}", b), s.smooth_ok,
              format_double(s.worst_smooth_margin));
    if (b == cfg.beta)
      add_check(out, "regret <= 2 eps + (log|A|+1)/beta + slack for every ordered pair",
                s.pairs_ok,
                fmt::format("max {} <= {}", format_double(s.max_regret), format_double(s.bound)));
  }
  return out;
}

// -- distinguishing -------------------------------------------------------------

namespace {

struct CellCounts {
  long accept_d1 = 0;
  long accept_d2 = 0;
  double d2_decce_at_sigma = 0.0;
};

CellCounts run_distinguishing_cell(Eigen::Index d, Eigen::Index n, double epsilon, long trials,
                                   std::uint64_t seed) {
  Rng rng(seed);
  CellCounts c;
  for (long t = 0; t < trials; ++t) {
    const auto i1 = gen_lower_bound(d, epsilon, n, LowerBoundWorld::D1, rng);
    const auto i2 = gen_lower_bound(d, epsilon, n, LowerBoundWorld::D2, rng);
    c.accept_d1 += collision_accepts(i1) ? 1 : 0;
    c.accept_d2 += collision_accepts(i2) ? 1 : 0;
    if (t == 0) c.d2_decce_at_sigma = decce_linear_binary(i2.predictions, i2.outcomes, i2.sigma);
  }
  return c;
}

}  // namespace

ExperimentResult distinguishing_experiment(const DistinguishingConfig& cfg) {
  if (cfg.trials < 100) throw InvalidInput("distinguishing experiment needs trials >= 100");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0 / 3.0))
    throw InvalidInput("epsilon must lie in (0,1/3)");
  if (cfg.d_grid.empty() || cfg.n_grid.empty()) throw InvalidInput("empty d or n grid");
  ExperimentResult out;
  out.id = "distinguishing";
  out.seed = cfg.seed;
  out.params = Json{{"d_grid", to_json(cfg.d_grid)},
                    {"n_grid", to_json(cfg.n_grid)},
                    {"epsilon", cfg.epsilon},
                    {"trials", cfg.trials},
                    {"ci_level", cfg.ci_level},
                    {"marginal_instances", cfg.marginal_instances},
                    {"marginal_d", cfg.marginal_d}};
  const double trials = static_cast<double>(cfg.trials);

  struct Row {
    Eigen::Index d, n;
    double gap, oracle, lo, hi, cp_lo, cp_hi;
  };
  std::vector<Row> rows;
  std::uint64_t stream = 0;
  auto run = [&](Eigen::Index d, Eigen::Index n, const std::string& name, bool extra) {
    const std::uint64_t seed = derive_seed(cfg.seed, stream++);
    const CellCounts cc = run_distinguishing_cell(d, n, cfg.epsilon, cfg.trials, seed);
    const double p1 = collision_accept_probability(d, n);
    const auto [klo, khi] = binomial_interval(cfg.trials, p1, cfg.ci_level);
    const double gap = std::abs(static_cast<double>(cc.accept_d1 - cc.accept_d2)) / trials;
    // D2 accepts with probability one, so the gap is 1 - (D1 acceptance rate).
    const double lo = 1.0 - static_cast<double>(khi) / trials;
    const double hi = 1.0 - static_cast<double>(klo) / trials;
    const auto [cplo, cphi] =
        clopper_pearson(cfg.trials - cc.accept_d1, cfg.trials, cfg.ci_level);
    ExperimentCell c;
    c.name = name;
    c.seed = seed;
    c.params = {{"d", static_cast<double>(d)}, {"n", static_cast<double>(n)}};
    c.metrics = {{"accept_d1", static_cast<double>(cc.accept_d1)},
                 {"accept_d2", static_cast<double>(cc.accept_d2)},
                 {"gap", gap},
                 {"oracle_gap", 1.0 - p1},
                 {"oracle_ci_lo", lo},
                 {"oracle_ci_hi", hi},
                 {"n2_over_d", static_cast<double>(n * n) / static_cast<double>(d)},
                 {"d2_decce_at_sigma", cc.d2_decce_at_sigma}};
    c.labels.push_back(n < d ? "in-regime" : "outside-regime");
    if (extra) c.labels.push_back("monotone-n");
    out.cells.push_back(c);
    add_check(out, name + ": gap inside exact-oracle CI", gap >= lo - 1e-12 && gap <= hi + 1e-12,
              fmt::format("{} in [{}, {}]", format_double(gap), format_double(lo), format_double(hi)));
    const double slack = 3.0 * cfg.epsilon * std::sqrt(0.25 / static_cast<double>(n));
    add_check(out, name + ": D2 decce at sigma >= eps - 3 slack",
              cc.d2_decce_at_sigma >= cfg.epsilon - slack, format_double(cc.d2_decce_at_sigma));
    rows.push_back(Row{d, n, gap, 1.0 - p1, lo, hi, cplo, cphi});
    return rows.back();
  };

  for (auto d : cfg.d_grid)
    for (auto n : cfg.n_grid) run(d, n, fmt::format("d={},n={}", d, n), false);
  const std::size_t grid_rows = rows.size();

  // gap ~ C n^2 / d fitted through the origin on cells with n^2/d <= 1
  double su = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < grid_rows; ++i) {
    const double u = static_cast<double>(rows[i].n * rows[i].n) / static_cast<double>(rows[i].d);
    if (u <= 1.0) {
      su += u * u;
      sg += u * rows[i].gap;
    }
  }
  const double c_fit = su > 0.0 ? sg / su : 0.0;
  out.fits.emplace_back("C", c_fit);
  for (std::size_t i = 0; i < grid_rows; ++i) {
    const double u = static_cast<double>(rows[i].n * rows[i].n) / static_cast<double>(rows[i].d);
    const double width = rows[i].hi - rows[i].lo;
    add_check(out, fmt::format("d={},n={}: gap <= C n^2/d + CI", rows[i].d, rows[i].n),
              rows[i].gap <= c_fit * u + width + 1e-12,
              fmt::format("{} <= {}", format_double(rows[i].gap), format_double(c_fit * u + width)));
  }

  // decreasing in d at fixed n
  std::vector<Eigen::Index> ds = cfg.d_grid;
  std::sort(ds.begin(), ds.end());
  auto find = [&](Eigen::Index d, Eigen::Index n) -> const Row& {
    for (std::size_t i = 0; i < grid_rows; ++i)
      if (rows[i].d == d && rows[i].n == n) return rows[i];
    throw std::logic_error("missing cell");
  };
  for (std::size_t k = 1; k < ds.size(); ++k) {
    double prev = 0.0, next = 0.0;
    for (auto n : cfg.n_grid) {
      const Row& a = find(ds[k - 1], n);
      const Row& b = find(ds[k], n);
      prev += a.gap;
      next += b.gap;
      add_check(out, fmt::format("n={}: no significant increase from d={} to d={}", n, ds[k - 1], ds[k]),
                b.cp_lo <= a.cp_hi,
                fmt::format("{} vs {}", format_double(a.gap), format_double(b.gap)));
    }
    add_check(out, fmt::format("summed gap decreases from d={} to d={}", ds[k - 1], ds[k]),
              next < prev, fmt::format("{} > {}", format_double(prev), format_double(next)));
  }

  // monotone in n around sqrt(d)
  for (auto d : cfg.d_grid) {
    const double root = std::sqrt(static_cast<double>(d));
    const auto n_hi = static_cast<Eigen::Index>(std::ceil(4.0 * root));
    const auto n_lo = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(root / 4.0)));
    const Row hi = run(d, n_hi, fmt::format("d={},n={}(4sqrt d)", d, n_hi), true);
    const Row lo = run(d, n_lo, fmt::format("d={},n={}(sqrt d/4)", d, n_lo), true);
    add_check(out, fmt::format("d={}: gap at n={} exceeds gap at n={}", d, n_hi, n_lo),
              hi.gap > lo.gap, fmt::format("{} > {}", format_double(hi.gap), format_double(lo.gap)));
  }

  // identical single-sample marginals
  {
    const Eigen::Index d = cfg.marginal_d;
    std::vector<std::int64_t> c1(static_cast<std::size_t>(2 * d), 0), c2(c1.size(), 0);
    Rng rng(derive_seed(cfg.seed, 9999));
    for (Eigen::Index t = 0; t < cfg.marginal_instances; ++t) {
      const auto a = gen_lower_bound(d, cfg.epsilon, 1, LowerBoundWorld::D1, rng);
      const auto b = gen_lower_bound(d, cfg.epsilon, 1, LowerBoundWorld::D2, rng);
      auto cat = [&](const LowerBoundInstance& inst) {
        const bool up = inst.outcomes(0, 0) > inst.predictions(0, 0);
        return static_cast<std::size_t>(2 * inst.index[0] + (up ? 1 : 0));
      };
      ++c1[cat(a)];
      ++c2[cat(b)];
    }
    const ChiSquaredResult chi = chi_squared_homogeneity(c1, c2);
    out.fits.emplace_back("marginal_chi2", chi.statistic);
    out.fits.emplace_back("marginal_p_value", chi.p_value);
    add_check(out, "D1/D2 single-sample marginals not rejected at 0.01", chi.p_value >= 0.01,
              fmt::format("p = {}", format_double(chi.p_value)));
  }
  return out;
}

}  // namespace dcal
