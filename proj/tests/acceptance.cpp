// Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.
//
// usage: acceptance <path-to-dcal-cli> <fixtures-dir> <scratch-dir>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dcal/audit.hpp"
#include "dcal/calibrate.hpp"
#include "dcal/decision.hpp"
#include "dcal/experiments.hpp"
#include "dcal/serialize.hpp"
#include "dcal/synth.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace dcal;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

MatrixXd random_ball(Eigen::Index d, Eigen::Index n, double radius, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd m(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXd v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = g(rng);
    m.col(j) = v.normalized() * radius * std::pow(u(rng), 1.0 / static_cast<double>(d));
  }
  return m;
}

MatrixXd gaussian(Eigen::Index r, Eigen::Index c, double scale, Rng& rng) {
  std::normal_distribution<double> g(0.0, scale);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// 1 ----------------------------------------------------------------------------
Outcome oracle_equivalence() {
  double worst = 0.0;
  const Eigen::Index dims[] = {2, 5, 10};
  for (int inst = 0; inst < 50; ++inst) {
    Rng rng(derive_seed(101, inst));
    const Eigen::Index d = dims[inst % 3];
    const Eigen::Index dx = 3, n = 40;
    const std::size_t actions = 1 + inst % 4;
    const double r2 = 1.5;
    const Kernel kernel = Kernel::linear(d, r2);
    const MatrixXd base_anchors = random_ball(d, 4, r2, rng);
    const AffineBase base{gaussian(4, dx, 0.5, rng), gaussian(4, 1, 0.5, rng).col(0)};
    Predictor p(kernel, base_anchors, base);
    oracle::Model m(base_anchors, base, r2);

    CalibConfig cfg;
    cfg.epsilon = 0.3;
    cfg.beta = std::uniform_real_distribution<double>(0.5, 5.0)(rng);
    cfg.r1 = 1.0;
    cfg.r2 = r2;
    cfg = resolve(cfg);
    const DecisionRule rule{cfg.beta, DecisionMode::Smooth};

    auto note = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
    auto compare_all = [&](const Batch& b, const LossFunction& l, const LossFunction& lp) {
      const MatrixXd rl = oracle::loss_vectors(l), rp = oracle::loss_vectors(lp);
      MatrixXd xs(dx, 5 + b.size());
      xs << gaussian(dx, 5, 1.0, rng), b.x;
      for (Eigen::Index i = 0; i < xs.cols(); ++i) {
        const VectorXd want = m(xs.col(i));
        worst = std::max(worst, (oracle::vec(p.evaluate(xs.col(i))) - want).cwiseAbs().maxCoeff());
        for (std::size_t a = 0; a < actions; ++a)
          note(loss_estimate(p, xs.col(i), a, l), rl.col(static_cast<Eigen::Index>(a)).dot(want));
      }
      note(empirical_gap(p, l, lp, b, rule), m.gap(b.x, b.y, rl, rp, cfg.beta));
      note(potential(p, b), m.potential(b.x, b.y));
    };

    for (int step = 0; step < 3; ++step) {
      Batch b;
      b.x = gaussian(dx, n, 1.0, rng);
      b.y = random_ball(d, n, r2, rng);
      b.id = fmt::format("b{}", step);
      const LossFunction l = random_span_loss(kernel, actions, cfg.r1, b.y, rng, "l");
      const LossFunction lp = random_span_loss(kernel, actions, cfg.r1, b.y, rng, "lp");
      compare_all(b, l, lp);
      if (step == 1) {
        alg2_step(p, lp, b, cfg);
        m.alg2(b.x, b.y, oracle::loss_vectors(lp), cfg.beta);
      } else {
        AuditReport rep;
        rep.found = true;
        rep.witness_lossprime = lp;
        alg1_step(p, rep, b, cfg);
        m.alg1(b.x, b.y, oracle::loss_vectors(lp), cfg.beta, *cfg.eta, cfg.r1);
      }
      compare_all(b, l, lp);
    }
  }
  return {worst <= 1e-9, fmt::format("max abs deviation {:.3g}", worst)};
}

// 2 ----------------------------------------------------------------------------
Outcome witness_optimality() {
  double worst = std::numeric_limits<double>::infinity();
  for (int inst = 0; inst < 50; ++inst) {
    Rng rng(derive_seed(202, inst));
    Kernel kernel = Kernel::min(1.0);
    if (inst % 3 == 1) kernel = Kernel::linear(3, 1.0);
    if (inst % 3 == 2) kernel = Kernel::exp(2, 2.0);
    const double shift = std::uniform_real_distribution<double>(0.05, 0.4)(rng);
    const FiniteWorld w =
        make_world(kernel, WorldSpec{WorldKind::Planted, 4, 8, shift, 0.3, rng()});
    const Predictor p = planted_predictor(w);
    const Batch b = w.sample(200, rng);
    const std::size_t actions = 1 + inst % 4;
    const double r1 = std::array<double, 3>{0.5, 1.0, 2.0}[inst % 3];
    const DecisionRule rule{std::uniform_real_distribution<double>(0.5, 20.0)(rng),
                            DecisionMode::Smooth};
    const BatchAnalysis ba(p, b);
    const LossFunction lp = random_span_loss(kernel, actions, 1.0, b.y, rng, "lp");
    const Witness star = closed_form_witness(ba, lp, r1, rule);
    const double g_star = empirical_gap(ba, star.loss, lp, rule);
    for (int t = 0; t < 100; ++t) {
      const LossFunction l = random_span_loss(kernel, actions, r1, b.y, rng, "rand");
      worst = std::min(worst, g_star - empirical_gap(ba, l, lp, rule));
    }
  }
  return {worst >= -1e-9, fmt::format("min gap(l*) - gap(l_rand) = {:.3g}", worst)};
}

// 3 ----------------------------------------------------------------------------
Outcome termination_constant() {
  long worst_slack = std::numeric_limits<long>::max();
  double worst_margin = std::numeric_limits<double>::infinity();
  bool ok = true;
  long total_iters = 0, idle_runs = 0;
  const double eps_grid[] = {0.4, 0.3, 0.2, 0.15};
  for (int run = 0; run < 20; ++run) {
    Rng rng(derive_seed(303, run));
    const double eps = eps_grid[run % 4];
    // shifts well above the 3 eps / 4 audit threshold so every run patches
    const double shift = std::uniform_real_distribution<double>(0.4, 0.8)(rng);
    Kernel kernel = Kernel::min(1.0);
    if (run % 5 == 3) kernel = Kernel::linear(2, 1.0);
    if (run % 5 == 4) kernel = Kernel::exp(2, 2.0);
    const FiniteWorld w =
        make_world(kernel, WorldSpec{WorldKind::Planted, 4, 8, shift, 0.2, rng()});
    CalibConfig cfg;
    cfg.epsilon = eps;
    cfg.beta = 20.0;
    cfg.r2 = kernel.r2();
    cfg.actions = 1 + run % 3;
    cfg.audit_batch_size = 500;
    cfg.heldout_size = 1000;
    cfg.seed = rng();
    const long bound = default_max_iters(eps, cfg.r1, cfg.r2);
    cfg.max_iters = 4 * bound;  // the cap must not be what enforces the bound
    WorldSource src(w, rng());
    const CalibrationResult res = run_calibration(planted_predictor(w), src, cfg);
    const auto iters = static_cast<long>(res.trace.records.size());
    total_iters += iters;
    idle_runs += iters == 0 ? 1 : 0;
    worst_slack = std::min(worst_slack, bound - iters);
    if (iters > bound || res.trace.status != TerminalStatus::Calibrated) ok = false;
    if (iters > 0)
      worst_margin =
          std::min(worst_margin, min_decrease_margin(res.trace, default_eta(eps, cfg.r1), cfg.r1));
  }
  ok = ok && !(worst_margin < -1e-9);
  return {ok, fmt::format("{} iterations total ({} runs without a patch), min bound slack {}, "
                          "min decrease margin {:.3g}",
                          total_iters, idle_runs, worst_slack, worst_margin)};
}

// 4 ----------------------------------------------------------------------------
Outcome calibration_effectiveness() {
  bool ok = true;
  std::string detail;
  int cell = 0;
  for (std::size_t actions : {1, 2, 4}) {
    for (PatchAlgorithm alg : {PatchAlgorithm::Alg1, PatchAlgorithm::Alg2}) {
      Rng rng(derive_seed(404, cell++));
      const Kernel kernel = Kernel::min(1.0);
      const FiniteWorld w =
          make_world(kernel, WorldSpec{WorldKind::Planted, 4, 8, 0.3, 0.2, rng()});
      CalibConfig cfg;
      cfg.epsilon = 0.1;
      cfg.beta = 20.0;
      cfg.actions = actions;
      cfg.algorithm = alg;
      cfg.seed = rng();
      WorldSource src(w, rng());
      const CalibrationResult res = run_calibration(planted_predictor(w), src, cfg);
      const auto& t = res.trace;
      const bool decce_ok = t.heldout_decce_after < cfg.epsilon;
      const bool pot_ok =
          t.heldout_potential_after <= t.heldout_potential_before + t.heldout_halfwidth;
      ok = ok && decce_ok && pot_ok && t.status != TerminalStatus::Error;
      detail += fmt::format("{}|A|={}: {} it, decce {:.3f}->{:.3f}, pot {:.4f}->{:.4f}; ",
                            to_string(alg), actions, t.records.size(), t.heldout_decce_before,
                            t.heldout_decce_after, t.heldout_potential_before,
                            t.heldout_potential_after);
    }
  }
  return {ok, detail};
}

// 5 ----------------------------------------------------------------------------
Outcome softmax_lipschitz() {
  Rng rng(505);
  std::uniform_int_distribution<int> dim(1, 10);
  std::uniform_real_distribution<double> beta_d(0.0, 50.0), scale(0.0, 3.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 100000; ++t) {
    const int k = dim(rng);
    const double beta = beta_d(rng);
    VectorXd z(k), dz(k);
    const double s = scale(rng);
    for (int i = 0; i < k; ++i) {
      z(i) = g(rng) * s;
      dz(i) = g(rng) * (t % 2 == 0 ? 1e-3 : s);
    }
    // softmax(beta z) is the smooth best response to the estimates -z
    const VectorXd diff = smooth_best_response(-z, beta) - smooth_best_response(-(z + dz), beta);
    worst = std::min(worst, std::sqrt(2.0) * beta * dz.norm() - diff.lpNorm<1>());
  }
  return {worst >= -1e-9, fmt::format("min slack {:.3g} over 1e5 triples", worst)};
}

std::string failed_checks(const ExperimentResult& r) {
  std::string s;
  for (const auto& c : r.checks)
    if (!c.passed) s += fmt::format("[{}: {}] ", c.name, c.detail);
  if (r.degenerate) s += "[degenerate]";
  return s;
}

// 6 ----------------------------------------------------------------------------
Outcome regret_bounds() {
  RegretConfig cfg;
  cfg.seed = 606;
  const ExperimentResult r = regret_experiment(cfg);
  const auto& c = r.cell(fmt::format("beta={}", cfg.beta));
  return {r.passed(), fmt::format("max regret {:.4f} <= bound {:.4f} {}", c.metric("max_regret"),
                                  c.metric("bound"), failed_checks(r))};
}

// 7 ----------------------------------------------------------------------------
Outcome uniform_convergence() {
  UniformConvergenceConfig cfg;
  cfg.seed = 707;
  const ExperimentResult r = uniform_convergence_experiment(cfg);
  std::string detail;
  for (const auto& [k, v] : r.fits) detail += fmt::format("{}={:.4f} ", k, v);
  return {r.passed(), detail + failed_checks(r)};
}

// 8 ----------------------------------------------------------------------------
Outcome lower_bound() {
  DistinguishingConfig cfg;
  cfg.seed = 808;
  const ExperimentResult r = distinguishing_experiment(cfg);
  return {r.passed(), fmt::format("{} checks, C = {:.4f} {}", r.checks.size(), r.fit("C"),
                                  failed_checks(r))};
}

// 9 ----------------------------------------------------------------------------
Outcome loss_family_fidelity() {
  Rng rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0), slope(-1.0, 1.0);
  double worst = 0.0;
  const Kernel kmin = Kernel::min(1.0);
  for (int t = 0; t < 1000; ++t) {
    VectorXd k1(1), k2(1), c(1);
    k1 << slope(rng);
    k2 << slope(rng);
    c << u(rng);
    const LossFunction l = make_piecewise_linear_loss(kmin, k1, k2, c, 1.0, "pl");
    const double y = u(rng);
    const double closed = y < c(0) ? k1(0) * y : k2(0) * y + (k1(0) - k2(0)) * c(0);
    worst = std::max(worst, std::abs(l(0, VectorXd::Constant(1, y)) - closed));
  }
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index d = 1 + t % 5;
    const Kernel kexp = Kernel::exp(d, 3.0);
    VectorXd alpha(d);
    for (Eigen::Index i = 0; i < d; ++i) alpha(i) = -std::log(u(rng) + 1e-300);
    alpha /= alpha.sum();
    alpha(d - 1) = 1.0 - alpha.head(d - 1).sum();
    alpha = alpha.cwiseMax(0.0);
    const double sign = t % 2 == 0 ? 1.0 : -1.0;
    const LossFunction l = make_cobb_douglas_loss(kexp, MatrixXd(alpha), sign, 2.0, "cd");
    const VectorXd y = random_ball(d, 1, kexp.domain_radius(), rng).col(0);
    double closed = sign;
    for (Eigen::Index i = 0; i < d; ++i) closed *= std::pow(std::exp(y(i)), alpha(i));
    worst = std::max(worst, std::abs(l(0, y) - closed));
  }
  bool shattered = true;
  for (Eigen::Index d = 1; d <= 12; ++d) {
    Rng grng(d);
    shattered = shattered && shatters_vertices(d, default_r_grid(d, grng));
  }
  return {worst <= 1e-12 && shattered,
          fmt::format("max closed-form deviation {:.3g}, V shattered for d<=12: {}", worst,
                      shattered)};
}

// 10 ---------------------------------------------------------------------------
std::string strip_timestamp(const std::string& manifest) {
  Json j = Json::parse(manifest);
  j.erase("timestamp");
  return j.dump(2);
}

Outcome reproducibility(const std::string& cli, const fs::path& fixtures, const fs::path& scratch) {
  struct Run {
    std::string args;
    std::string config;
  };
  const std::vector<Run> runs = {
      {"calibrate", "planted_bias.json"},
      {"audit", "audit_exact.json"},
      {"synth", "synth_planted.json"},
      {"experiment distinguishing", "distinguishing_small.json"},
      {"experiment regret", "regret_small.json"},
  };
  std::size_t files = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    fs::path dirs[2];
    for (int rep = 0; rep < 2; ++rep) {
      dirs[rep] = scratch / fmt::format("run{}-{}", i, rep);
      fs::remove_all(dirs[rep]);
      const std::string cmd =
          fmt::format("\"{}\" {} --config \"{}\" --out \"{}\" --seed 7 --quiet", cli, runs[i].args,
                      (fixtures / runs[i].config).string(), dirs[rep].string());
      const int rc = std::system(cmd.c_str());
      if (rc == -1 || WEXITSTATUS(rc) >= 2)
        return {false, fmt::format("'{}' exited with {}", cmd, WEXITSTATUS(rc))};
    }
    std::vector<fs::path> names;
    for (const auto& e : fs::recursive_directory_iterator(dirs[0]))
      if (e.is_regular_file()) names.push_back(fs::relative(e.path(), dirs[0]));
    std::size_t other = 0;
    for (const auto& e : fs::recursive_directory_iterator(dirs[1]))
      if (e.is_regular_file()) ++other;
    if (other != names.size()) return {false, fmt::format("{}: file sets differ", runs[i].args)};
    for (const auto& name : names) {
      std::string a = read_file(dirs[0] / name), b = read_file(dirs[1] / name);
      if (name == "manifest.json") {
        a = strip_timestamp(a);
        b = strip_timestamp(b);
      }
      if (a != b) return {false, fmt::format("{}: {} differs", runs[i].args, name.string())};
      ++files;
    }
  }
  return {true, fmt::format("{} files byte-identical across {} paired runs", files, runs.size())};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: acceptance <dcal-cli> <fixtures-dir> <scratch-dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path fixtures = argv[2], scratch = argv[3];
  fs::create_directories(scratch);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence on linear kernels", oracle_equivalence},
      {"closed-form witness optimality", witness_optimality},
      {"termination constant and per-iteration decrease", termination_constant},
      {"calibration effectiveness", calibration_effectiveness},
      {"softmax Lipschitz property", softmax_lipschitz},
      {"regret bounds", regret_bounds},
      {"uniform-convergence decay", uniform_convergence},
      {"lower-bound phenomenology", lower_bound},
      {"loss-family fidelity", loss_family_fidelity},
      {"reproducibility", [&] { return reproducibility(cli, fixtures, scratch); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.ok) ++failed;
    std::cout << fmt::format("{} {:2d} {} ({:.1f}s): {}", o.ok ? "PASS" : "FAIL", i + 1,
                             criteria[i].first, secs, o.detail)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
