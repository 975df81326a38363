#include "dcal/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include <fmt/format.h>

#include "dcal/errors.hpp"
#include "dcal/experiments.hpp"
#include "dcal/synth.hpp"

namespace dcal::cli {

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Calibrate: return "calibrate";
    case Command::Audit: return "audit";
    case Command::Synth: return "synth";
    case Command::Experiment: return "experiment";
    case Command::Report: return "report";
  }
  return "unknown";
}

namespace {

namespace fs = std::filesystem;

enum class Type { Number, Integer, String, Bool, IntList, NumberList, StringList };

// Returns an error message, empty when the value is acceptable.
using Check = std::function<std::string(const Json&)>;

struct Key {
  std::string name;
  Type type;
  Json def;  // null: optional with no default (or derived later)
  bool required = false;
  Check check;
};

std::string_view type_name(Type t) {
  switch (t) {
    case Type::Number: return "a number";
    case Type::Integer: return "an integer";
    case Type::String: return "a string";
    case Type::Bool: return "a boolean";
    case Type::IntList: return "a list of integers";
    case Type::NumberList: return "a list of numbers";
    case Type::StringList: return "a list of strings";
  }
  return "?";
}

bool type_ok(const Json& v, Type t) {
  auto all = [&](auto pred) {
    return v.is_array() && std::all_of(v.begin(), v.end(), pred);
  };
  switch (t) {
    case Type::Number: return v.is_number();
    case Type::Integer: return v.is_number_integer();
    case Type::String: return v.is_string();
    case Type::Bool: return v.is_boolean();
    case Type::IntList: return all([](const Json& e) { return e.is_number_integer(); });
    case Type::NumberList: return all([](const Json& e) { return e.is_number(); });
    case Type::StringList: return all([](const Json& e) { return e.is_string(); });
  }
  return false;
}

Check positive() {
  return [](const Json& v) { return v.get<double>() > 0.0 ? "" : std::string("must be > 0"); };
}
Check at_least(double lo) {
  return [lo](const Json& v) {
    return v.get<double>() >= lo ? std::string() : fmt::format("must be >= {}", lo);
  };
}
Check in_range(double lo, double hi) {
  return [lo, hi](const Json& v) {
    const double x = v.get<double>();
    return x >= lo && x <= hi ? std::string() : fmt::format("must lie in [{}, {}]", lo, hi);
  };
}
Check open_unit() {
  return [](const Json& v) {
    const double x = v.get<double>();
    return x > 0.0 && x < 1.0 ? std::string() : std::string("must lie in (0, 1)");
  };
}
Check one_of(std::vector<std::string> choices) {
  return [choices](const Json& v) {
    const auto s = v.get<std::string>();
    if (std::find(choices.begin(), choices.end(), s) != choices.end()) return std::string();
    return fmt::format("must be one of {}", fmt::join(choices, ", "));
  };
}
Check each(Check inner) {
  return [inner](const Json& v) {
    if (v.empty()) return std::string("must not be empty");
    for (const auto& e : v)
      if (auto m = inner(e); !m.empty()) return "entries " + m;
    return std::string();
  };
}
Check exists() {
  return [](const Json& v) {
    return fs::exists(v.get<std::string>()) ? std::string() : std::string("file does not exist");
  };
}

Key number(std::string n, Json def, Check c = {}) { return {std::move(n), Type::Number, std::move(def), false, std::move(c)}; }
Key integer(std::string n, Json def, Check c = {}) { return {std::move(n), Type::Integer, std::move(def), false, std::move(c)}; }
Key string(std::string n, Json def, Check c = {}) { return {std::move(n), Type::String, std::move(def), false, std::move(c)}; }
Key required(Key k) {
  k.required = true;
  return k;
}

std::vector<Key> kernel_keys() {
  return {required(string("kernel", nullptr, one_of({"min", "linear", "exp"}))),
          integer("dim", 1, at_least(1)), number("R2", nullptr, positive())};
}

std::vector<Key> world_keys() {
  return {string("world", "planted", one_of({"planted", "noisy", "deterministic"})),
          integer("contexts", 4, at_least(1)), integer("support", 8, at_least(2)),
          number("shift_norm", 0.3, at_least(0.0)), number("noise", 0.2, in_range(0.0, 1.0))};
}

std::vector<Key> predictor_keys() {
  return {string("predictor", "planted",
                 one_of({"planted", "truth", "marginal", "constant_mean", "nadaraya_watson",
                         "file"})),
          string("predictor_path", nullptr, exists()), number("bandwidth", 0.5, positive()),
          string("dataset", nullptr, exists()), string("losses_path", nullptr, exists())};
}

std::vector<Key> append(std::vector<Key> a, const std::vector<Key>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Key> schema(Command command, const std::string& experiment) {
  const Key seed = integer("seed", 0, at_least(0));
  switch (command) {
    case Command::Calibrate:
      return append(append(append(kernel_keys(), world_keys()), predictor_keys()),
                    {number("R1", 1.0, positive()), required(number("epsilon", nullptr, positive())),
                     required(number("beta", nullptr, positive())), number("eta", nullptr, positive()),
                     integer("max_iters", nullptr, at_least(1)), number("lambda", 1.0, in_range(1.0, 1.0)),
                     integer("pool_size", 32, at_least(0)), integer("audit_batch_size", 1000, at_least(1)),
                     integer("heldout_size", 4000, at_least(1)),
                     string("algorithm", "alg1", one_of({"alg1", "alg2"})),
                     integer("actions", 2, at_least(1)), number("delta", 0.01, open_unit()),
                     {"record_timing", Type::Bool, false, false, {}}, seed});
    case Command::Audit:
      return append(append(append(kernel_keys(), world_keys()), predictor_keys()),
                    {number("R1", 1.0, positive()), required(number("epsilon", nullptr, positive())),
                     required(number("beta", nullptr, positive())), integer("pool_size", 32, at_least(0)),
                     integer("actions", 2, at_least(1)), integer("samples", 1000, at_least(1)), seed});
    case Command::Synth:
      return append(append(kernel_keys(), world_keys()),
                    {integer("samples", 1000, at_least(1)),
                     string("predictor", "planted", one_of({"planted", "truth", "marginal"})), seed});
    case Command::Report:
      return {{"inputs", Type::StringList, nullptr, true, each(exists())}};
    case Command::Experiment: break;
  }
  if (experiment == "convergence") {
    const ConvergenceConfig d;
    return {integer("actions", d.actions, at_least(1)), number("beta", d.beta, positive()),
            integer("audit_batch_size", d.audit_batch_size, at_least(1)),
            integer("heldout_size", d.heldout_size, at_least(1)),
            integer("pool_size", d.pool_size, at_least(1)), integer("contexts", d.contexts, at_least(1)),
            integer("support", d.support, at_least(2)), number("noise", d.noise, in_range(0.0, 1.0)),
            seed};
  }
  if (experiment == "uniform_convergence") {
    const UniformConvergenceConfig d;
    return {{"n_grid", Type::IntList, Json(d.n_grid), false, each(at_least(2))},
            integer("reference_n", d.reference_n, at_least(1)),
            integer("resamples", d.resamples, at_least(1)), integer("pairs", d.pairs, at_least(1)),
            integer("actions", d.actions, at_least(1)), number("beta", d.beta, positive()),
            number("slope_min", d.slope_min), number("slope_max", d.slope_max),
            number("ci_level", d.ci_level, open_unit()),
            {"dims", Type::IntList, Json(d.dims), false, each(at_least(4))}, seed};
  }
  if (experiment == "regret") {
    const RegretConfig d;
    return append(world_keys(),
                  {number("epsilon", d.epsilon, positive()), number("beta", d.beta, positive()),
                   {"beta_sweep", Type::NumberList, Json(d.beta_sweep), false, each(positive())},
                   integer("actions", d.actions, at_least(1)), integer("losses", d.losses, at_least(1)),
                   number("R1", d.r1, positive()),
                   integer("audit_batch_size", d.audit_batch_size, at_least(1)),
                   integer("heldout_size", d.heldout_size, at_least(1)),
                   integer("samples", d.eval_size, at_least(1)),
                   integer("pool_size", d.pool_size, at_least(0)), number("delta", d.delta, open_unit()),
                   seed});
  }
  if (experiment == "distinguishing") {
    const DistinguishingConfig d;
    return {{"d_grid", Type::IntList, Json(d.d_grid), false, each(at_least(2))},
            {"n_grid", Type::IntList, Json(d.n_grid), false, each(at_least(1))},
            number("epsilon", d.epsilon,
                   [](const Json& v) {
                     const double x = v.get<double>();
                     return x > 0.0 && x < 1.0 / 3.0 ? std::string() : std::string("must lie in (0, 1/3)");
                   }),
            integer("trials", d.trials, at_least(100)), number("ci_level", d.ci_level, open_unit()),
            integer("marginal_instances", d.marginal_instances, at_least(1)),
            integer("marginal_d", d.marginal_d, at_least(2)), seed};
  }
  throw ConfigError(fmt::format("unknown experiment '{}'", experiment), "experiment");
}

}  // namespace

Json resolve_config(const Json& doc, Command command, const std::string& experiment) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", "<document>");
  const std::vector<Key> keys = schema(command, experiment);
  for (const auto& [name, value] : doc.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const Key& k) { return k.name == name; }))
      throw ConfigError(fmt::format("unknown key '{}'", name), name);
  }
  Json out = Json::object();
  for (const auto& k : keys) {
    if (!doc.contains(k.name)) {
      if (k.required) throw ConfigError(fmt::format("missing required key '{}'", k.name), k.name);
      out[k.name] = k.def;
      continue;
    }
    const Json& v = doc.at(k.name);
    if (!type_ok(v, k.type))
      throw ConfigError(fmt::format("key '{}' must be {}", k.name, type_name(k.type)), k.name);
    if (k.check)
      if (auto msg = k.check(v); !msg.empty())
        throw ConfigError(fmt::format("key '{}' {}", k.name, msg), k.name);
    out[k.name] = v;
  }

  // Cross-key rules and derived defaults.
  if (out.contains("kernel")) {
    const auto kind = out["kernel"].get<std::string>();
    if (out["R2"].is_null()) out["R2"] = kind == "exp" ? 2.0 : 1.0;
    const double r2 = out["R2"].get<double>();
    if (kind == "min" && r2 < 1.0) throw ConfigError("min kernel needs R2 >= 1", "R2");
    if (kind == "exp" && r2 <= 1.0) throw ConfigError("exp kernel needs R2 > 1", "R2");
    if (kind == "min" && out["dim"].get<long>() != 1) throw ConfigError("min kernel has dim 1", "dim");
  }
  if (out.contains("predictor_path") && out["predictor"] == "file" && out["predictor_path"].is_null())
    throw ConfigError("predictor 'file' needs predictor_path", "predictor_path");
  if (out.contains("dataset") && !out["dataset"].is_null()) {
    const auto p = out["predictor"].get<std::string>();
    if (p == "planted" || p == "truth" || p == "marginal")
      throw ConfigError(fmt::format("predictor '{}' needs a synthetic world, not a dataset", p),
                        "predictor");
  }
  if (command == Command::Calibrate) {
    const double eps = out["epsilon"].get<double>(), r1 = out["R1"].get<double>();
    if (out["eta"].is_null()) out["eta"] = default_eta(eps, r1);
    if (out["max_iters"].is_null())
      out["max_iters"] = default_max_iters(eps, r1, out["R2"].get<double>());
  }
  if ((command == Command::Calibrate || command == Command::Audit) &&
      out["pool_size"].get<long>() == 0 && out["losses_path"].is_null())
    throw ConfigError("audit pool would be empty", "pool_size");
  if (out.contains("slope_min") && out["slope_min"].get<double>() >= out["slope_max"].get<double>())
    throw ConfigError("slope_min must be below slope_max", "slope_min");
  if (out.contains("reference_n")) {
    if (out["n_grid"].size() < 3) throw ConfigError("need at least 3 grid points", "n_grid");
    long max_n = 0;
    for (const auto& n : out["n_grid"]) max_n = std::max(max_n, n.get<long>());
    if (out["reference_n"].get<long>() < 10 * max_n)
      throw ConfigError("reference_n must be at least 10x the largest grid n", "reference_n");
  }
  return out;
}

namespace {

struct Outputs {
  fs::path dir;
  std::vector<std::string> files;
  void write(const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    files.push_back(name);
  }
};

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Kernel make_kernel(const Json& c) {
  return Kernel::make(kernel_kind_from_string(c["kernel"].get<std::string>()),
                      c["dim"].get<Eigen::Index>(), c["R2"].get<double>());
}

WorldSpec world_spec(const Json& c, std::uint64_t seed) {
  WorldSpec s;
  s.kind = world_kind_from_string(c["world"].get<std::string>());
  s.contexts = c["contexts"].get<Eigen::Index>();
  s.support = c["support"].get<Eigen::Index>();
  s.shift_norm = c["shift_norm"].get<double>();
  s.noise = c["noise"].get<double>();
  s.seed = derive_seed(seed, 0);
  return s;
}

FiniteWorld build_world(const Kernel& kernel, const Json& c, std::uint64_t seed) {
  try {
    return make_world(kernel, world_spec(c, seed));
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what(), "shift_norm");
  }
}

Json parse_json_file(const std::string& path, const std::string& key) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(fmt::format("{} is not valid JSON: {}", path, e.what()), key);
  }
}

// Either a synthetic world or a dataset feeds each command.
struct Data {
  std::optional<FiniteWorld> world;
  std::optional<Batch> dataset;
};

Data load_data(const Kernel& kernel, const Json& c, std::uint64_t seed) {
  Data d;
  if (c["dataset"].is_null()) {
    d.world = build_world(kernel, c, seed);
    return d;
  }
  const auto path = c["dataset"].get<std::string>();
  Batch b;
  try {
    b = parse_dataset_csv(read_file(path));
  } catch (const InvalidInput& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()), "dataset");
  }
  if (b.y.rows() != kernel.dim())
    throw ConfigError("dataset outcome dimension differs from the kernel's", "dataset");
  for (Eigen::Index i = 0; i < b.size(); ++i)
    if (!kernel.contains(b.y.col(i)))
      throw ConfigError(fmt::format("dataset outcome {} lies outside the kernel domain", i), "dataset");
  b.id = "dataset";
  d.dataset = std::move(b);
  return d;
}

Predictor build_predictor(const Kernel& kernel, const Json& c, const Data& data,
                          Eigen::Index fit_size, std::uint64_t seed) {
  const auto kind = c["predictor"].get<std::string>();
  if (kind == "planted") return planted_predictor(*data.world);
  if (kind == "truth") return truth_predictor(*data.world);
  if (kind == "marginal") return marginal_predictor(*data.world);
  if (kind == "file") {
    Predictor p = [&] {
      try {
        return predictor_from_json(parse_json_file(c["predictor_path"].get<std::string>(), "predictor_path"));
      } catch (const Json::exception& e) {
        throw ConfigError(e.what(), "predictor_path");
      }
    }();
    if (!(p.kernel() == kernel)) throw ConfigError("predictor kernel differs from config", "predictor_path");
    return p;
  }
  Batch fit;
  if (data.dataset) {
    fit = *data.dataset;
  } else {
    Rng rng(derive_seed(seed, 5));
    fit = data.world->sample(fit_size, rng);
  }
  if (kind == "constant_mean") return mean_predictor(kernel, fit);
  return nadaraya_watson_predictor(kernel, fit, c["bandwidth"].get<double>());
}

std::vector<LossFunction> load_losses(const Kernel& kernel, const Json& c) {
  std::vector<LossFunction> out;
  if (c["losses_path"].is_null()) return out;
  const Json j = parse_json_file(c["losses_path"].get<std::string>(), "losses_path");
  const Json& arr = j.is_object() && j.contains("losses") ? j.at("losses") : j;
  if (!arr.is_array()) throw ConfigError("losses file must hold a list of losses", "losses_path");
  try {
    for (const auto& l : arr) out.push_back(loss_from_json(l));
  } catch (const Json::exception& e) {
    throw ConfigError(e.what(), "losses_path");
  }
  const auto actions = c["actions"].get<std::size_t>();
  for (const auto& l : out) {
    if (!(l.kernel() == kernel)) throw ConfigError("loss kernel differs from config", "losses_path");
    if (l.num_actions() != actions)
      throw ConfigError("loss action count differs from 'actions'", "losses_path");
  }
  return out;
}

void check_contexts(const Predictor& p, Eigen::Index dx) {
  if (p.context_dim() != dx)
    throw ConfigError(fmt::format("predictor expects {}-dimensional contexts, data has {}",
                                  p.context_dim(), dx),
                      "predictor");
}

struct Run {
  bool gate = true;
  int code = Ok;
  std::string summary;
  Json timings = nullptr;
};

Run run_calibrate(const Json& c, std::uint64_t seed, int threads, Outputs& out) {
  const Kernel kernel = make_kernel(c);
  const Data data = load_data(kernel, c, seed);
  Predictor p0 = build_predictor(kernel, c, data, c["audit_batch_size"].get<Eigen::Index>(), seed);
  check_contexts(p0, data.dataset ? data.dataset->x.rows() : data.world->spec.contexts);

  CalibConfig cfg;
  cfg.epsilon = c["epsilon"];
  cfg.beta = c["beta"];
  cfg.r1 = c["R1"];
  cfg.r2 = c["R2"];
  cfg.eta = c["eta"].get<double>();
  cfg.max_iters = c["max_iters"].get<long>();
  cfg.actions = c["actions"];
  cfg.audit_batch_size = c["audit_batch_size"];
  cfg.heldout_size = c["heldout_size"];
  cfg.pool_size = c["pool_size"];
  cfg.seed = seed;
  cfg.algorithm = patch_algorithm_from_string(c["algorithm"].get<std::string>());
  cfg.user_losses = load_losses(kernel, c);
  cfg.delta = c["delta"];
  cfg.threads = threads;

  std::unique_ptr<SampleSource> source;
  if (data.dataset)
    source = std::make_unique<DatasetSource>(*data.dataset);
  else
    source = std::make_unique<WorldSource>(*data.world, derive_seed(seed, 1));
  const auto start = std::chrono::steady_clock::now();
  const CalibrationResult res = run_calibration(p0, *source, cfg);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const bool timing = c["record_timing"].get<bool>();
  out.write("trace.csv", trace_csv(res.trace, timing));
  out.write("report.json", to_json(res.trace).dump(2) + "\n");
  out.write("predictor.json", to_json(res.predictor).dump(2) + "\n");

  Run r;
  if (timing) r.timings = Json{{"calibration_ms", ms}};
  r.gate = res.trace.status == TerminalStatus::Calibrated;
  r.code = res.trace.status == TerminalStatus::Error ? RuntimeFailure : (r.gate ? Ok : GateFailed);
  r.summary = fmt::format("calibrate: {} after {} iterations, held-out decce {} -> {}",
                          to_string(res.trace.status), res.trace.records.size(),
                          format_double(res.trace.heldout_decce_before),
                          format_double(res.trace.heldout_decce_after));
  if (!res.trace.error.empty()) r.summary += " (" + res.trace.error + ")";
  return r;
}

Run run_audit(const Json& c, std::uint64_t seed, int threads, Outputs& out) {
  const Kernel kernel = make_kernel(c);
  const Data data = load_data(kernel, c, seed);
  const auto n = c["samples"].get<Eigen::Index>();
  const Predictor p = build_predictor(kernel, c, data, n, seed);
  Batch batch;
  if (data.dataset) {
    batch = *data.dataset;
  } else {
    Rng rng(derive_seed(seed, 1));
    batch = data.world->sample(n, rng);
    batch.id = "audit";
  }
  check_contexts(p, batch.x.rows());
  Rng pool_rng(derive_seed(seed, 2));
  const auto pool = build_pool(kernel, c["actions"], c["R1"], batch, c["pool_size"], pool_rng,
                               "audit", load_losses(kernel, c));
  const AuditOptions opts{c["R1"].get<double>(),
                          DecisionRule{c["beta"].get<double>(), DecisionMode::Smooth}, threads};
  const AuditReport rep = audit(p, batch, c["epsilon"], pool, opts);
  out.write("report.json", to_json(rep).dump(2) + "\n");
  Run r;
  r.gate = !rep.found;
  r.code = r.gate ? Ok : GateFailed;
  r.summary = fmt::format("audit: found = {}, gap {} vs threshold {}", rep.found,
                          format_double(rep.empirical_gap), format_double(rep.threshold));
  return r;
}

Run run_synth(const Json& c, std::uint64_t seed, Outputs& out) {
  const Kernel kernel = make_kernel(c);
  const FiniteWorld w = build_world(kernel, c, seed);
  Rng rng(derive_seed(seed, 1));
  Batch b = w.sample(c["samples"].get<Eigen::Index>(), rng);
  const auto kind = c["predictor"].get<std::string>();
  const Predictor p = kind == "planted" ? planted_predictor(w)
                      : kind == "truth" ? truth_predictor(w)
                                        : marginal_predictor(w);
  out.write("dataset.csv", dataset_csv(b));
  out.write("predictor.json", to_json(p).dump(2) + "\n");
  Json world{{"kernel", to_json(kernel)},
             {"kind", std::string(to_string(w.spec.kind))},
             {"support", columns_to_json(w.support)},
             {"truth", columns_to_json(w.truth)},
             {"planted", columns_to_json(w.planted)},
             {"shift_norm", norm(w.shift)}};
  out.write("world.json", world.dump(2) + "\n");
  return Run{true, Ok, fmt::format("synth: {} samples", b.size()), nullptr};
}

template <typename T>
std::vector<T> list(const Json& j) {
  return j.get<std::vector<T>>();
}

Run run_experiment(const std::string& name, const Json& c, std::uint64_t seed, int threads,
                   Outputs& out) {
  ExperimentResult res;
  if (name == "convergence") {
    ConvergenceConfig cfg;
    cfg.cells = default_convergence_cells();
    cfg.seed = seed;
    cfg.actions = c["actions"];
    cfg.beta = c["beta"];
    cfg.audit_batch_size = c["audit_batch_size"];
    cfg.heldout_size = c["heldout_size"];
    cfg.pool_size = c["pool_size"];
    cfg.contexts = c["contexts"];
    cfg.support = c["support"];
    cfg.noise = c["noise"];
    cfg.threads = threads;
    res = convergence_experiment(cfg);
  } else if (name == "uniform_convergence") {
    UniformConvergenceConfig cfg;
    cfg.n_grid = list<Eigen::Index>(c["n_grid"]);
    cfg.reference_n = c["reference_n"];
    cfg.resamples = c["resamples"];
    cfg.pairs = c["pairs"];
    cfg.actions = c["actions"];
    cfg.beta = c["beta"];
    cfg.slope_min = c["slope_min"];
    cfg.slope_max = c["slope_max"];
    cfg.ci_level = c["ci_level"];
    cfg.dims = list<Eigen::Index>(c["dims"]);
    cfg.seed = seed;
    cfg.threads = threads;
    res = uniform_convergence_experiment(cfg);
  } else if (name == "regret") {
    RegretConfig cfg;
    cfg.epsilon = c["epsilon"];
    cfg.beta = c["beta"];
    cfg.beta_sweep = list<double>(c["beta_sweep"]);
    cfg.actions = c["actions"];
    cfg.losses = c["losses"];
    cfg.r1 = c["R1"];
    cfg.audit_batch_size = c["audit_batch_size"];
    cfg.heldout_size = c["heldout_size"];
    cfg.eval_size = c["samples"];
    cfg.pool_size = c["pool_size"];
    cfg.delta = c["delta"];
    cfg.world = world_spec(c, 0);
    cfg.seed = seed;
    cfg.threads = threads;
    try {
      res = regret_experiment(cfg);
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what(), "shift_norm");
    }
  } else {
    DistinguishingConfig cfg;
    cfg.d_grid = list<Eigen::Index>(c["d_grid"]);
    cfg.n_grid = list<Eigen::Index>(c["n_grid"]);
    cfg.epsilon = c["epsilon"];
    cfg.trials = c["trials"];
    cfg.ci_level = c["ci_level"];
    cfg.marginal_instances = c["marginal_instances"];
    cfg.marginal_d = c["marginal_d"];
    cfg.seed = seed;
    res = distinguishing_experiment(cfg);
  }
  out.write("results.csv", results_csv(res));
  out.write("summary.json", summary_json(res).dump(2) + "\n");
  Run r;
  r.gate = res.passed();
  r.code = r.gate ? Ok : GateFailed;
  std::size_t passed = 0;
  for (const auto& ch : res.checks) passed += ch.passed ? 1 : 0;
  r.summary = fmt::format("experiment {}: {}/{} checks passed{}", name, passed, res.checks.size(),
                          res.degenerate ? " (degenerate)" : "");
  return r;
}

Run run_report(const Json& c, Outputs& out) {
  Json runs = Json::array();
  std::string csv = "experiment,cell,params,metric,value\n";
  bool all = true;
  for (const auto& in : c["inputs"]) {
    const fs::path dir = in.get<std::string>();
    const fs::path mpath = dir / "manifest.json";
    if (!fs::exists(mpath)) throw ConfigError(fmt::format("{} has no manifest.json", dir.string()), "inputs");
    const Json m = parse_json_file(mpath.string(), "inputs");
    const bool passed = m.value("gate_passed", false);
    all = all && passed;
    Json entry{{"input", dir.string()},
               {"command", m.value("command", "")},
               {"experiment", m.value("experiment", Json(nullptr))},
               {"seed", m.value("seed", Json(nullptr))},
               {"gate_passed", passed}};
    if (fs::exists(dir / "summary.json")) {
      const Json s = parse_json_file((dir / "summary.json").string(), "inputs");
      Json failed = Json::array();
      for (const auto& ch : s.at("checks"))
        if (!ch.at("passed").get<bool>()) failed.push_back(ch.at("name"));
      entry["checks"] = s.at("checks").size();
      entry["failed_checks"] = std::move(failed);
      entry["fits"] = s.at("fits");
    }
    if (fs::exists(dir / "results.csv")) {
      const std::string body = read_file(dir / "results.csv");
      const auto nl = body.find('\n');
      if (nl != std::string::npos) csv += body.substr(nl + 1);
    }
    runs.push_back(std::move(entry));
  }
  out.write("report.json", Json{{"all_passed", all}, {"runs", std::move(runs)}}.dump(2) + "\n");
  out.write("results.csv", csv);
  return Run{all, all ? Ok : GateFailed,
             fmt::format("report: {} inputs, all passed = {}", c["inputs"].size(), all), nullptr};
}

}  // namespace

int dispatch(const RunConfig& rc) {
  auto say = [&](const std::string& s) {
    if (!rc.quiet) std::cerr << s << "\n";
  };
  Json config;
  std::uint64_t seed = 0;
  try {
    if (rc.command == Command::Experiment) schema(rc.command, rc.experiment);  // name check
    Json doc = Json::object();
    if (!rc.config_path.empty()) {
      if (!fs::exists(rc.config_path))
        throw ConfigError(fmt::format("config file {} does not exist", rc.config_path.string()),
                          "--config");
      doc = parse_json_file(rc.config_path.string(), "<document>");
    }
    config = resolve_config(doc, rc.command, rc.experiment);
    if (rc.seed && config.contains("seed")) config["seed"] = *rc.seed;
    if (config.contains("seed")) seed = config["seed"].get<std::uint64_t>();
    if (rc.threads < 1) throw ConfigError("threads must be >= 1", "--threads");
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return ConfigFailure;
  }

  Outputs out{rc.out_dir, {}};
  Json manifest{{"command", std::string(to_string(rc.command))}};
  if (rc.command == Command::Experiment) manifest["experiment"] = rc.experiment;
  manifest["timestamp"] = timestamp();
  manifest["seed"] = seed;
  manifest["threads"] = rc.threads;
  manifest["config"] = config;

  int code = Ok;
  try {
    fs::create_directories(rc.out_dir);
    Run r;
    switch (rc.command) {
      case Command::Calibrate: r = run_calibrate(config, seed, rc.threads, out); break;
      case Command::Audit: r = run_audit(config, seed, rc.threads, out); break;
      case Command::Synth: r = run_synth(config, seed, out); break;
      case Command::Experiment: r = run_experiment(rc.experiment, config, seed, rc.threads, out); break;
      case Command::Report: r = run_report(config, out); break;
    }
    say(r.summary);
    manifest["gate_passed"] = r.gate;
    manifest["exit_code"] = r.code;
    if (!r.timings.is_null()) manifest["timings"] = r.timings;
    code = r.code;
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return ConfigFailure;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    manifest["gate_passed"] = false;
    manifest["exit_code"] = static_cast<int>(RuntimeFailure);
    manifest["error"] = e.what();
    code = RuntimeFailure;
  }
  manifest["outputs"] = out.files;
  try {
    write_file(rc.out_dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return RuntimeFailure;
  }
  return code;
}

}  // namespace dcal::cli
