#include "dcal/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace dcal {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

Json columns_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Json col = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) col.push_back(m(i, j));
    out.push_back(std::move(col));
  }
  return out;
}

Eigen::MatrixXd columns_from_json(const Json& j, Eigen::Index rows) {
  if (!j.is_array()) throw ConfigError("expected an array of columns");
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Json& col = j[c];
    if (!col.is_array() || static_cast<Eigen::Index>(col.size()) != rows)
      throw ConfigError("column has the wrong length");
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, static_cast<Eigen::Index>(c)) = col[static_cast<std::size_t>(i)].get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json to_json(const Kernel& k) {
  return Json{{"kind", std::string(to_string(k.kind()))}, {"dim", k.dim()}, {"R2", k.r2()}};
}

Kernel kernel_from_json(const Json& j) {
  return Kernel::make(kernel_kind_from_string(j.at("kind").get<std::string>()),
                      j.at("dim").get<Eigen::Index>(), j.at("R2").get<double>());
}

Json to_json(const RkhsElement& v) {
  return Json{{"anchors", columns_to_json(v.anchors())},
              {"coefficients", vector_to_json(v.coefficients())}};
}

RkhsElement element_from_json(const Kernel& k, const Json& j) {
  return RkhsElement(k, columns_from_json(j.at("anchors"), k.dim()),
                     vector_from_json(j.at("coefficients")));
}

Json to_json(const LossFunction& l) {
  Json actions = Json::array();
  for (const auto& r : l.coefficients()) actions.push_back(to_json(r));
  return Json{{"id", l.id()},
              {"R1", l.bound()},
              {"rescaled", l.rescaled()},
              {"kernel", to_json(l.kernel())},
              {"actions", std::move(actions)}};
}

LossFunction loss_from_json(const Json& j) {
  const Kernel k = kernel_from_json(j.at("kernel"));
  std::vector<RkhsElement> per_action;
  for (const auto& a : j.at("actions")) per_action.push_back(element_from_json(k, a));
  return LossFunction(j.at("id").get<std::string>(), std::move(per_action),
                      j.at("R1").get<double>());
}

namespace {

Json rows_to_json(const Eigen::MatrixXd& m) { return columns_to_json(m.transpose()); }

Eigen::MatrixXd rows_from_json(const Json& j, Eigen::Index cols) {
  return columns_from_json(j, cols).transpose();
}

}  // namespace

Json to_json(const Predictor& p) {
  Json base;
  if (const auto* affine = std::get_if<AffineBase>(&p.base())) {
    base = Json{{"type", "affine"},
                {"context_dim", affine->weights.cols()},
                {"weights", rows_to_json(affine->weights)},
                {"offset", vector_to_json(affine->offset)}};
  } else {
    const auto& nw = std::get<NadarayaWatsonBase>(p.base());
    base = Json{{"type", "nadaraya_watson"},
                {"context_dim", nw.contexts.rows()},
                {"contexts", columns_to_json(nw.contexts)},
                {"anchor_of", nw.anchor_of},
                {"bandwidth", nw.bandwidth}};
  }
  Json patches = Json::array();
  for (const auto& r : p.patches()) {
    patches.push_back(Json{{"algorithm", std::string(to_string(r.algorithm))},
                           {"witness_loss_id", r.witness_loss_id},
                           {"witness_lossprime", to_json(r.witness_lossprime)},
                           {"beta", r.beta},
                           {"eta", r.eta},
                           {"anchors_before", r.anchors_before},
                           {"anchors_after", r.anchors_after},
                           {"directions", columns_to_json(r.directions)},
                           {"mixing", rows_to_json(r.mixing)},
                           {"batch_id", r.batch_id}});
  }
  return Json{{"kernel", to_json(p.kernel())},
              {"anchors", columns_to_json(p.anchors())},
              {"base_anchor_count", p.base_anchor_count()},
              {"base", std::move(base)},
              {"patches", std::move(patches)}};
}

Predictor predictor_from_json(const Json& j) {
  const Kernel k = kernel_from_json(j.at("kernel"));
  const Eigen::MatrixXd anchors = columns_from_json(j.at("anchors"), k.dim());
  const auto n0 = j.at("base_anchor_count").get<Eigen::Index>();
  if (n0 < 0 || n0 > anchors.cols()) throw ConfigError("base_anchor_count out of range");
  const Json& b = j.at("base");
  const auto dx = b.at("context_dim").get<Eigen::Index>();
  BaseRule base;
  const auto type = b.at("type").get<std::string>();
  if (type == "affine") {
    base = AffineBase{rows_from_json(b.at("weights"), dx), vector_from_json(b.at("offset"))};
    if (std::get<AffineBase>(base).weights.rows() != n0)
      throw ConfigError("affine weights do not match base anchors");
  } else if (type == "nadaraya_watson") {
    NadarayaWatsonBase nw;
    nw.contexts = columns_from_json(b.at("contexts"), dx);
    nw.anchor_of = b.at("anchor_of").get<std::vector<Eigen::Index>>();
    nw.bandwidth = b.at("bandwidth").get<double>();
    base = std::move(nw);
  } else {
    throw ConfigError("unknown base predictor type '" + type + "'");
  }
  Predictor p(k, anchors.leftCols(n0), std::move(base));
  p.extend_anchors(anchors);
  if (p.num_anchors() != anchors.cols()) throw ConfigError("predictor anchors are not distinct");
  for (const auto& r : j.at("patches")) {
    LossFunction lp = loss_from_json(r.at("witness_lossprime"));
    const auto actions = static_cast<Eigen::Index>(lp.num_actions());
    const auto after = r.at("anchors_after").get<Eigen::Index>();
    Eigen::MatrixXd dirs = columns_from_json(r.at("directions"), after);
    Eigen::MatrixXd mixing = rows_from_json(r.at("mixing"), actions);
    p.append_patch(patch_algorithm_from_string(r.at("algorithm").get<std::string>()),
                   std::move(lp), r.at("beta").get<double>(), r.at("eta").get<double>(),
                   std::move(dirs), std::move(mixing), r.at("batch_id").get<std::string>(),
                   r.at("witness_loss_id").get<std::string>(), after);
  }
  return p;
}

Json to_json(const AuditReport& r) {
  Json j{{"found", r.found},
         {"empirical_gap", r.empirical_gap},
         {"threshold", r.threshold},
         {"n_used", r.n_used},
         {"candidate_pool_size", r.candidate_pool_size}};
  j["witness_loss"] = r.witness_loss ? to_json(*r.witness_loss) : Json(nullptr);
  j["witness_lossprime"] = r.witness_lossprime ? to_json(*r.witness_lossprime) : Json(nullptr);
  return j;
}

Json to_json(const CalibrationTrace& t) {
  Json records = Json::array();
  for (const auto& r : t.records)
    records.push_back(Json{{"iter", r.iter},
                           {"gap", r.gap},
                           {"pot_before", r.pot_before},
                           {"pot_after", r.pot_after},
                           {"witness_id", r.witness_id},
                           {"witness_lossprime_id", r.witness_lossprime_id},
                           {"batch_id", r.batch_id}});
  return Json{{"status", std::string(to_string(t.status))},
              {"error", t.error},
              {"iterations", t.records.size()},
              {"batches_used", t.batches_used},
              {"samples_used", t.samples_used},
              {"final_audit_gap", t.final_audit_gap},
              {"heldout_potential_before", t.heldout_potential_before},
              {"heldout_potential_after", t.heldout_potential_after},
              {"heldout_decce_before", t.heldout_decce_before},
              {"heldout_decce_after", t.heldout_decce_after},
              {"heldout_halfwidth", t.heldout_halfwidth},
              {"records", std::move(records)}};
}

std::string trace_csv(const CalibrationTrace& t, bool with_timing) {
  std::string out = "iter,gap,pot_before,pot_after,witness_id,ms\n";
  for (const auto& r : t.records)
    out += fmt::format("{},{},{},{},{},{}\n", r.iter, format_double(r.gap),
                       format_double(r.pot_before), format_double(r.pot_after), r.witness_id,
                       with_timing ? format_double(r.ms) : std::string("0"));
  return out;
}

std::string dataset_csv(const Batch& b) {
  std::string out;
  std::vector<std::string> header;
  for (Eigen::Index i = 0; i < b.x.rows(); ++i) header.push_back(fmt::format("x{}", i));
  for (Eigen::Index i = 0; i < b.y.rows(); ++i) header.push_back(fmt::format("y{}", i));
  out += fmt::format("{}\n", fmt::join(header, ","));
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) row.push_back(format_double(b.x(i, s)));
    for (Eigen::Index i = 0; i < b.y.rows(); ++i) row.push_back(format_double(b.y(i, s)));
    out += fmt::format("{}\n", fmt::join(row, ","));
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  return out;
}

}  // namespace

Batch parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("dataset is empty");
  const auto header = split(line);
  Eigen::Index dx = 0, dy = 0;
  for (const auto& h : header) {
    if (!h.empty() && h[0] == 'x') {
      if (dy > 0) throw InvalidInput("context columns must precede outcome columns");
      ++dx;
    } else if (!h.empty() && h[0] == 'y') {
      ++dy;
    } else {
      throw InvalidInput("unexpected dataset column '" + h + "'");
    }
  }
  if (dy == 0) throw InvalidInput("dataset has no outcome columns");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<Eigen::Index>(cells.size()) != dx + dy)
      throw InvalidInput("dataset row has the wrong number of columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw InvalidInput("dataset cell '" + c + "' is not a number");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  Batch b;
  b.x.resize(dx, static_cast<Eigen::Index>(rows.size()));
  b.y.resize(dy, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    for (Eigen::Index i = 0; i < dx; ++i) b.x(i, si) = rows[s][static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < dy; ++i) b.y(i, si) = rows[s][static_cast<std::size_t>(dx + i)];
  }
  return b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace dcal
