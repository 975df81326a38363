#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "dcal/audit.hpp"
#include "dcal/calibrate.hpp"
#include "dcal/kernel.hpp"
#include "dcal/loss.hpp"
#include "dcal/predictor.hpp"
#include "dcal/samples.hpp"

namespace dcal {

using Json = nlohmann::ordered_json;

Json columns_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd columns_from_json(const Json& j, Eigen::Index rows);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

Json to_json(const Kernel& k);
Kernel kernel_from_json(const Json& j);

Json to_json(const RkhsElement& v);  // kernel omitted
RkhsElement element_from_json(const Kernel& k, const Json& j);

Json to_json(const LossFunction& l);
LossFunction loss_from_json(const Json& j);

Json to_json(const Predictor& p);
Predictor predictor_from_json(const Json& j);

Json to_json(const AuditReport& r);
Json to_json(const CalibrationTrace& t);

/// iter,gap,pot_before,pot_after,witness_id,ms. Timings are written as 0
/// unless `with_timing`.
std::string trace_csv(const CalibrationTrace& t, bool with_timing);

/// Header x0..x{dx-1},y0..y{dy-1}; values at 17 significant digits.
std::string dataset_csv(const Batch& b);
Batch parse_dataset_csv(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Full-precision shortest round-trip formatting.
std::string format_double(double v);

}  // namespace dcal
