#pragma once

// JSON encoding of matrices and reports, transfer-matrix files, CSV tables.
//
// Matrix encoding: {"rows": r, "cols": c, "data": [[re, im], ...]} with data
// in row-major order. Transfer files hold {"schema": "holokit.transfer/1",
// "matrices": [<matrix>, ...]}; a bare array of matrices is also accepted.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "holokit/correction.hpp"
#include "holokit/errors.hpp"
#include "holokit/linalg.hpp"
#include "holokit/studies.hpp"
#include "holokit/transport.hpp"
#include "holokit/version.hpp"

namespace holokit::io {

using nlohmann::json;

inline constexpr const char* kTransferSchema = "holokit.transfer/1";
inline constexpr const char* kReportSchema = "holokit.report/1";

inline json to_json(const ComplexMatrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back({m(r, c).real(), m(r, c).imag()});
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline json to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const std::vector<Complex>& zs) {
  json out = json::array();
  for (Complex z : zs) out.push_back(to_json(z));
  return out;
}

/// Decodes one matrix record; `record` is used in error messages.
inline ComplexMatrix matrix_from_json(const json& j, std::optional<std::size_t> record = std::nullopt) {
  if (!j.is_object()) throw ParseError("matrix must be an object", record);
  for (const char* key : {"rows", "cols", "data"})
    if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'", record);
  for (const char* key : {"rows", "cols"})
    if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 0)
      throw ParseError("rows/cols must be non-negative integers", record);
  const auto rows = j["rows"].get<Eigen::Index>();
  const auto cols = j["cols"].get<Eigen::Index>();
  const json& data = j["data"];
  if (!data.is_array()) throw ParseError("data must be an array", record);
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ParseError("data has " + std::to_string(data.size()) + " entries, expected " +
                         std::to_string(rows * cols),
                     record);
  ComplexMatrix m(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k) {
    const json& e = data[static_cast<std::size_t>(k)];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw ParseError("entry " + std::to_string(k) + " is not a [re, im] pair", record);
    m(k / cols, k % cols) = Complex(e[0].get<double>(), e[1].get<double>());
  }
  if (!all_finite(m)) throw ParseError("non-finite entry", record);
  return m;
}

inline json transfer_document(std::span<const ComplexMatrix> matrices) {
  json arr = json::array();
  for (const auto& m : matrices) arr.push_back(to_json(m));
  return {{"schema", kTransferSchema}, {"matrices", std::move(arr)}};
}

/// Validates square matrices of one common dimension.
inline std::vector<ComplexMatrix> parse_transfer_matrices(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    if (doc.contains("schema") && doc["schema"] != kTransferSchema)
      throw ParseError("unsupported schema " + doc["schema"].dump(), std::nullopt);
    if (!doc.contains("matrices")) throw ParseError("missing key 'matrices'", std::nullopt);
    list = &doc["matrices"];
  }
  if (!list->is_array() || list->empty())
    throw ParseError("expected a non-empty array of matrices", std::nullopt);
  std::vector<ComplexMatrix> out;
  for (std::size_t k = 0; k < list->size(); ++k) {
    ComplexMatrix m = matrix_from_json((*list)[k], k);
    if (m.rows() != m.cols() || m.rows() == 0) throw ParseError("matrix is not square", k);
    if (!out.empty() && m.rows() != out.front().rows())
      throw ParseError("dimension " + std::to_string(m.rows()) + " differs from " +
                           std::to_string(out.front().rows()),
                       k);
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<ComplexMatrix> load_transfer_matrices(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), std::nullopt);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), std::nullopt);
  }
  return parse_transfer_matrices(doc);
}

inline void save_transfer_matrices(const std::filesystem::path& path,
                                   std::span<const ComplexMatrix> matrices) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << transfer_document(matrices).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Report encoders

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json to_json(const HolonomyEstimate& e) {
  return {{"holonomy", to_json(e.holonomy)},
          {"base_frame_holonomy", to_json(e.base_frame_holonomy)},
          {"endpoint_identification", to_json(e.endpoint_identification)},
          {"eigenphases", e.eigenphase_list},
          {"wilson_traces", to_json(e.wilson_traces)},
          {"mu_min", e.mu_min},
          {"unitarity_residual", e.unitarity_residual}};
}

inline json to_json(const ConvergenceReport& r) {
  json failures = json::array();
  for (const auto& f : r.failures)
    failures.push_back({{"N", f.steps}, {"step", optional_json(f.step_index)}, {"message", f.message}});
  return {{"partition_sizes", r.partition_sizes},
          {"mesh_sizes", r.mesh_sizes},
          {"errors", r.errors},
          {"mu_min_per_partition", r.mu_min_per_partition},
          {"unitarity_residuals", r.unitarity_residuals},
          {"fitted_order", optional_json(r.fitted_order)},
          {"reference_eigenphases", r.reference_eigenphases},
          {"reference_wilson_traces", to_json(r.reference_wilson_traces)},
          {"reference_unitarity_residual", r.reference_unitarity_residual},
          {"failures", std::move(failures)},
          {"warnings", r.warnings},
          {"seed", r.seed}};
}

inline json to_json(const AbelianReport& r) {
  return {{"theta0", r.theta0},
          {"reference_phase", r.reference_phase},
          {"partition_sizes", r.partition_sizes},
          {"phases", r.phases},
          {"errors", r.errors},
          {"fitted_order", optional_json(r.fitted_order)}};
}

inline json to_json(const GaugeReport& r) {
  json cases = json::array();
  for (const auto& c : r.cases)
    cases.push_back({{"m", c.logical_rank},
                     {"N", c.steps},
                     {"mu_min", c.mu_min},
                     {"max_covariance_residual", c.max_covariance_residual},
                     {"max_unitarity_residual", c.max_unitarity_residual},
                     {"max_eigenphase_shift", c.max_eigenphase_shift},
                     {"max_wilson_shift", c.max_wilson_shift}});
  return {{"cases", std::move(cases)},
          {"trials", r.trials},
          {"max_covariance_residual", r.max_covariance_residual},
          {"max_unitarity_residual", r.max_unitarity_residual},
          {"max_invariant_shift", r.max_invariant_shift},
          {"seed", r.seed}};
}

inline json to_json(const CorrectionReport& r) {
  return {{"partition_sizes", r.partition_sizes},
          {"mesh_sizes", r.mesh_sizes},
          {"holonomy_errors", r.holonomy_errors},
          {"left_errors", r.left_errors},
          {"right_errors", r.right_errors},
          {"left_infidelity", r.left_infidelity},
          {"right_infidelity", r.right_infidelity},
          {"corrected_unitarity_residuals", r.corrected_unitarity_residuals},
          {"holonomy_order", optional_json(r.holonomy_order)},
          {"left_order", optional_json(r.left_order)},
          {"right_order", optional_json(r.right_order)},
          {"reference_unitarity_before_projection", r.reference_unitarity_before_projection},
          {"reference_unitarity_after_projection", r.reference_unitarity_after_projection},
          {"seed", r.seed}};
}

inline json to_json(const NoiseReport& r) {
  json slopes = json::array();
  for (const auto& s : r.fitted_slopes) slopes.push_back(optional_json(s));
  return {{"error_metric", "mean ||U_perturbed - U_conditioned_clean||_F"},
          {"conditioning_levels", r.conditioning_levels},
          {"noise_ratios", r.noise_ratios},
          {"mean_errors", r.mean_errors},
          {"fitted_slopes", std::move(slopes)},
          {"mean_slope", optional_json(r.mean_slope)},
          {"fixed_eta", r.fixed_eta},
          {"fixed_eta_errors", r.fixed_eta_errors},
          {"fixed_eta_slope", optional_json(r.fixed_eta_slope)},
          {"fixed_eta_increasing", r.fixed_eta_increasing},
          {"baseline_mu_min", r.baseline_mu_min},
          {"baseline_unitarity_residual", r.baseline_unitarity_residual},
          {"max_unitarity_residual", r.max_unitarity_residual},
          {"telescoping_checks", r.telescoping_checks},
          {"telescoping_violations", r.telescoping_violations},
          {"max_telescoping_ratio", r.max_telescoping_ratio},
          {"flagged_trials", r.flagged_trials},
          {"trials_per_point", r.trials_per_point},
          {"ensemble", std::string(to_string(r.ensemble))},
          {"seed", r.seed}};
}

// ---------------------------------------------------------------------------
// CSV

/// 17 significant digits, scientific.
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw Error("CsvTable: row width mismatch");
    rows_.push_back(cells);
    return *this;
  }

  std::string str() const {
    std::ostringstream out;
    write_line(out, header_);
    for (const auto& r : rows_) write_line(out, r);
    return out.str();
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << str();
  }

 private:
  static void write_line(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline CsvTable convergence_table(const ConvergenceReport& r) {
  CsvTable t({"N", "h", "error", "mu_min", "unitarity_residual"});
  for (std::size_t i = 0; i < r.partition_sizes.size(); ++i)
    t.row({std::to_string(r.partition_sizes[i]), format_real(r.mesh_sizes[i]),
           format_real(r.errors[i]), format_real(r.mu_min_per_partition[i]),
           format_real(r.unitarity_residuals[i])});
  return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace holokit::io
