#pragma once

// Study driver behind the `holokit` command: configuration, study runners,
// report files and the exit-code contract (0 pass, 1 numerical failure or
// failed check, 2 usage error).

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "holokit/holokit.hpp"
#include "holokit/io.hpp"

namespace holokit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

/// Invalid configuration or command line; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class StudyKind {
  reconstruct,
  gauge_test,
  converge_connection,
  converge_frames,
  correct,
  noise,
  summary,
};

inline constexpr std::array<std::pair<StudyKind, std::string_view>, 7> kStudyNames{{
    {StudyKind::reconstruct, "reconstruct"},
    {StudyKind::gauge_test, "gauge-test"},
    {StudyKind::converge_connection, "converge-connection"},
    {StudyKind::converge_frames, "converge-frames"},
    {StudyKind::correct, "correct"},
    {StudyKind::noise, "noise"},
    {StudyKind::summary, "summary"},
}};

inline std::string_view to_string(StudyKind k) {
  for (const auto& [kind, name] : kStudyNames)
    if (kind == k) return name;
  return "unknown";
}

inline std::optional<StudyKind> parse_study_kind(std::string_view s) {
  for (const auto& [kind, name] : kStudyNames)
    if (name == s) return kind;
  return std::nullopt;
}

inline constexpr std::array<double, 3> kBenchmarkCoefficients{0.7, 0.4, 0.2};
inline constexpr double kBenchmarkTheta0 = 0.7;

struct StudyConfig {
  StudyKind kind = StudyKind::summary;
  std::uint64_t seed = 42;
  fs::path out_dir = "holokit_out";

  // models
  double theta0 = kBenchmarkTheta0;
  std::array<double, 3> connection_coefficients = kBenchmarkCoefficients;
  std::vector<std::size_t> ladder{20, 40, 80, 160, 320, 640};
  std::size_t refine_factor = 16;

  // gauge-test
  std::vector<Eigen::Index> gauge_ranks{2, 3};
  std::vector<std::size_t> gauge_steps{20, 80, 200};
  std::size_t gauge_trials = 20;

  // noise
  std::vector<double> mu_levels{0.3, 0.5, 0.7, 0.9, 0.99};
  double rho_min = 1e-6;
  double rho_max = 1e-2;
  int rho_per_decade = 5;
  std::size_t noise_trials = 64;
  double fixed_eta = 1e-6;
  std::size_t noise_steps = 80;
  NoiseEnsemble ensemble = NoiseEnsemble::complex_gaussian;

  // abelian reduction (summary)
  double abelian_theta0 = kBenchmarkTheta0;
  std::vector<std::size_t> abelian_ladder{20, 80, 320, 1280, 10000};

  // reconstruct
  std::optional<fs::path> transfer_file;
  Eigen::Index transfer_rank = 2;
  std::size_t reconstruct_steps = 80;

  Tolerances tol{};

  bool benchmark_connection() const { return connection_coefficients == kBenchmarkCoefficients; }
  bool benchmark_frames() const { return theta0 == kBenchmarkTheta0; }

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
    if (!(theta0 > 0.0 && theta0 < std::numbers::pi)) fail("theta0 must lie in (0, pi)");
    if (!(abelian_theta0 >= 0.0 && abelian_theta0 < std::numbers::pi))
      fail("abelian_theta0 must lie in [0, pi)");
    for (double c : connection_coefficients)
      if (!std::isfinite(c)) fail("connection coefficients must be finite");
    auto check_ladder = [&](const std::vector<std::size_t>& l, const char* name) {
      if (l.size() < 2) fail(std::string(name) + " needs at least two entries");
      for (std::size_t n : l)
        if (n < 3) fail(std::string(name) + " entries must be >= 3");
    };
    check_ladder(ladder, "ladder");
    check_ladder(abelian_ladder, "abelian_ladder");
    if (refine_factor < 1) fail("refine_factor must be >= 1");
    if (gauge_ranks.empty() || gauge_steps.empty()) fail("gauge ranks/steps must be non-empty");
    for (auto m : gauge_ranks)
      if (m < 1) fail("gauge ranks must be >= 1");
    for (auto n : gauge_steps)
      if (n < 3) fail("gauge steps must be >= 3");
    if (gauge_trials < 1 || noise_trials < 1) fail("trial counts must be >= 1");
    if (mu_levels.size() < 2) fail("mu_levels needs at least two entries");
    for (double mu : mu_levels)
      if (!(mu > 0.0 && mu <= 1.0)) fail("mu levels must lie in (0, 1]");
    if (!(rho_min > 0.0 && rho_max > rho_min) || rho_per_decade < 1) fail("bad rho grid");
    if (!(fixed_eta > 0.0)) fail("fixed_eta must be > 0");
    if (noise_steps < 3 || reconstruct_steps < 3) fail("step counts must be >= 3");
    if (transfer_rank < 1) fail("transfer rank must be >= 1");
    for (double t : {tol.construction, tol.singular, tol.closure, tol.unitary})
      if (!(t > 0.0)) fail("tolerances must be > 0");
  }
};

/// Reproducibility-relevant configuration; the output directory is left out
/// so reports from different directories compare equal.
inline json to_json(const StudyConfig& c) {
  return {{"study", std::string(to_string(c.kind))},
          {"seed", c.seed},
          {"theta0", c.theta0},
          {"connection_coefficients", c.connection_coefficients},
          {"ladder", c.ladder},
          {"refine_factor", c.refine_factor},
          {"gauge_ranks", c.gauge_ranks},
          {"gauge_steps", c.gauge_steps},
          {"gauge_trials", c.gauge_trials},
          {"mu_levels", c.mu_levels},
          {"rho_min", c.rho_min},
          {"rho_max", c.rho_max},
          {"rho_per_decade", c.rho_per_decade},
          {"noise_trials", c.noise_trials},
          {"fixed_eta", c.fixed_eta},
          {"noise_steps", c.noise_steps},
          {"ensemble", std::string(holokit::to_string(c.ensemble))},
          {"abelian_theta0", c.abelian_theta0},
          {"abelian_ladder", c.abelian_ladder},
          {"transfer_file", c.transfer_file ? json(c.transfer_file->string()) : json(nullptr)},
          {"transfer_rank", c.transfer_rank},
          {"reconstruct_steps", c.reconstruct_steps},
          {"tolerances",
           {{"construction", c.tol.construction},
            {"singular", c.tol.singular},
            {"closure", c.tol.closure},
            {"unitary", c.tol.unitary}}}};
}

inline NoiseEnsemble parse_ensemble(const std::string& s) {
  if (s == "complex_gaussian") return NoiseEnsemble::complex_gaussian;
  if (s == "real_gaussian") return NoiseEnsemble::real_gaussian;
  throw ConfigError("invalid config: unknown ensemble '" + s + "'");
}

/// Overlays keys from a JSON config document. Unknown keys are rejected.
inline void apply_json(StudyConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("invalid config: config file must hold a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "study") {
        auto k = parse_study_kind(v.get<std::string>());
        if (!k) throw ConfigError("invalid config: unknown study " + v.dump());
        c.kind = *k;
      } else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "out") c.out_dir = v.get<std::string>();
      else if (key == "theta0") c.theta0 = v.get<double>();
      else if (key == "connection_coefficients") c.connection_coefficients = v.get<std::array<double, 3>>();
      else if (key == "ladder") c.ladder = v.get<std::vector<std::size_t>>();
      else if (key == "refine_factor") c.refine_factor = v.get<std::size_t>();
      else if (key == "gauge_ranks") c.gauge_ranks = v.get<std::vector<Eigen::Index>>();
      else if (key == "gauge_steps") c.gauge_steps = v.get<std::vector<std::size_t>>();
      else if (key == "gauge_trials") c.gauge_trials = v.get<std::size_t>();
      else if (key == "mu_levels") c.mu_levels = v.get<std::vector<double>>();
      else if (key == "rho_min") c.rho_min = v.get<double>();
      else if (key == "rho_max") c.rho_max = v.get<double>();
      else if (key == "rho_per_decade") c.rho_per_decade = v.get<int>();
      else if (key == "noise_trials") c.noise_trials = v.get<std::size_t>();
      else if (key == "fixed_eta") c.fixed_eta = v.get<double>();
      else if (key == "noise_steps") c.noise_steps = v.get<std::size_t>();
      else if (key == "ensemble") c.ensemble = parse_ensemble(v.get<std::string>());
      else if (key == "abelian_theta0") c.abelian_theta0 = v.get<double>();
      else if (key == "abelian_ladder") c.abelian_ladder = v.get<std::vector<std::size_t>>();
      else if (key == "transfer_file") {
        if (v.is_null()) c.transfer_file.reset();
        else c.transfer_file = v.get<std::string>();
      } else if (key == "transfer_rank") c.transfer_rank = v.get<Eigen::Index>();
      else if (key == "reconstruct_steps") c.reconstruct_steps = v.get<std::size_t>();
      else if (key == "tolerances") {
        for (const auto& [tk, tv] : v.items()) {
          if (tk == "construction") c.tol.construction = tv.get<double>();
          else if (tk == "singular") c.tol.singular = tv.get<double>();
          else if (tk == "closure") c.tol.closure = tv.get<double>();
          else if (tk == "unitary") c.tol.unitary = tv.get<double>();
          else throw ConfigError("invalid config: unknown tolerance '" + tk + "'");
        }
      } else {
        throw ConfigError("invalid config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Checks

enum class CheckKind { within, below, above };

inline std::string_view to_string(CheckKind k) {
  switch (k) {
    case CheckKind::within: return "within";
    case CheckKind::below: return "below";
    case CheckKind::above: return "above";
  }
  return "within";
}

/// within: |value - expected| <= tolerance; below: value < expected;
/// above: value > expected.
struct SummaryRecord {
  std::string metric;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  CheckKind kind = CheckKind::within;
  bool pass = false;
};

inline SummaryRecord make_check(std::string metric, double value, double expected, double tolerance,
                                CheckKind kind = CheckKind::within) {
  SummaryRecord r{std::move(metric), value, expected, tolerance, kind, false};
  switch (kind) {
    case CheckKind::within: r.pass = std::abs(value - expected) <= tolerance; break;
    case CheckKind::below: r.pass = value < expected; break;
    case CheckKind::above: r.pass = value > expected; break;
  }
  return r;
}

inline SummaryRecord bound_below(std::string metric, double value, double bound) {
  return make_check(std::move(metric), value, bound, 0.0, CheckKind::below);
}

inline SummaryRecord bound_above(std::string metric, double value, double bound) {
  return make_check(std::move(metric), value, bound, 0.0, CheckKind::above);
}

/// A missing value (skipped fit) always fails.
inline SummaryRecord make_check(std::string metric, const std::optional<double>& value,
                                double expected, double tolerance,
                                CheckKind kind = CheckKind::within) {
  if (value) return make_check(std::move(metric), *value, expected, tolerance, kind);
  SummaryRecord r{std::move(metric), std::numeric_limits<double>::quiet_NaN(), expected, tolerance,
                  kind, false};
  return r;
}

inline json to_json(const SummaryRecord& r) {
  return {{"metric", r.metric},
          {"value", std::isfinite(r.value) ? json(r.value) : json(nullptr)},
          {"expected", r.expected},
          {"tolerance", r.tolerance},
          {"kind", std::string(to_string(r.kind))},
          {"status", r.pass ? "pass" : "fail"}};
}

struct StudyResult {
  std::string study;
  json results;
  std::vector<SummaryRecord> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline json report_document(const StudyConfig& cfg, const StudyResult& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  return {{"schema", io::kReportSchema},
          {"library", {{"name", kLibraryName}, {"version", kLibraryVersion}}},
          {"study", r.study},
          {"seed", cfg.seed},
          {"config", to_json(cfg)},
          {"results", r.results},
          {"checks", std::move(checks)},
          {"status", r.passed() ? "pass" : "fail"}};
}

inline fs::path study_dir(const StudyConfig& cfg, std::string_view name) {
  fs::path dir = cfg.out_dir / std::string(name);
  fs::create_directories(dir);
  return dir;
}

inline void write_report(const StudyConfig& cfg, const StudyResult& r) {
  io::write_text(study_dir(cfg, r.study) / "report.json", report_document(cfg, r).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Study runners. Each writes <out>/<study>/report.json plus CSV tables.

inline ConnectionModel configured_connection(const StudyConfig& cfg) {
  const auto [cx, cy, cz] = cfg.connection_coefficients;
  return pauli_connection([cx](double t) { return cx * std::cos(t); },
                          [cy](double t) { return cy * std::sin(2.0 * t); },
                          [cz](double) { return cz; });
}

inline double max_phase(const std::vector<double>& phases) {
  return *std::max_element(phases.begin(), phases.end());
}

inline StudyResult run_reconstruct(const StudyConfig& cfg) {
  StudyResult r{"reconstruct", json::object(), {}};
  std::optional<FramePath> path;
  if (cfg.transfer_file) {
    const auto transfers = io::load_transfer_matrices(*cfg.transfer_file);
    const auto d = transfers.front().rows();
    if (cfg.transfer_rank > d) throw ConfigError("invalid config: transfer rank exceeds dimension");
    const Frame input(ComplexMatrix::Identity(d, cfg.transfer_rank));
    path.emplace(frames_from_transfer_model(transfers, input, cfg.tol));
    r.results["source"] = cfg.transfer_file->filename().string();
  } else {
    path.emplace(tangent_frame_loop(cfg.theta0, cfg.reconstruct_steps));
    r.results["source"] = "tangent_frame_loop";
  }
  const OverlapSequence overlaps = overlaps_from_frames(*path, cfg.tol.singular);
  const HolonomyEstimate est = estimate_holonomy(*path, cfg.tol);
  r.results["estimate"] = io::to_json(est);
  r.results["steps"] = path->steps();
  r.results["closed_subspace"] = path->closed_subspace();
  r.results["overlap_min_singular_values"] = overlaps.min_singular_values();
  r.checks.push_back(bound_below("unitarity_residual", est.unitarity_residual, cfg.tol.unitary));
  r.checks.push_back(bound_above("mu_min", est.mu_min, cfg.tol.singular));
  const auto dir = study_dir(cfg, r.study);
  io::CsvTable t({"k", "sigma_min"});
  for (std::size_t k = 0; k < overlaps.size(); ++k)
    t.row({std::to_string(k), io::format_real(overlaps.min_singular_values()[k])});
  t.save(dir / "overlaps.csv");
  return r;
}

inline StudyResult run_gauge_test(const StudyConfig& cfg) {
  StudyResult r{"gauge-test", json::object(), {}};
  GaugeStudyConfig g;
  g.ranks = cfg.gauge_ranks;
  g.steps = cfg.gauge_steps;
  g.trials = cfg.gauge_trials;
  g.seed = cfg.seed;
  g.tol = cfg.tol;
  const GaugeReport rep = gauge_study(g);
  r.results = io::to_json(rep);
  r.checks.push_back(bound_below("max_covariance_residual", rep.max_covariance_residual, 1e-12));
  r.checks.push_back(bound_below("max_unitarity_residual", rep.max_unitarity_residual, 1e-12));
  r.checks.push_back(bound_below("max_invariant_shift", rep.max_invariant_shift, 1e-12));
  io::CsvTable t({"m", "N", "mu_min", "max_covariance_residual", "max_unitarity_residual",
                  "max_eigenphase_shift", "max_wilson_shift"});
  for (const auto& c : rep.cases)
    t.row({std::to_string(c.logical_rank), std::to_string(c.steps), io::format_real(c.mu_min),
           io::format_real(c.max_covariance_residual), io::format_real(c.max_unitarity_residual),
           io::format_real(c.max_eigenphase_shift), io::format_real(c.max_wilson_shift)});
  t.save(study_dir(cfg, r.study) / "gauge.csv");
  return r;
}

inline StudyResult run_converge_connection(const StudyConfig& cfg) {
  StudyResult r{"converge-connection", json::object(), {}};
  const ConvergenceReport rep = connection_convergence_study(
      configured_connection(cfg), 0.0, 2.0 * std::numbers::pi, cfg.ladder, cfg.refine_factor);
  r.results = io::to_json(rep);
  r.checks.push_back(make_check("fitted_order", rep.fitted_order, 2.0, 0.1));
  if (cfg.benchmark_connection()) {
    r.checks.push_back(make_check("reference_eigenphase", max_phase(rep.reference_eigenphases),
                                  0.70134, 1e-3));
    const std::array<double, 3> traces{1.52795, 0.33464, -1.01663};
    for (std::size_t k = 0; k < 3; ++k)
      r.checks.push_back(make_check("wilson_trace_r" + std::to_string(k + 1),
                                    rep.reference_wilson_traces[k].real(), traces[k], 1e-3));
  }
  io::convergence_table(rep).save(study_dir(cfg, r.study) / "convergence.csv");
  return r;
}

inline StudyResult run_converge_frames(const StudyConfig& cfg) {
  StudyResult r{"converge-frames", json::object(), {}};
  const double theta0 = cfg.theta0;
  const ComplexMatrix reference = exact_tangent_holonomy(theta0);
  const ConvergenceReport rep = frame_convergence_study(
      [theta0](std::size_t n) { return tangent_frame_loop(theta0, n); }, cfg.ladder, reference,
      2.0 * std::numbers::pi, cfg.tol, cfg.seed);
  r.results = io::to_json(rep);
  r.checks.push_back(make_check("fitted_order", rep.fitted_order, 2.0, 0.1));
  if (!rep.errors.empty()) {
    const std::size_t finest = rep.errors.size() - 1;
    // Compare the finest estimate's spectrum with the exact one.
    const HolonomyEstimate est =
        estimate_holonomy(tangent_frame_loop(theta0, rep.partition_sizes[finest]), cfg.tol);
    r.results["finest_eigenphases"] = est.eigenphase_list;
    const double expected = cfg.benchmark_frames() ? 1.47754 : max_phase(rep.reference_eigenphases);
    r.checks.push_back(make_check("eigenphase", max_phase(est.eigenphase_list), expected, 1e-3));
    if (rep.partition_sizes[finest] >= 640)
      r.checks.push_back(bound_below("finest_error", rep.errors[finest], 1e-4));
    std::optional<double> mu80;
    for (std::size_t i = 0; i < rep.partition_sizes.size(); ++i)
      if (rep.partition_sizes[i] >= 80)
        mu80 = std::min(mu80.value_or(1.0), rep.mu_min_per_partition[i]);
    if (mu80) r.checks.push_back(bound_above("mu_min_N_ge_80", *mu80, 0.9));
  }
  r.checks.push_back(bound_below("failed_partitions", static_cast<double>(rep.failures.size()), 0.5));
  io::convergence_table(rep).save(study_dir(cfg, r.study) / "convergence.csv");
  return r;
}

inline StudyResult run_abelian(const StudyConfig& cfg) {
  StudyResult r{"abelian", json::object(), {}};
  const AbelianReport rep = abelian_study(cfg.abelian_theta0, cfg.abelian_ladder, cfg.tol);
  r.results = io::to_json(rep);
  r.checks.push_back(bound_below("finest_phase_error", rep.errors.back(), 1e-4));
  const bool trivial = std::all_of(rep.errors.begin(), rep.errors.end(),
                                   [](double e) { return e <= kZeroErrorFloor; });
  if (!trivial) r.checks.push_back(make_check("fitted_order", rep.fitted_order, 0.9, 0.0, CheckKind::above));
  io::CsvTable t({"N", "h", "phase", "error"});
  for (std::size_t i = 0; i < rep.partition_sizes.size(); ++i)
    t.row({std::to_string(rep.partition_sizes[i]),
           io::format_real(2.0 * std::numbers::pi / static_cast<double>(rep.partition_sizes[i])),
           io::format_real(rep.phases[i]), io::format_real(rep.errors[i])});
  t.save(study_dir(cfg, r.study) / "abelian.csv");
  return r;
}

inline StudyResult run_correct(const StudyConfig& cfg) {
  StudyResult r{"correct", json::object(), {}};
  const CorrectionReport rep = correction_study(configured_connection(cfg), 0.0,
                                                2.0 * std::numbers::pi, cfg.ladder,
                                                cfg.refine_factor, cfg.seed);
  r.results = io::to_json(rep);
  r.checks.push_back(make_check("holonomy_order", rep.holonomy_order, 2.0, 0.1));
  const double ho = rep.holonomy_order.value_or(std::numeric_limits<double>::quiet_NaN());
  r.checks.push_back(make_check("left_order", rep.left_order, ho, 0.1));
  r.checks.push_back(make_check("right_order", rep.right_order, ho, 0.1));
  r.checks.push_back(bound_below("left_final_infidelity", rep.left_infidelity.back(), 1e-9));
  r.checks.push_back(bound_below("right_final_infidelity", rep.right_infidelity.back(), 1e-9));
  io::CsvTable t({"N", "h", "holonomy_error", "left_error", "right_error", "left_infidelity",
                  "right_infidelity"});
  for (std::size_t i = 0; i < rep.partition_sizes.size(); ++i)
    t.row({std::to_string(rep.partition_sizes[i]), io::format_real(rep.mesh_sizes[i]),
           io::format_real(rep.holonomy_errors[i]), io::format_real(rep.left_errors[i]),
           io::format_real(rep.right_errors[i]), io::format_real(rep.left_infidelity[i]),
           io::format_real(rep.right_infidelity[i])});
  t.save(study_dir(cfg, r.study) / "correction.csv");
  return r;
}

inline StudyResult run_noise(const StudyConfig& cfg) {
  StudyResult r{"noise", json::object(), {}};
  const FramePath path = tangent_frame_loop(cfg.theta0, cfg.noise_steps);
  const OverlapSequence clean = overlaps_from_frames(path, cfg.tol.singular);
  NoiseConfig nc;
  nc.mu_levels = cfg.mu_levels;
  nc.rho_grid = log_grid(cfg.rho_min, cfg.rho_max, cfg.rho_per_decade);
  nc.trials = cfg.noise_trials;
  nc.fixed_eta = cfg.fixed_eta;
  nc.ensemble = cfg.ensemble;
  nc.seed = cfg.seed;
  nc.tol = cfg.tol;
  const NoiseReport rep = noise_study(clean, nc);
  r.results = io::to_json(rep);
  r.checks.push_back(make_check("mean_scaled_noise_slope", rep.mean_slope, 1.0, 0.15));
  r.checks.push_back(bound_above("fixed_eta_error_increasing", rep.fixed_eta_increasing ? 1.0 : 0.0, 0.5));
  r.checks.push_back(make_check("fixed_eta_conditioning_slope", rep.fixed_eta_slope, 0.0, 0.0, CheckKind::above));
  r.checks.push_back(bound_below("telescoping_violations", static_cast<double>(rep.telescoping_violations), 0.5));
  r.checks.push_back(bound_below("max_unitarity_residual", rep.max_unitarity_residual, 1e-10));

  const auto dir = study_dir(cfg, r.study);
  io::CsvTable t({"mu", "rho", "eta", "mean_error"});
  io::CsvTable s({"mu", "slope"});
  io::CsvTable f({"mu", "inverse_mu", "eta", "mean_error"});
  for (std::size_t i = 0; i < rep.conditioning_levels.size(); ++i) {
    const double mu = rep.conditioning_levels[i];
    for (std::size_t j = 0; j < rep.noise_ratios.size(); ++j)
      t.row({io::format_real(mu), io::format_real(rep.noise_ratios[j]),
             io::format_real(rep.noise_ratios[j] * mu), io::format_real(rep.mean_errors[i][j])});
    s.row({io::format_real(mu), rep.fitted_slopes[i] ? io::format_real(*rep.fitted_slopes[i]) : "nan"});
    f.row({io::format_real(mu), io::format_real(1.0 / mu), io::format_real(rep.fixed_eta),
           io::format_real(rep.fixed_eta_errors[i])});
  }
  t.save(dir / "noise.csv");
  s.save(dir / "slopes.csv");
  f.save(dir / "fixed_eta.csv");
  return r;
}

inline StudyResult run_single(const StudyConfig& cfg, StudyKind kind);

/// Every study, each in its own directory, plus a combined record table.
inline StudyResult run_summary(const StudyConfig& cfg) {
  StudyResult summary{"summary", json::object(), {}};
  json statuses = json::object();
  auto add = [&](const StudyResult& r) {
    write_report(cfg, r);
    statuses[r.study] = r.passed() ? "pass" : "fail";
    for (const auto& c : r.checks) {
      SummaryRecord rec = c;
      rec.metric = r.study + "." + c.metric;
      summary.checks.push_back(std::move(rec));
    }
  };
  add(run_gauge_test(cfg));
  add(run_converge_connection(cfg));
  add(run_converge_frames(cfg));
  add(run_abelian(cfg));
  add(run_correct(cfg));
  add(run_noise(cfg));
  summary.results["studies"] = std::move(statuses);

  io::CsvTable t({"metric", "value", "expected", "tolerance", "kind", "status"});
  for (const auto& c : summary.checks)
    t.row({c.metric, io::format_real(c.value), io::format_real(c.expected),
           io::format_real(c.tolerance), std::string(to_string(c.kind)), c.pass ? "pass" : "fail"});
  t.save(study_dir(cfg, summary.study) / "summary.csv");
  return summary;
}

inline StudyResult run_single(const StudyConfig& cfg, StudyKind kind) {
  switch (kind) {
    case StudyKind::reconstruct: return run_reconstruct(cfg);
    case StudyKind::gauge_test: return run_gauge_test(cfg);
    case StudyKind::converge_connection: return run_converge_connection(cfg);
    case StudyKind::converge_frames: return run_converge_frames(cfg);
    case StudyKind::correct: return run_correct(cfg);
    case StudyKind::noise: return run_noise(cfg);
    case StudyKind::summary: return run_summary(cfg);
  }
  throw ConfigError("unknown study");
}

/// Validates, runs and writes the report. Returns the process exit code.
inline int run_study(const StudyConfig& cfg, std::ostream& log = std::cerr) {
  try {
    cfg.validate();
    const StudyResult r = run_single(cfg, cfg.kind);
    write_report(cfg, r);
    for (const auto& c : r.checks)
      log << (c.pass ? "PASS " : "FAIL ") << c.metric << " = " << io::format_real(c.value) << '\n';
    log << r.study << ": " << (r.passed() ? "pass" : "fail") << " (" << (cfg.out_dir / r.study).string()
        << ")\n";
    return r.passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    log << "holokit: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    log << "holokit: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << "holokit: error: " << e.what() << '\n';
    return 1;
  }
}

/// Builds a config from the command line. Precedence: flags, then
/// HOLOKIT_OUT, then the --config file, then defaults.
inline int main(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"Holonomy reconstruction from adjacent-frame overlaps", "holokit"};
  std::string study;
  std::string config_file, out_dir, ensemble, transfer;
  std::uint64_t seed = 0;
  double theta0 = 0, rho_min = 0, rho_max = 0, fixed_eta = 0;
  double tol_singular = 0, tol_construction = 0, tol_closure = 0;
  int rho_per_decade = 0;
  std::size_t refine_factor = 0, trials = 0;
  std::vector<double> coeffs, mu_levels;
  std::vector<std::size_t> ladder, steps;
  std::vector<Eigen::Index> ranks;

  std::vector<std::string> names;
  for (const auto& [kind, name] : kStudyNames) names.emplace_back(name);
  app.add_option("study", study, "Study to run")->required()->check(CLI::IsMember(names));
  auto* o_seed = app.add_option("--seed", seed, "Random seed");
  app.add_option("--config", config_file, "JSON config file");
  auto* o_out = app.add_option("--out", out_dir, "Output directory");
  auto* o_theta = app.add_option("--theta0", theta0, "Polar angle of the tangent-frame loop");
  auto* o_coeffs = app.add_option("--coeffs", coeffs, "Connection coefficients cx,cy,cz")
                       ->delimiter(',')->expected(3);
  auto* o_ladder = app.add_option("--ladder", ladder, "Partition ladder, e.g. 20,40,80")->delimiter(',');
  auto* o_refine = app.add_option("--refine-factor", refine_factor, "Reference refinement factor");
  auto* o_m = app.add_option("--m", ranks, "Logical rank(s)")->delimiter(',');
  auto* o_n = app.add_option("--n", steps, "Step count(s)")->delimiter(',');
  auto* o_trials = app.add_option("--trials", trials, "Trials per point (gauge-test, noise)");
  auto* o_mu = app.add_option("--mu-levels", mu_levels, "Conditioning levels")->delimiter(',');
  auto* o_rmin = app.add_option("--rho-min", rho_min, "Smallest noise ratio");
  auto* o_rmax = app.add_option("--rho-max", rho_max, "Largest noise ratio");
  auto* o_rpd = app.add_option("--rho-per-decade", rho_per_decade, "Noise-ratio points per decade");
  auto* o_eta = app.add_option("--fixed-eta", fixed_eta, "Absolute noise for the conditioning sweep");
  auto* o_ens = app.add_option("--ensemble", ensemble, "complex_gaussian or real_gaussian");
  auto* o_transfer = app.add_option("--transfer", transfer, "Transfer-matrix JSON file (reconstruct)");
  auto* o_ts = app.add_option("--tol-singular", tol_singular, "Overlap singularity tolerance");
  auto* o_tc = app.add_option("--tol-construction", tol_construction, "Frame orthonormality tolerance");
  auto* o_tcl = app.add_option("--tol-closure", tol_closure, "Projector loop closure tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, log, log);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, log);
    return 2;
  }

  StudyConfig cfg;
  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw ConfigError("cannot open config file " + config_file);
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(config_file + ": " + e.what());
      }
      apply_json(cfg, doc);
    }
    cfg.kind = *parse_study_kind(study);
    if (const char* env = std::getenv("HOLOKIT_OUT"); env && *env) cfg.out_dir = env;
    if (o_out->count()) cfg.out_dir = out_dir;
    if (o_seed->count()) cfg.seed = seed;
    if (o_theta->count()) cfg.theta0 = theta0;
    if (o_coeffs->count()) cfg.connection_coefficients = {coeffs[0], coeffs[1], coeffs[2]};
    if (o_ladder->count()) cfg.ladder = ladder;
    if (o_refine->count()) cfg.refine_factor = refine_factor;
    if (o_m->count()) {
      cfg.gauge_ranks = ranks;
      cfg.transfer_rank = ranks.front();
    }
    if (o_n->count()) {
      cfg.gauge_steps = steps;
      cfg.reconstruct_steps = steps.front();
      cfg.noise_steps = steps.front();
    }
    if (o_trials->count()) {
      cfg.gauge_trials = trials;
      cfg.noise_trials = trials;
    }
    if (o_mu->count()) cfg.mu_levels = mu_levels;
    if (o_rmin->count()) cfg.rho_min = rho_min;
    if (o_rmax->count()) cfg.rho_max = rho_max;
    if (o_rpd->count()) cfg.rho_per_decade = rho_per_decade;
    if (o_eta->count()) cfg.fixed_eta = fixed_eta;
    if (o_ens->count()) cfg.ensemble = parse_ensemble(ensemble);
    if (o_transfer->count()) cfg.transfer_file = transfer;
    if (o_ts->count()) cfg.tol.singular = tol_singular;
    if (o_tc->count()) cfg.tol.construction = tol_construction;
    if (o_tcl->count()) cfg.tol.closure = tol_closure;
  } catch (const ConfigError& e) {
    log << "holokit: " << e.what() << '\n';
    return 2;
  }
  return run_study(cfg, log);
}

}  // namespace holokit::cli
