#pragma once

// Reproducible study harnesses: convergence ladders with log-log order fits,
// gauge-covariance sweeps, controlled conditioning and overlap noise.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "holokit/correction.hpp"
#include "holokit/gauge.hpp"
#include "holokit/linalg.hpp"
#include "holokit/models.hpp"
#include "holokit/random.hpp"
#include "holokit/transport.hpp"

namespace holokit {

/// Stream identifiers for RngStream::derive, one per study kind.
enum class StudyId : std::uint64_t {
  gauge = 1,
  noise = 2,
  correction = 3,
  frames = 4,
};

namespace detail {

/// Runs fn(i) for i in [0, n) on a few worker threads (`max_workers` = 0
/// means one per hardware thread). Callers write results into slot i, so
/// output never depends on scheduling.
template <typename Fn>
void parallel_for_index(std::size_t n, Fn&& fn, std::size_t max_workers = 0) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(n, max_workers ? max_workers : hw);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline double unit_circle_distance(double a, double b) {
  return std::abs(std::polar(1.0, a) - std::polar(1.0, b));
}

/// Largest distance on the unit circle from each phase in `a` to its nearest
/// partner in `b`.
inline double phase_set_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (double x : a) {
    double best = std::numeric_limits<double>::infinity();
    for (double y : b) best = std::min(best, unit_circle_distance(x, y));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace detail

/// Least-squares slope of log y against log x.
inline double fit_loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DomainError("fit_loglog_slope: length mismatch");
  if (xs.size() < 2) throw DomainError("fit_loglog_slope: need at least two points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw DomainError("fit_loglog_slope: inputs must be positive");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_loglog_slope: abscissae are all equal");
  return sxy / sxx;
}

/// `per_decade` log-spaced points from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0 && hi > lo) || per_decade < 1) throw DomainError("log_grid: bad range");
  const double decades = std::log10(hi / lo);
  const int n = static_cast<int>(std::lround(decades * per_decade));
  std::vector<double> out;
  for (int i = 0; i <= n; ++i)
    out.push_back(lo * std::pow(10.0, decades * static_cast<double>(i) / n));
  return out;
}

// ---------------------------------------------------------------------------
// Convergence

/// Errors at or below this are treated as round-off and left out of order fits.
inline constexpr double kZeroErrorFloor = 1e-13;

struct PartitionFailure {
  std::size_t steps = 0;
  std::optional<std::size_t> step_index;
  std::string message;
};

struct ConvergenceReport {
  std::vector<std::size_t> partition_sizes;
  std::vector<double> mesh_sizes;
  std::vector<double> errors;  // ||U^(0)(h) - U_ref||_F
  std::vector<double> mu_min_per_partition;
  std::vector<double> unitarity_residuals;
  std::optional<double> fitted_order;
  std::vector<double> reference_eigenphases;
  std::vector<Complex> reference_wilson_traces;
  double reference_unitarity_residual = 0.0;
  std::vector<PartitionFailure> failures;
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
};

struct ConvergencePoint {
  ComplexMatrix holonomy;
  double mu_min = 1.0;
};

using PointEstimator = std::function<ConvergencePoint(std::size_t)>;

/// Evaluates `estimator` at every ladder entry and fits the order of
/// ||U(h) - U_ref||_F in the mesh h = span_length / N. Partitions that hit an
/// ill-conditioned overlap are recorded and excluded.
inline ConvergenceReport convergence_study(const PointEstimator& estimator,
                                           std::span<const std::size_t> ladder,
                                           const ComplexMatrix& reference, double span_length,
                                           std::uint64_t seed = 0) {
  if (ladder.empty()) throw DomainError("convergence_study: empty ladder");
  ConvergenceReport rep;
  rep.seed = seed;
  rep.reference_unitarity_residual = unitarity_residual(reference);
  rep.reference_eigenphases = eigenphases(reference);
  rep.reference_wilson_traces = wilson_traces(reference, 3);

  struct Slot {
    std::optional<ConvergencePoint> point;
    std::optional<PartitionFailure> failure;
  };
  std::vector<Slot> slots(ladder.size());
  detail::parallel_for_index(ladder.size(), [&](std::size_t i) {
    try {
      slots[i].point = estimator(ladder[i]);
    } catch (const SingularOverlapError& e) {
      slots[i].failure = PartitionFailure{ladder[i], e.step(), e.what()};
    }
  });

  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (slots[i].failure) {
      rep.failures.push_back(*slots[i].failure);
      rep.warnings.push_back("partition N=" + std::to_string(ladder[i]) +
                             " excluded: " + slots[i].failure->message);
      continue;
    }
    const auto& p = *slots[i].point;
    rep.partition_sizes.push_back(ladder[i]);
    rep.mesh_sizes.push_back(span_length / static_cast<double>(ladder[i]));
    rep.errors.push_back((p.holonomy - reference).norm());
    rep.mu_min_per_partition.push_back(p.mu_min);
    rep.unitarity_residuals.push_back(unitarity_residual(p.holonomy));
  }

  std::vector<double> hs, es;
  for (std::size_t i = 0; i < rep.errors.size(); ++i) {
    if (rep.errors[i] > kZeroErrorFloor) {
      hs.push_back(rep.mesh_sizes[i]);
      es.push_back(rep.errors[i]);
    }
  }
  if (hs.size() >= 2) {
    rep.fitted_order = fit_loglog_slope(hs, es);
  } else {
    rep.warnings.push_back("order fit skipped: fewer than two errors above round-off");
  }
  return rep;
}

/// Frame pipeline: generator(N) -> estimate_holonomy -> base-frame holonomy.
inline ConvergenceReport frame_convergence_study(
    const std::function<FramePath(std::size_t)>& generator, std::span<const std::size_t> ladder,
    const ComplexMatrix& reference, double span_length, const Tolerances& tol = {},
    std::uint64_t seed = 0) {
  return convergence_study(
      [&](std::size_t n) {
        const HolonomyEstimate est = estimate_holonomy(generator(n), tol);
        return ConvergencePoint{est.base_frame_holonomy, est.mu_min};
      },
      ladder, reference, span_length, seed);
}

/// Midpoint ordered product of a connection against its Magnus reference on
/// the finest ladder partition refined by `refine_factor`.
inline ConvergenceReport connection_convergence_study(const ConnectionModel& model, double t_start,
                                                      double t_end,
                                                      std::span<const std::size_t> ladder,
                                                      std::size_t refine_factor = 16) {
  if (ladder.empty()) throw DomainError("connection_convergence_study: empty ladder");
  const std::size_t finest = *std::max_element(ladder.begin(), ladder.end());
  const ComplexMatrix reference =
      reference_transport(model, Partition(t_start, t_end, finest), refine_factor);
  return convergence_study(
      [&](std::size_t n) {
        return ConvergencePoint{discrete_ordered_product(model, Partition(t_start, t_end, n)), 1.0};
      },
      ladder, reference, t_end - t_start);
}

// ---------------------------------------------------------------------------
// Abelian reduction

struct AbelianReport {
  double theta0 = 0.0;
  double reference_phase = 0.0;
  std::vector<std::size_t> partition_sizes;
  std::vector<double> phases;
  std::vector<double> errors;  // unit-circle distance to the reference phase
  std::optional<double> fitted_order;
};

inline AbelianReport abelian_study(double theta0, std::span<const std::size_t> ladder,
                                   const Tolerances& tol = {}) {
  AbelianReport rep;
  rep.theta0 = theta0;
  rep.reference_phase = abelian_reference_phase(theta0);
  std::vector<double> hs, es;
  for (std::size_t n : ladder) {
    const HolonomyEstimate est = estimate_holonomy(abelian_loop(theta0, n), tol);
    const double phase = std::arg(est.base_frame_holonomy(0, 0));
    rep.partition_sizes.push_back(n);
    rep.phases.push_back(phase);
    rep.errors.push_back(detail::unit_circle_distance(phase, rep.reference_phase));
    if (rep.errors.back() > kZeroErrorFloor) {
      hs.push_back(2.0 * std::numbers::pi / static_cast<double>(n));
      es.push_back(rep.errors.back());
    }
  }
  if (hs.size() >= 2) rep.fitted_order = fit_loglog_slope(hs, es);
  return rep;
}

// ---------------------------------------------------------------------------
// Gauge covariance

struct GaugeStudyConfig {
  std::vector<Eigen::Index> ranks{2, 3};
  std::vector<std::size_t> steps{20, 80, 200};
  std::size_t trials = 20;
  Eigen::Index extra_dims = 2;  // ambient d = m + extra_dims
  std::uint64_t seed = 42;
  Tolerances tol{};
};

struct GaugeCase {
  Eigen::Index logical_rank = 0;
  std::size_t steps = 0;
  double mu_min = 0.0;
  double max_covariance_residual = 0.0;
  double max_unitarity_residual = 0.0;
  double max_eigenphase_shift = 0.0;
  double max_wilson_shift = 0.0;
};

struct GaugeReport {
  std::vector<GaugeCase> cases;
  std::size_t trials = 0;
  double max_covariance_residual = 0.0;
  double max_unitarity_residual = 0.0;
  double max_invariant_shift = 0.0;
  std::uint64_t seed = 0;
};

/// For each (m, N): one smooth random loop, `trials` random closed gauges.
inline GaugeReport gauge_study(const GaugeStudyConfig& cfg) {
  GaugeReport rep;
  rep.trials = cfg.trials;
  rep.seed = cfg.seed;
  const std::size_t n_cases = cfg.ranks.size() * cfg.steps.size();
  rep.cases.resize(n_cases);
  detail::parallel_for_index(n_cases, [&](std::size_t c) {
    const std::size_t mi = c / cfg.steps.size();
    const std::size_t ni = c % cfg.steps.size();
    const Eigen::Index m = cfg.ranks[mi];
    const std::size_t n = cfg.steps[ni];
    RngStream path_rng = RngStream::derive(cfg.seed, {static_cast<std::uint64_t>(StudyId::gauge),
                                                      0, static_cast<std::uint64_t>(m), n});
    const FramePath path = smooth_frame_loop(m + cfg.extra_dims, m, n, path_rng);
    const HolonomyEstimate est = estimate_holonomy(path, cfg.tol);
    GaugeCase gc;
    gc.logical_rank = m;
    gc.steps = n;
    gc.mu_min = est.mu_min;
    gc.max_unitarity_residual = est.unitarity_residual;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      RngStream rng = RngStream::derive(
          cfg.seed, {static_cast<std::uint64_t>(StudyId::gauge), 1, static_cast<std::uint64_t>(m), n, t});
      const GaugeSequence g = random_gauge_sequence(m, path.steps(), true, rng);
      const HolonomyEstimate gauged = estimate_holonomy(apply_gauge(path, g), cfg.tol);
      gc.max_covariance_residual =
          std::max(gc.max_covariance_residual, covariance_residual(est, gauged, g[0]));
      gc.max_unitarity_residual = std::max(gc.max_unitarity_residual, gauged.unitarity_residual);
      gc.max_eigenphase_shift =
          std::max(gc.max_eigenphase_shift,
                   detail::phase_set_distance(est.eigenphase_list, gauged.eigenphase_list));
      for (std::size_t r = 0; r < est.wilson_traces.size(); ++r)
        gc.max_wilson_shift =
            std::max(gc.max_wilson_shift, std::abs(est.wilson_traces[r] - gauged.wilson_traces[r]));
    }
    rep.cases[c] = gc;
  });
  for (const auto& gc : rep.cases) {
    rep.max_covariance_residual = std::max(rep.max_covariance_residual, gc.max_covariance_residual);
    rep.max_unitarity_residual = std::max(rep.max_unitarity_residual, gc.max_unitarity_residual);
    rep.max_invariant_shift =
        std::max({rep.max_invariant_shift, gc.max_eigenphase_shift, gc.max_wilson_shift});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Feed-forward correction

struct CorrectionReport {
  std::vector<std::size_t> partition_sizes;
  std::vector<double> mesh_sizes;
  std::vector<double> holonomy_errors;  // ||U_hat - U_ref||_F
  std::vector<double> left_errors;      // ||V_corr - V||_F
  std::vector<double> right_errors;
  std::vector<double> left_infidelity;  // 1 - F
  std::vector<double> right_infidelity;
  std::vector<double> corrected_unitarity_residuals;
  std::optional<double> holonomy_order;
  std::optional<double> left_order;
  std::optional<double> right_order;
  double reference_unitarity_before_projection = 0.0;
  double reference_unitarity_after_projection = 0.0;
  std::uint64_t seed = 0;
};

/// Synthetic V_eff = U_ref V and V U_ref for a Haar-random target V, corrected
/// with the midpoint ordered-product estimate at each ladder entry.
inline CorrectionReport correction_study(const ConnectionModel& model, double t_start, double t_end,
                                         std::span<const std::size_t> ladder,
                                         std::size_t refine_factor, std::uint64_t seed) {
  if (ladder.empty()) throw DomainError("correction_study: empty ladder");
  CorrectionReport rep;
  rep.seed = seed;
  const std::size_t finest = *std::max_element(ladder.begin(), ladder.end());
  const ComplexMatrix raw_ref =
      reference_transport(model, Partition(t_start, t_end, finest), refine_factor);
  rep.reference_unitarity_before_projection = unitarity_residual(raw_ref);
  const ComplexMatrix u_ref = polar(raw_ref).unitary;
  rep.reference_unitarity_after_projection = unitarity_residual(u_ref);

  RngStream rng = RngStream::derive(seed, {static_cast<std::uint64_t>(StudyId::correction)});
  const ComplexMatrix v = haar_unitary(model.logical_rank, rng);
  const EffectiveGate left_gate = synth_effective_gate(u_ref, v, GateConvention::left);
  const EffectiveGate right_gate = synth_effective_gate(u_ref, v, GateConvention::right);

  std::vector<double> hs, eh, el, er;
  for (std::size_t n : ladder) {
    const ComplexMatrix u_hat = discrete_ordered_product(model, Partition(t_start, t_end, n));
    const ComplexMatrix vl = correct_left(u_hat, left_gate);
    const ComplexMatrix vr = correct_right(right_gate, u_hat);
    const double h = (t_end - t_start) / static_cast<double>(n);
    rep.partition_sizes.push_back(n);
    rep.mesh_sizes.push_back(h);
    rep.holonomy_errors.push_back((u_hat - u_ref).norm());
    rep.left_errors.push_back((vl - v).norm());
    rep.right_errors.push_back((vr - v).norm());
    rep.left_infidelity.push_back(1.0 - gate_fidelity(vl, v));
    rep.right_infidelity.push_back(1.0 - gate_fidelity(vr, v));
    rep.corrected_unitarity_residuals.push_back(
        std::max(unitarity_residual(vl), unitarity_residual(vr)));
    if (rep.holonomy_errors.back() > kZeroErrorFloor && rep.left_errors.back() > kZeroErrorFloor &&
        rep.right_errors.back() > kZeroErrorFloor) {
      hs.push_back(h);
      eh.push_back(rep.holonomy_errors.back());
      el.push_back(rep.left_errors.back());
      er.push_back(rep.right_errors.back());
    }
  }
  if (hs.size() >= 2) {
    rep.holonomy_order = fit_loglog_slope(hs, eh);
    rep.left_order = fit_loglog_slope(hs, el);
    rep.right_order = fit_loglog_slope(hs, er);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Conditioning and noise

enum class NoiseEnsemble { complex_gaussian, real_gaussian };

inline std::string_view to_string(NoiseEnsemble e) {
  return e == NoiseEnsemble::complex_gaussian ? "complex_gaussian" : "real_gaussian";
}

struct PerturbedOverlaps {
  OverlapSequence overlaps;
  std::vector<std::size_t> flagged_steps;  // sigma_min fell below tol
};

/// M_k + E_k with each E_k Gaussian and rescaled to ||E_k||_2 = eta.
inline PerturbedOverlaps perturb_overlaps(const OverlapSequence& overlaps, double eta,
                                          RngStream& rng,
                                          NoiseEnsemble ensemble = NoiseEnsemble::complex_gaussian,
                                          double tol = kDefaultSingularTol) {
  if (!(eta >= 0.0)) throw DomainError("perturb_overlaps: eta must be >= 0");
  const auto m = overlaps.logical_rank();
  std::vector<ComplexMatrix> out;
  out.reserve(overlaps.size());
  for (const auto& mk : overlaps.overlaps()) {
    if (eta == 0.0) {
      out.push_back(mk);
      continue;
    }
    ComplexMatrix e(m, m);
    for (Eigen::Index c = 0; c < m; ++c)
      for (Eigen::Index r = 0; r < m; ++r)
        e(r, c) = ensemble == NoiseEnsemble::complex_gaussian ? rng.complex_normal()
                                                              : Complex(rng.normal(), 0.0);
    e *= eta / spectral_norm(e);
    out.push_back(mk + e);
  }
  OverlapSequence seq(std::move(out));
  auto flagged = seq.ill_conditioned_steps(tol);
  return PerturbedOverlaps{std::move(seq), std::move(flagged)};
}

/// M_k -> polar(M_k) diag(1, ..., 1, mu): same polar factor, sigma_min = mu.
inline OverlapSequence conditioned_overlaps(const OverlapSequence& overlaps, double mu) {
  if (!(mu > 0.0 && mu <= 1.0)) throw DomainError("conditioned_overlaps: mu must lie in (0, 1]");
  const auto m = overlaps.logical_rank();
  RealVector diag = RealVector::Ones(m);
  diag(m - 1) = mu;
  std::vector<ComplexMatrix> out;
  out.reserve(overlaps.size());
  for (const auto& mk : overlaps.overlaps())
    out.push_back(polar(mk).unitary * diag.cast<Complex>().asDiagonal());
  return OverlapSequence(std::move(out));
}

struct NoiseConfig {
  std::vector<double> mu_levels{0.3, 0.5, 0.7, 0.9, 0.99};
  std::vector<double> rho_grid = log_grid(1e-6, 1e-2, 5);
  std::size_t trials = 64;
  double fixed_eta = 1e-6;
  double perturbative_cutoff = 0.1;
  NoiseEnsemble ensemble = NoiseEnsemble::complex_gaussian;
  std::uint64_t seed = 42;
  Tolerances tol{};
};

struct NoiseReport {
  std::vector<double> conditioning_levels;
  std::vector<double> noise_ratios;
  std::vector<std::vector<double>> mean_errors;  // [mu][rho], ||U~ - U_cond||_F
  std::vector<std::optional<double>> fitted_slopes;
  std::optional<double> mean_slope;
  double fixed_eta = 0.0;
  std::vector<double> fixed_eta_errors;  // per mu
  std::optional<double> fixed_eta_slope;  // log error vs log(1/mu)
  bool fixed_eta_increasing = false;      // error grows as mu decreases
  double baseline_mu_min = 0.0;
  double baseline_unitarity_residual = 0.0;
  double max_unitarity_residual = 0.0;
  std::size_t telescoping_checks = 0;
  std::size_t telescoping_violations = 0;
  double max_telescoping_ratio = 0.0;  // ||U~ - U||_2 / sum_k ||W~_k - W_k||_2
  std::size_t flagged_trials = 0;
  std::size_t trials_per_point = 0;
  NoiseEnsemble ensemble = NoiseEnsemble::complex_gaussian;
  std::uint64_t seed = 0;
};

namespace detail {

struct TrialOutcome {
  double error = 0.0;
  double unitarity = 0.0;
  double telescoping_ratio = 0.0;
  bool violation = false;
  bool flagged = false;
};

inline TrialOutcome noise_trial(const OverlapSequence& clean,
                                const std::vector<ComplexMatrix>& clean_comparators,
                                const ComplexMatrix& clean_holonomy, double eta, RngStream& rng,
                                const NoiseConfig& cfg) {
  TrialOutcome out;
  const PerturbedOverlaps noisy = perturb_overlaps(clean, eta, rng, cfg.ensemble, cfg.tol.singular);
  if (!noisy.flagged_steps.empty()) {
    out.flagged = true;
    return out;
  }
  const auto transports = forward_transports(noisy.overlaps, cfg.tol.singular);
  const ComplexMatrix u = ordered_product(transports);
  out.error = (u - clean_holonomy).norm();
  out.unitarity = unitarity_residual(u);
  double bound = 0.0;
  for (std::size_t k = 0; k < transports.size(); ++k)
    bound += spectral_norm(transports[k].adjoint() - clean_comparators[k]);
  const double lhs = spectral_norm(u - clean_holonomy);
  out.violation = lhs > bound * (1.0 + 1e-10) + 1e-14;
  out.telescoping_ratio = bound > 0.0 ? lhs / bound : 0.0;
  return out;
}

}  // namespace detail

/// For each mu: condition the clean overlaps, then average the holonomy
/// error over `trials` perturbations with eta = rho * mu for each rho, and
/// once more at the fixed eta. Slopes are fit where the mean error stays
/// below the perturbative cutoff.
inline NoiseReport noise_study(const OverlapSequence& clean, const NoiseConfig& cfg) {
  if (cfg.trials < 1) throw DomainError("noise_study: trials must be >= 1");
  if (cfg.mu_levels.empty() || cfg.rho_grid.empty()) throw DomainError("noise_study: empty grid");
  NoiseReport rep;
  rep.conditioning_levels = cfg.mu_levels;
  rep.noise_ratios = cfg.rho_grid;
  rep.fixed_eta = cfg.fixed_eta;
  rep.trials_per_point = cfg.trials;
  rep.ensemble = cfg.ensemble;
  rep.seed = cfg.seed;
  rep.baseline_mu_min = clean.mu_min();
  rep.baseline_unitarity_residual = estimate_holonomy(clean, cfg.tol).unitarity_residual;

  const std::size_t n_mu = cfg.mu_levels.size();
  const std::size_t n_rho = cfg.rho_grid.size();
  const std::size_t n_points = n_mu * (n_rho + 1);  // last column: fixed eta
  std::vector<std::vector<detail::TrialOutcome>> outcomes(n_points);

  std::vector<OverlapSequence> conditioned;
  std::vector<std::vector<ComplexMatrix>> comparators(n_mu);
  std::vector<ComplexMatrix> holonomies;
  for (std::size_t i = 0; i < n_mu; ++i) {
    conditioned.push_back(conditioned_overlaps(clean, cfg.mu_levels[i]));
    for (const auto& t : forward_transports(conditioned.back(), cfg.tol.singular))
      comparators[i].push_back(t.adjoint());
    holonomies.push_back(estimate_holonomy(conditioned.back(), cfg.tol).holonomy);
  }

  detail::parallel_for_index(n_points, [&](std::size_t p) {
    const std::size_t i = p / (n_rho + 1);
    const std::size_t j = p % (n_rho + 1);
    const double eta = j < n_rho ? cfg.rho_grid[j] * cfg.mu_levels[i] : cfg.fixed_eta;
    outcomes[p].resize(cfg.trials);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      RngStream rng = RngStream::derive(cfg.seed, {static_cast<std::uint64_t>(StudyId::noise), i, j, t});
      outcomes[p][t] = detail::noise_trial(conditioned[i], comparators[i], holonomies[i], eta, rng, cfg);
    }
  });

  auto mean_error = [&](std::size_t p) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& o : outcomes[p]) {
      if (o.flagged) continue;
      sum += o.error;
      ++count;
    }
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
  };

  rep.mean_errors.assign(n_mu, std::vector<double>(n_rho));
  std::vector<double> slopes;
  for (std::size_t i = 0; i < n_mu; ++i) {
    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < n_rho; ++j) {
      const double e = mean_error(i * (n_rho + 1) + j);
      rep.mean_errors[i][j] = e;
      if (e > 0.0 && e < cfg.perturbative_cutoff) {
        xs.push_back(cfg.rho_grid[j]);
        ys.push_back(e);
      }
    }
    if (xs.size() >= 2) {
      rep.fitted_slopes.push_back(fit_loglog_slope(xs, ys));
      slopes.push_back(*rep.fitted_slopes.back());
    } else {
      rep.fitted_slopes.push_back(std::nullopt);
    }
    rep.fixed_eta_errors.push_back(mean_error(i * (n_rho + 1) + n_rho));
  }
  if (!slopes.empty())
    rep.mean_slope = std::accumulate(slopes.begin(), slopes.end(), 0.0) / static_cast<double>(slopes.size());

  // Fixed-eta sensitivity, ordered by decreasing mu.
  std::vector<std::size_t> order(n_mu);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cfg.mu_levels[a] > cfg.mu_levels[b]; });
  rep.fixed_eta_increasing = n_mu >= 2;
  for (std::size_t k = 1; k < order.size(); ++k)
    if (!(rep.fixed_eta_errors[order[k]] > rep.fixed_eta_errors[order[k - 1]]))
      rep.fixed_eta_increasing = false;
  if (n_mu >= 2 && std::all_of(rep.fixed_eta_errors.begin(), rep.fixed_eta_errors.end(),
                               [](double e) { return e > 0.0; })) {
    std::vector<double> inv_mu;
    for (double mu : cfg.mu_levels) inv_mu.push_back(1.0 / mu);
    rep.fixed_eta_slope = fit_loglog_slope(inv_mu, rep.fixed_eta_errors);
  }

  for (const auto& point : outcomes) {
    for (const auto& o : point) {
      if (o.flagged) {
        ++rep.flagged_trials;
        continue;
      }
      ++rep.telescoping_checks;
      if (o.violation) ++rep.telescoping_violations;
      rep.max_unitarity_residual = std::max(rep.max_unitarity_residual, o.unitarity);
      rep.max_telescoping_ratio = std::max(rep.max_telescoping_ratio, o.telescoping_ratio);
    }
  }
  return rep;
}

}  // namespace holokit
