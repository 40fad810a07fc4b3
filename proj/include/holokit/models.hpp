#pragma once

// Synthetic connections, frame loops and their reference holonomies.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "holokit/linalg.hpp"
#include "holokit/random.hpp"
#include "holokit/transport.hpp"

namespace holokit {

/// t -> A(t), anti-Hermitian m x m. `evaluate` must be safe to call
/// concurrently.
struct ConnectionModel {
  Eigen::Index logical_rank = 0;
  std::function<ComplexMatrix(double)> evaluate;
};

/// Uniform partition of [t_start, t_end] into `steps` intervals.
struct Partition {
  double t_start = 0.0;
  double t_end = 2.0 * std::numbers::pi;
  std::size_t steps = 1;

  Partition() = default;
  Partition(double start, double end, std::size_t n) : t_start(start), t_end(end), steps(n) {
    if (n < 1) throw DomainError("Partition: steps must be >= 1");
    if (!(end > start)) throw DomainError("Partition: empty interval");
  }

  double mesh() const { return (t_end - t_start) / static_cast<double>(steps); }
  double node(std::size_t k) const {
    return k == steps ? t_end : t_start + mesh() * static_cast<double>(k);
  }
};

namespace pauli {
inline ComplexMatrix x() { return (ComplexMatrix(2, 2) << 0, 1, 1, 0).finished(); }
inline ComplexMatrix y() {
  return (ComplexMatrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished();
}
inline ComplexMatrix z() { return (ComplexMatrix(2, 2) << 1, 0, 0, -1).finished(); }
}  // namespace pauli

using Coefficient = std::function<double(double)>;

/// A(t) = i (ax(t) sx + ay(t) sy + az(t) sz).
inline ConnectionModel pauli_connection(Coefficient ax, Coefficient ay, Coefficient az) {
  ConnectionModel model;
  model.logical_rank = 2;
  model.evaluate = [ax = std::move(ax), ay = std::move(ay), az = std::move(az)](double t) {
    const Complex i{0.0, 1.0};
    ComplexMatrix a = i * (ax(t) * pauli::x() + ay(t) * pauli::y() + az(t) * pauli::z());
    return a;
  };
  return model;
}

/// The non-commuting benchmark: 0.7 cos t, 0.4 sin 2t, 0.2.
inline ConnectionModel benchmark_connection() {
  return pauli_connection([](double t) { return 0.7 * std::cos(t); },
                          [](double t) { return 0.4 * std::sin(2.0 * t); },
                          [](double) { return 0.2; });
}

/// prod_k exp(-A(t_k + h/2) h), earliest step rightmost.
inline ComplexMatrix discrete_ordered_product(const ConnectionModel& model,
                                              const Partition& partition) {
  const auto m = model.logical_rank;
  ComplexMatrix u = ComplexMatrix::Identity(m, m);
  const double h = partition.mesh();
  for (std::size_t k = 0; k < partition.steps; ++k) {
    const double mid = partition.t_start + (static_cast<double>(k) + 0.5) * h;
    u = (expm_antihermitian(-model.evaluate(mid) * h) * u).eval();
  }
  return u;
}

/// Reference solution of dU/dt = -A(t) U, U(t_start) = I, on the partition
/// refined by `refine_factor`. Each sub-step is a fourth-order Magnus step
/// with two Gauss-Legendre nodes, so the result is unitary and exact for
/// commuting generators.
inline ComplexMatrix reference_transport(const ConnectionModel& model, const Partition& partition,
                                         std::size_t refine_factor = 16) {
  if (refine_factor < 1) throw DomainError("reference_transport: refine_factor must be >= 1");
  const auto m = model.logical_rank;
  const std::size_t n = partition.steps * refine_factor;
  const double h = (partition.t_end - partition.t_start) / static_cast<double>(n);
  const double c = std::numbers::sqrt3 / 6.0;
  ComplexMatrix u = ComplexMatrix::Identity(m, m);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = partition.t_start + h * static_cast<double>(k);
    const ComplexMatrix b1 = -model.evaluate(t + (0.5 - c) * h);
    const ComplexMatrix b2 = -model.evaluate(t + (0.5 + c) * h);
    ComplexMatrix omega = 0.5 * h * (b1 + b2) + (std::numbers::sqrt3 / 12.0) * h * h * (b2 * b1 - b1 * b2);
    omega = 0.5 * (omega - omega.adjoint()).eval();
    u = (expm_antihermitian(omega) * u).eval();
  }
  return u;
}

// Sphere tangent frames on the latitude circle theta = theta0.

inline ComplexMatrix tangent_frame(double theta0, double phi) {
  ComplexMatrix f(3, 2);
  f << std::cos(theta0) * std::cos(phi), -std::sin(phi),
       std::cos(theta0) * std::sin(phi), std::cos(phi),
       -std::sin(theta0), 0.0;
  return f;
}

inline void check_polar_angle(double theta0) {
  if (!(theta0 > 0.0 && theta0 < std::numbers::pi))
    throw DomainError("tangent frame loop: theta0 must lie strictly between the poles");
}

/// Columns (e_theta, e_phi) at phi_k = 2 pi k / N, k = 0..N, with
/// Phi_N = Phi_0 exactly.
inline FramePath tangent_frame_loop(double theta0, std::size_t n) {
  check_polar_angle(theta0);
  if (n < 3) throw DomainError("tangent_frame_loop: N must be >= 3");
  std::vector<Frame> frames;
  std::vector<double> phis;
  frames.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    frames.emplace_back(tangent_frame(theta0, k == n ? 0.0 : phi));
    phis.push_back(phi);
  }
  return FramePath(std::move(frames), std::move(phis), true);
}

/// A_phi = Phi^dagger dPhi/dphi = [[0, -cos theta0], [cos theta0, 0]].
inline ComplexMatrix tangent_connection(double theta0) {
  const double c = std::cos(theta0);
  return (ComplexMatrix(2, 2) << 0.0, -c, c, 0.0).finished();
}

/// exp(-2 pi A_phi): rotation by -2 pi cos theta0.
inline ComplexMatrix exact_tangent_holonomy(double theta0) {
  check_polar_angle(theta0);
  const double angle = -2.0 * std::numbers::pi * std::cos(theta0);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return (ComplexMatrix(2, 2) << c, -s, s, c).finished();
}

/// m = 1 loop of spin-coherent states (cos(theta0/2), e^{i phi} sin(theta0/2)).
inline FramePath abelian_loop(double theta0, std::size_t n) {
  if (!(theta0 >= 0.0 && theta0 < std::numbers::pi))
    throw DomainError("abelian_loop: theta0 must lie in [0, pi)");
  if (n < 3) throw DomainError("abelian_loop: N must be >= 3");
  std::vector<Frame> frames;
  std::vector<double> phis;
  for (std::size_t k = 0; k <= n; ++k) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    ComplexMatrix u(2, 1);
    u << std::cos(theta0 / 2.0), std::polar(std::sin(theta0 / 2.0), k == n ? 0.0 : phi);
    frames.emplace_back(std::move(u));
    phis.push_back(phi);
  }
  return FramePath(std::move(frames), std::move(phis), true);
}

/// Continuum phase of exp(-oint <u|du>) for abelian_loop, in (-pi, pi].
inline double abelian_reference_phase(double theta0) {
  const double phase = -std::numbers::pi * (1.0 - std::cos(theta0));
  return std::arg(std::polar(1.0, phase));
}

/// Generic smooth closed loop in d dimensions: orthonormalized low-order
/// Fourier series X(t) = X_0 + a sum_j (C_j cos jt + S_j sin jt), sampled at
/// t_k = 2 pi k / N with the last frame copied from the first.
inline FramePath smooth_frame_loop(Eigen::Index d, Eigen::Index m, std::size_t n, RngStream& rng,
                                   double amplitude = 0.3, int harmonics = 2) {
  if (d < m || m < 1) throw DomainError("smooth_frame_loop: need d >= m >= 1");
  if (n < 3) throw DomainError("smooth_frame_loop: N must be >= 3");
  const ComplexMatrix base = haar_unitary(d, rng).leftCols(m);
  std::vector<ComplexMatrix> cos_terms, sin_terms;
  auto gaussian = [&] {
    ComplexMatrix g(d, m);
    for (Eigen::Index c = 0; c < m; ++c)
      for (Eigen::Index r = 0; r < d; ++r) g(r, c) = rng.complex_normal();
    return g;
  };
  for (int j = 0; j < harmonics; ++j) {
    cos_terms.push_back(gaussian() * (amplitude / (j + 1)));
    sin_terms.push_back(gaussian() * (amplitude / (j + 1)));
  }
  auto sample = [&](double t) {
    ComplexMatrix x = base;
    for (int j = 0; j < harmonics; ++j)
      x += cos_terms[j] * std::cos((j + 1) * t) + sin_terms[j] * std::sin((j + 1) * t);
    return orthonormalize(x);
  };
  std::vector<Frame> frames;
  std::vector<double> ts;
  frames.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    frames.emplace_back(sample(t));
    ts.push_back(t);
  }
  frames.push_back(frames.front());
  ts.push_back(2.0 * std::numbers::pi);
  return FramePath(std::move(frames), std::move(ts), true);
}

/// Phi_k = orthonormalize(T_k Phi_in), parameters 0, 1, 2, ... The path is
/// marked closed when the last projector returns to the first.
inline FramePath frames_from_transfer_model(std::span<const ComplexMatrix> transfer_matrices,
                                            const Frame& input_frame,
                                            const Tolerances& tol = {}) {
  if (transfer_matrices.empty()) throw DomainError("frames_from_transfer_model: no matrices");
  std::vector<Frame> frames;
  std::vector<double> params;
  for (std::size_t k = 0; k < transfer_matrices.size(); ++k) {
    const auto& t = transfer_matrices[k];
    if (t.rows() != t.cols() || t.cols() != input_frame.ambient_dim())
      throw DomainError("frames_from_transfer_model: matrix " + std::to_string(k) +
                        " does not act on the input frame");
    try {
      frames.emplace_back(orthonormalize(t * input_frame.matrix(), tol.singular));
    } catch (const DomainError& e) {
      throw DomainError("frames_from_transfer_model: step " + std::to_string(k) + ": " +
                        e.what());
    }
    params.push_back(static_cast<double>(k));
  }
  const bool closed =
      frames.size() > 1 &&
      (frames.back().projector() - frames.front().projector()).norm() < tol.closure;
  return FramePath(std::move(frames), std::move(params), closed);
}

}  // namespace holokit
