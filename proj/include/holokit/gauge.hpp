#pragma once

#include <cstddef>
#include <vector>

#include "holokit/linalg.hpp"
#include "holokit/random.hpp"
#include "holokit/transport.hpp"

namespace holokit {

/// Gauges G_0 ... G_N. A closed sequence stores G_0 once and returns it for
/// index N as well, so the endpoint matches bit for bit.
class GaugeSequence {
 public:
  GaugeSequence(std::vector<ComplexMatrix> gauges, bool closed, double tol = 1e-12)
      : gauges_(std::move(gauges)), closed_(closed) {
    if (gauges_.empty()) throw DomainError("GaugeSequence: no gauges");
    const auto m = gauges_.front().rows();
    for (std::size_t k = 0; k < gauges_.size(); ++k) {
      if (gauges_[k].rows() != m || gauges_[k].cols() != m)
        throw DomainError("GaugeSequence: gauge " + std::to_string(k) + " has wrong shape");
      const double res = unitarity_residual(gauges_[k]);
      if (res >= tol)
        throw DomainError("GaugeSequence: gauge " + std::to_string(k) + " not unitary");
    }
  }

  bool closed() const noexcept { return closed_; }
  Eigen::Index logical_rank() const noexcept { return gauges_.front().rows(); }

  /// Number of gauges N + 1, counting the aliased endpoint.
  std::size_t size() const noexcept { return closed_ ? gauges_.size() + 1 : gauges_.size(); }

  const ComplexMatrix& operator[](std::size_t k) const {
    if (closed_ && k == gauges_.size()) return gauges_.front();
    return gauges_.at(k);
  }

 private:
  std::vector<ComplexMatrix> gauges_;
  bool closed_;
};

inline GaugeSequence random_gauge_sequence(Eigen::Index m, std::size_t n_steps, bool closed,
                                           RngStream& rng) {
  if (n_steps < 1) throw DomainError("random_gauge_sequence: N must be >= 1");
  const std::size_t stored = closed ? n_steps : n_steps + 1;
  std::vector<ComplexMatrix> g;
  g.reserve(stored);
  for (std::size_t k = 0; k < stored; ++k) g.push_back(haar_unitary(m, rng));
  return GaugeSequence(std::move(g), closed);
}

/// Phi_k -> Phi_k G_k.
inline FramePath apply_gauge(const FramePath& path, const GaugeSequence& g) {
  if (g.size() != path.size())
    throw DomainError("apply_gauge: gauge sequence length " + std::to_string(g.size()) +
                      " != path length " + std::to_string(path.size()));
  if (g.logical_rank() != path.logical_rank())
    throw DomainError("apply_gauge: logical rank mismatch");
  std::vector<Frame> frames;
  frames.reserve(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) frames.emplace_back(path[k].matrix() * g[k]);
  return FramePath(std::move(frames), path.parameter_values(), path.closed_subspace());
}

/// ||U'^(0) - G_0^dagger U^(0) G_0||_F on base-frame holonomies.
inline double covariance_residual(const HolonomyEstimate& est, const HolonomyEstimate& gauged,
                                  const ComplexMatrix& g0) {
  const auto m = est.base_frame_holonomy.rows();
  if (gauged.base_frame_holonomy.rows() != m || g0.rows() != m || g0.cols() != m)
    throw DomainError("covariance_residual: dimension mismatch");
  return (gauged.base_frame_holonomy - g0.adjoint() * est.base_frame_holonomy * g0).norm();
}

}  // namespace holokit
