#pragma once

// Frames -> overlaps -> polar comparators -> forward transports -> ordered
// product, with endpoint identification and gauge-invariant diagnostics.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "holokit/linalg.hpp"

namespace holokit {

struct Tolerances {
  double construction = 1e-10;  // Frame orthonormality
  double singular = 1e-12;      // smallest admissible overlap singular value
  double closure = 1e-8;        // ||P_N - P_0||_F for closed projector loops
  double unitary = 1e-10;       // holonomy unitarity residual
};

/// Orthonormal d x m basis of a logical subspace.
class Frame {
 public:
  explicit Frame(ComplexMatrix matrix, double tol = Tolerances{}.construction)
      : matrix_(std::move(matrix)) {
    if (matrix_.cols() < 1 || matrix_.rows() < matrix_.cols())
      throw DomainError("Frame: need d >= m >= 1");
    require_finite(matrix_, "Frame");
    const double err =
        (matrix_.adjoint() * matrix_ - ComplexMatrix::Identity(matrix_.cols(), matrix_.cols()))
            .norm();
    if (err > tol)
      throw DomainError("Frame: columns not orthonormal (||F^dagger F - I||_F = " +
                        std::to_string(err) + ")");
  }

  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  Eigen::Index ambient_dim() const noexcept { return matrix_.rows(); }
  Eigen::Index logical_rank() const noexcept { return matrix_.cols(); }
  ComplexMatrix projector() const { return matrix_ * matrix_.adjoint(); }

 private:
  ComplexMatrix matrix_;
};

/// Frames Phi_0 ... Phi_N at strictly increasing parameter values. When
/// `closed_subspace` is set the projector loop is required to close.
class FramePath {
 public:
  FramePath(std::vector<Frame> frames, std::vector<double> parameter_values,
            bool closed_subspace, double closure_tol = Tolerances{}.closure)
      : frames_(std::move(frames)),
        parameter_values_(std::move(parameter_values)),
        closed_subspace_(closed_subspace) {
    if (frames_.empty()) throw DomainError("FramePath: no frames");
    if (frames_.size() != parameter_values_.size())
      throw DomainError("FramePath: frame/parameter count mismatch");
    const auto d = frames_.front().ambient_dim();
    const auto m = frames_.front().logical_rank();
    for (std::size_t k = 0; k < frames_.size(); ++k) {
      if (frames_[k].ambient_dim() != d || frames_[k].logical_rank() != m)
        throw DomainError("FramePath: frame " + std::to_string(k) + " has mismatched shape");
      if (k > 0 && !(parameter_values_[k] > parameter_values_[k - 1]))
        throw DomainError("FramePath: parameter values not strictly increasing at " +
                          std::to_string(k));
    }
    if (closed_subspace_) {
      const double gap = closure_gap();
      if (gap >= closure_tol)
        throw DomainError("FramePath: projector loop not closed (||P_N - P_0||_F = " +
                          std::to_string(gap) + ")");
    }
  }

  const std::vector<Frame>& frames() const noexcept { return frames_; }
  const std::vector<double>& parameter_values() const noexcept { return parameter_values_; }
  bool closed_subspace() const noexcept { return closed_subspace_; }
  std::size_t size() const noexcept { return frames_.size(); }
  std::size_t steps() const noexcept { return frames_.size() - 1; }
  Eigen::Index ambient_dim() const noexcept { return frames_.front().ambient_dim(); }
  Eigen::Index logical_rank() const noexcept { return frames_.front().logical_rank(); }
  const Frame& operator[](std::size_t k) const { return frames_[k]; }

  double closure_gap() const {
    return (frames_.back().projector() - frames_.front().projector()).norm();
  }

 private:
  std::vector<Frame> frames_;
  std::vector<double> parameter_values_;
  bool closed_subspace_;
};

/// Adjacent overlaps M_k with their smallest singular values.
class OverlapSequence {
 public:
  explicit OverlapSequence(std::vector<ComplexMatrix> overlaps) : overlaps_(std::move(overlaps)) {
    if (overlaps_.empty()) throw DomainError("OverlapSequence: no overlaps");
    rank_ = overlaps_.front().rows();
    min_singular_values_.reserve(overlaps_.size());
    for (std::size_t k = 0; k < overlaps_.size(); ++k) {
      const auto& mk = overlaps_[k];
      if (mk.rows() != rank_ || mk.cols() != rank_)
        throw DomainError("OverlapSequence: overlap " + std::to_string(k) + " is not " +
                          std::to_string(rank_) + "x" + std::to_string(rank_));
      require_finite(mk, "OverlapSequence");
      min_singular_values_.push_back(min_singular_value(mk));
    }
  }

  const std::vector<ComplexMatrix>& overlaps() const noexcept { return overlaps_; }
  const std::vector<double>& min_singular_values() const noexcept { return min_singular_values_; }
  Eigen::Index logical_rank() const noexcept { return rank_; }
  std::size_t size() const noexcept { return overlaps_.size(); }
  const ComplexMatrix& operator[](std::size_t k) const { return overlaps_[k]; }

  double mu_min() const {
    return *std::min_element(min_singular_values_.begin(), min_singular_values_.end());
  }

  /// Steps whose overlap is below `tol`.
  std::vector<std::size_t> ill_conditioned_steps(double tol) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < min_singular_values_.size(); ++k)
      if (!(min_singular_values_[k] >= tol)) out.push_back(k);
    return out;
  }

 private:
  std::vector<ComplexMatrix> overlaps_;
  std::vector<double> min_singular_values_;
  Eigen::Index rank_ = 0;
};

struct HolonomyEstimate {
  ComplexMatrix holonomy;                 // T_{N-1} ... T_0
  ComplexMatrix base_frame_holonomy;      // B * holonomy
  ComplexMatrix endpoint_identification;  // B
  std::vector<double> eigenphase_list;
  std::vector<Complex> wilson_traces;  // Tr(U^r), r = 1, 2, 3
  double mu_min = 0.0;
  double unitarity_residual = 0.0;
};

/// Tr(U^r) for r = 1 .. r_max.
inline std::vector<Complex> wilson_traces(const ComplexMatrix& u, int r_max = 3) {
  require_square(u, "wilson_traces");
  std::vector<Complex> out;
  ComplexMatrix power = u;
  for (int r = 1; r <= r_max; ++r) {
    out.push_back(power.trace());
    if (r < r_max) power = (power * u).eval();
  }
  return out;
}

inline OverlapSequence overlaps_from_frames(const FramePath& path,
                                            double tol = Tolerances{}.singular) {
  if (path.size() < 2) throw DomainError("overlaps_from_frames: need at least two frames");
  std::vector<ComplexMatrix> m;
  m.reserve(path.steps());
  for (std::size_t k = 0; k + 1 < path.size(); ++k)
    m.push_back(path[k].matrix().adjoint() * path[k + 1].matrix());
  OverlapSequence seq(std::move(m));
  for (std::size_t k = 0; k < seq.size(); ++k)
    if (!(seq.min_singular_values()[k] >= tol))
      throw SingularOverlapError(seq.min_singular_values()[k], tol, k);
  return seq;
}

/// T_k = polar(M_k).unitary^dagger.
inline std::vector<ComplexMatrix> forward_transports(const OverlapSequence& overlaps,
                                                     double tol = Tolerances{}.singular) {
  std::vector<ComplexMatrix> out;
  out.reserve(overlaps.size());
  for (std::size_t k = 0; k < overlaps.size(); ++k) {
    try {
      out.push_back(polar(overlaps[k], tol).unitary.adjoint());
    } catch (const SingularOverlapError& e) {
      throw SingularOverlapError(e.sigma_min(), tol, k);
    }
  }
  return out;
}

/// Right-to-left ordered product: the first transport is applied first.
inline ComplexMatrix ordered_product(std::span<const ComplexMatrix> steps) {
  if (steps.empty()) throw DomainError("ordered_product: no steps");
  ComplexMatrix u = ComplexMatrix::Identity(steps.front().rows(), steps.front().cols());
  for (const auto& t : steps) u = (t * u).eval();
  return u;
}

namespace detail {

inline HolonomyEstimate finish_estimate(const OverlapSequence& overlaps, ComplexMatrix b,
                                        const Tolerances& tol) {
  HolonomyEstimate est;
  const auto transports = forward_transports(overlaps, tol.singular);
  est.holonomy = ordered_product(transports);
  est.endpoint_identification = std::move(b);
  est.base_frame_holonomy = est.endpoint_identification * est.holonomy;
  est.unitarity_residual = holokit::unitarity_residual(est.holonomy);
  if (!(est.unitarity_residual < tol.unitary))
    throw NumericalError("estimate_holonomy: holonomy unitarity residual " +
                         std::to_string(est.unitarity_residual));
  est.mu_min = overlaps.mu_min();
  est.eigenphase_list = eigenphases(est.base_frame_holonomy);
  est.wilson_traces = wilson_traces(est.base_frame_holonomy, 3);
  return est;
}

}  // namespace detail

/// Holonomy from overlaps alone; endpoint identification is taken as I.
inline HolonomyEstimate estimate_holonomy(const OverlapSequence& overlaps,
                                          const Tolerances& tol = {}) {
  const auto m = overlaps.logical_rank();
  return detail::finish_estimate(overlaps, ComplexMatrix::Identity(m, m), tol);
}

/// Holonomy from frames. B = polar(Phi_0^dagger Phi_N) maps the final frame
/// back to the base frame; diagnostics are computed on B * U. For an open
/// path whose end frames do not overlap, B falls back to I.
inline HolonomyEstimate estimate_holonomy(const FramePath& path, const Tolerances& tol = {}) {
  const OverlapSequence overlaps = overlaps_from_frames(path, tol.singular);
  const ComplexMatrix endpoint = path.frames().front().matrix().adjoint() *
                                 path.frames().back().matrix();
  ComplexMatrix b;
  try {
    b = polar(endpoint, tol.singular).unitary;
  } catch (const SingularOverlapError&) {
    if (path.closed_subspace())
      throw DomainError("estimate_holonomy: endpoint frames span different subspaces");
    b = ComplexMatrix::Identity(path.logical_rank(), path.logical_rank());
  }
  return detail::finish_estimate(overlaps, std::move(b), tol);
}

}  // namespace holokit
