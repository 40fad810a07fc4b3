#pragma once

// Feed-forward removal of a reconstructed holonomy from an effective gate.

#include <algorithm>
#include <optional>
#include <string_view>

#include "holokit/linalg.hpp"

namespace holokit {

/// Side on which the geometric factor multiplies the intended gate:
/// left means V_eff = U V, right means V_eff = V U.
enum class GateConvention { left, right };

inline std::string_view to_string(GateConvention c) {
  return c == GateConvention::left ? "left" : "right";
}

class EffectiveGate {
 public:
  EffectiveGate(ComplexMatrix matrix, GateConvention convention)
      : matrix_(std::move(matrix)), convention_(convention) {
    require_square(matrix_, "EffectiveGate");
    require_finite(matrix_, "EffectiveGate");
    residual_ = holokit::unitarity_residual(matrix_);
  }

  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  GateConvention convention() const noexcept { return convention_; }
  double unitarity_residual() const noexcept { return residual_; }
  bool is_unitary(double tol = kDefaultUnitaryTol) const noexcept { return residual_ < tol; }

 private:
  ComplexMatrix matrix_;
  GateConvention convention_;
  double residual_ = 0.0;
};

namespace detail {
inline void check_gate(const ComplexMatrix& holonomy, const EffectiveGate& gate,
                       GateConvention expected, const char* what) {
  if (gate.convention() != expected)
    throw DomainError(std::string(what) + ": gate has " + std::string(to_string(gate.convention())) +
                      " convention");
  if (holonomy.rows() != gate.matrix().rows() || holonomy.cols() != gate.matrix().cols())
    throw DomainError(std::string(what) + ": dimension mismatch");
}
}  // namespace detail

/// V_corr = U^dagger V_eff.
inline ComplexMatrix correct_left(const ComplexMatrix& holonomy, const EffectiveGate& v_eff) {
  detail::check_gate(holonomy, v_eff, GateConvention::left, "correct_left");
  return holonomy.adjoint() * v_eff.matrix();
}

/// V_corr = V_eff U^dagger.
inline ComplexMatrix correct_right(const EffectiveGate& v_eff, const ComplexMatrix& holonomy) {
  detail::check_gate(holonomy, v_eff, GateConvention::right, "correct_right");
  return v_eff.matrix() * holonomy.adjoint();
}

/// Dispatch on the gate's own convention.
inline ComplexMatrix correct(const ComplexMatrix& holonomy, const EffectiveGate& v_eff) {
  return v_eff.convention() == GateConvention::left ? correct_left(holonomy, v_eff)
                                                    : correct_right(v_eff, holonomy);
}

/// F = |Tr(V_corr^dagger V)|^2 / m^2, clipped to [0, 1].
inline double gate_fidelity(const ComplexMatrix& v_corr, const ComplexMatrix& v) {
  if (v_corr.rows() != v.rows() || v_corr.cols() != v.cols() || v.rows() != v.cols())
    throw DomainError("gate_fidelity: dimension mismatch");
  const double m = static_cast<double>(v.rows());
  const double f = std::norm((v_corr.adjoint() * v).trace()) / (m * m);
  return std::clamp(f, 0.0, 1.0);
}

/// V_eff = U V + R (left) or V U + R (right).
inline EffectiveGate synth_effective_gate(const ComplexMatrix& u_true, const ComplexMatrix& v,
                                          GateConvention convention,
                                          const std::optional<ComplexMatrix>& residual = std::nullopt) {
  require_square(u_true, "synth_effective_gate");
  if (v.rows() != u_true.rows() || v.cols() != u_true.cols())
    throw DomainError("synth_effective_gate: dimension mismatch");
  ComplexMatrix g = convention == GateConvention::left ? ComplexMatrix(u_true * v)
                                                       : ComplexMatrix(v * u_true);
  if (residual) {
    if (residual->rows() != g.rows() || residual->cols() != g.cols())
      throw DomainError("synth_effective_gate: residual dimension mismatch");
    g += *residual;
  }
  return EffectiveGate(std::move(g), convention);
}

}  // namespace holokit
