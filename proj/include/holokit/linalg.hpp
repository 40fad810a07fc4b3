#pragma once

// Dense complex kernels for small logical ranks: SVD, polar factor,
// anti-Hermitian exponential, eigenphases, orthonormalization, Haar unitaries.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "holokit/errors.hpp"
#include "holokit/random.hpp"

namespace holokit {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kDefaultSingularTol = 1e-12;
inline constexpr double kDefaultUnitaryTol = 1e-8;

struct SvdResult {
  ComplexMatrix left;
  RealVector singular_values;  // descending
  ComplexMatrix right;
};

struct PolarResult {
  ComplexMatrix unitary;
  ComplexMatrix positive;
  double min_singular_value = 0.0;
};

inline bool all_finite(const ComplexMatrix& m) {
  return m.array().isFinite().all();
}

inline void require_finite(const ComplexMatrix& m, const char* what) {
  if (!all_finite(m)) throw DomainError(std::string(what) + ": non-finite entry");
}

inline void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw DomainError(std::string(what) + ": expected a non-empty square matrix, got " +
                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

/// ||U^dagger U - I||_F
inline double unitarity_residual(const ComplexMatrix& u) {
  require_square(u, "unitarity_residual");
  return (u.adjoint() * u - ComplexMatrix::Identity(u.cols(), u.cols())).norm();
}

inline double spectral_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues()(0);
}

/// Full SVD, M = left * diag(sigma) * right^dagger.
inline SvdResult svd(const ComplexMatrix& m) {
  if (m.size() == 0) throw DomainError("svd: empty matrix");
  require_finite(m, "svd");
  Eigen::JacobiSVD<ComplexMatrix> dec(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdResult out{dec.matrixU(), dec.singularValues(), dec.matrixV()};
  if (!all_finite(out.left) || !all_finite(out.right) ||
      !out.singular_values.array().isFinite().all())
    throw NumericalError("svd: did not converge to finite factors");
  return out;
}

inline double min_singular_value(const ComplexMatrix& m) {
  if (m.size() == 0) throw DomainError("min_singular_value: empty matrix");
  Eigen::JacobiSVD<ComplexMatrix> dec(m);
  const auto& s = dec.singularValues();
  // Non-square inputs have min(rows, cols) values; rank deficiency of the
  // tall direction shows up as the last one.
  return s(s.size() - 1);
}

/// Polar decomposition M = W H with W unitary and H positive definite.
/// Rejects M whose smallest singular value is below `tol`.
inline PolarResult polar(const ComplexMatrix& m, double tol = kDefaultSingularTol) {
  require_square(m, "polar");
  SvdResult f = svd(m);
  const double smin = f.singular_values(f.singular_values.size() - 1);
  if (!(smin >= tol)) throw SingularOverlapError(smin, tol);
  PolarResult out;
  out.unitary = f.left * f.right.adjoint();
  out.positive = f.right * f.singular_values.cast<Complex>().asDiagonal() * f.right.adjoint();
  out.min_singular_value = smin;
  return out;
}

/// exp(A) for anti-Hermitian A, via the Hermitian eigendecomposition of iA.
inline ComplexMatrix expm_antihermitian(const ComplexMatrix& a, double tol = 1e-10) {
  require_square(a, "expm_antihermitian");
  require_finite(a, "expm_antihermitian");
  const double skew = (a + a.adjoint()).norm();
  if (skew > tol)
    throw DomainError("expm_antihermitian: ||A + A^dagger||_F = " + std::to_string(skew) +
                      " exceeds tolerance");
  const Complex i{0.0, 1.0};
  ComplexMatrix h = i * a;
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(h);
  if (eig.info() != Eigen::Success) throw NumericalError("expm_antihermitian: eigensolver failed");
  // A = -iH, so exp(A) = V exp(-i Lambda) V^dagger.
  ComplexVector phases(eig.eigenvalues().size());
  for (Eigen::Index k = 0; k < phases.size(); ++k)
    phases(k) = std::polar(1.0, -eig.eigenvalues()(k));
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

/// Eigenphases of a unitary in (-pi, pi], ascending.
inline std::vector<double> eigenphases(const ComplexMatrix& u, double tol = kDefaultUnitaryTol) {
  const double res = unitarity_residual(u);
  if (res > tol)
    throw DomainError("eigenphases: input not unitary (residual " + std::to_string(res) + ")");
  Eigen::ComplexEigenSolver<ComplexMatrix> eig(u, false);
  if (eig.info() != Eigen::Success) throw NumericalError("eigenphases: eigensolver failed");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(u.rows()));
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
    double theta = std::arg(eig.eigenvalues()(k));
    if (theta <= -std::numbers::pi) theta = std::numbers::pi;
    out.push_back(theta);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of diag(R) moved into Q.
inline ComplexMatrix haar_unitary(Eigen::Index m, RngStream& rng) {
  if (m < 1) throw DomainError("haar_unitary: m must be >= 1");
  ComplexMatrix z(m, m);
  for (Eigen::Index c = 0; c < m; ++c)
    for (Eigen::Index r = 0; r < m; ++r) z(r, c) = rng.complex_normal();
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix& packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < m; ++j) {
    const Complex rjj = packed(j, j);
    const double mag = std::abs(rjj);
    q.col(j) *= (mag > 0.0) ? rjj / mag : Complex{1.0, 0.0};
  }
  return q;
}

/// Orthonormal basis of the column span, gauge fixed by requiring the thin-QR
/// factor R to have positive real diagonal.
inline ComplexMatrix orthonormalize(const ComplexMatrix& columns, double tol = kDefaultSingularTol) {
  const Eigen::Index d = columns.rows();
  const Eigen::Index m = columns.cols();
  if (m < 1 || d < m)
    throw DomainError("orthonormalize: need rows >= cols >= 1, got " + std::to_string(d) + "x" +
                      std::to_string(m));
  require_finite(columns, "orthonormalize");
  const double smin = min_singular_value(columns);
  if (!(smin > tol))
    throw DomainError("orthonormalize: rank-deficient columns (sigma_min = " +
                      std::to_string(smin) + ")");
  Eigen::HouseholderQR<ComplexMatrix> qr(columns);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(d, m);
  const ComplexMatrix& packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < m; ++j) {
    const Complex rjj = packed(j, j);
    q.col(j) *= rjj / std::abs(rjj);
  }
  return q;
}

struct DominantSubspace {
  ComplexMatrix frame;         // d x m, orthonormal columns
  RealVector singular_values;  // all singular values of the input, descending
  bool tie = false;            // sigma_{m-1} and sigma_m are not separated
};

/// Top-m left singular vectors of a transfer matrix. `tie` is raised when the
/// m-th and (m+1)-th singular values coincide within `gap_tol * sigma_max`,
/// in which case the selected subspace is not well defined.
inline DominantSubspace dominant_subspace(const ComplexMatrix& t, Eigen::Index m,
                                          double gap_tol = 1e-8) {
  if (m < 1 || m > t.rows() || m > t.cols())
    throw DomainError("dominant_subspace: rank out of range");
  SvdResult f = svd(t);
  DominantSubspace out;
  out.frame = f.left.leftCols(m);
  out.singular_values = f.singular_values;
  const auto& s = f.singular_values;
  if (m < s.size()) out.tie = (s(m - 1) - s(m)) <= gap_tol * s(0);
  return out;
}

}  // namespace holokit
