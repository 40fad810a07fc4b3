#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "holokit/models.hpp"
#include "holokit/studies.hpp"
#include "holokit/transport.hpp"
#include "test_util.hpp"

namespace holokit {
namespace {

using testing::identity;
using testing::random_matrix;

constexpr double kPi = std::numbers::pi;

FramePath constant_path(const ComplexMatrix& f, std::size_t n, bool closed) {
  std::vector<Frame> frames(n + 1, Frame(f));
  std::vector<double> ts;
  for (std::size_t k = 0; k <= n; ++k) ts.push_back(static_cast<double>(k));
  return FramePath(std::move(frames), std::move(ts), closed);
}

double tangent_error(double theta0, std::size_t n) {
  const HolonomyEstimate est = estimate_holonomy(tangent_frame_loop(theta0, n));
  return (est.base_frame_holonomy - exact_tangent_holonomy(theta0)).norm();
}

TEST(Frame, Validation) {
  EXPECT_NO_THROW(Frame(ComplexMatrix::Identity(3, 2)));
  EXPECT_THROW(Frame(2.0 * ComplexMatrix::Identity(3, 2)), DomainError);
  EXPECT_THROW(Frame(ComplexMatrix::Identity(2, 3)), DomainError);
  EXPECT_THROW(Frame(ComplexMatrix(3, 0)), DomainError);
}

TEST(FramePath, Validation) {
  const Frame a(ComplexMatrix::Identity(3, 1));
  ComplexMatrix e2 = ComplexMatrix::Zero(3, 1);
  e2(1, 0) = 1.0;
  const Frame b(e2);
  EXPECT_THROW(FramePath({a, a}, {0.0, 0.0}, false), DomainError);
  EXPECT_THROW(FramePath({a, a}, {0.0}, false), DomainError);
  EXPECT_THROW(FramePath({a, b}, {0.0, 1.0}, true), DomainError);
  EXPECT_NO_THROW(FramePath({a, b}, {0.0, 1.0}, false));
  EXPECT_THROW(FramePath({a, Frame(ComplexMatrix::Identity(3, 2))}, {0.0, 1.0}, false),
               DomainError);
}

TEST(Transport, ConstantPathGivesIdentity) {
  RngStream rng(1);
  const ComplexMatrix f = haar_unitary(4, rng).leftCols(2);
  const HolonomyEstimate est = estimate_holonomy(constant_path(f, 10, true));
  EXPECT_LT((est.holonomy - identity(2)).norm(), 1e-14);
  EXPECT_LT((est.base_frame_holonomy - identity(2)).norm(), 1e-14);
  EXPECT_NEAR(est.mu_min, 1.0, 1e-14);
  EXPECT_NEAR(est.wilson_traces[0].real(), 2.0, 1e-14);
}

TEST(Transport, ScalarPhaseTelescopes) {
  // Phi_k = e^{i theta_k} u: every overlap is a pure phase and the product
  // telescopes to e^{-i (theta_N - theta_0)}.
  ComplexMatrix u(2, 1);
  u << 0.6, Complex(0.0, 0.8);
  std::vector<double> theta = {0.0, 0.3, 0.1, 1.2, 2.0};
  std::vector<Frame> frames;
  std::vector<double> ts;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    frames.emplace_back(u * std::polar(1.0, theta[k]));
    ts.push_back(static_cast<double>(k));
  }
  const HolonomyEstimate est = estimate_holonomy(FramePath(frames, ts, true));
  EXPECT_LT(std::abs(est.holonomy(0, 0) - std::polar(1.0, -2.0)), 1e-14);
  EXPECT_LT(std::abs(est.base_frame_holonomy(0, 0) - 1.0), 1e-14);
}

TEST(Transport, SingularOverlapReportsStep) {
  ComplexMatrix e1 = ComplexMatrix::Zero(3, 1), e2 = ComplexMatrix::Zero(3, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  const FramePath path({Frame(e1), Frame(e1), Frame(e2)}, {0.0, 1.0, 2.0}, false);
  try {
    overlaps_from_frames(path);
    FAIL() << "expected SingularOverlapError";
  } catch (const SingularOverlapError& e) {
    ASSERT_TRUE(e.step().has_value());
    EXPECT_EQ(*e.step(), 1u);
    EXPECT_EQ(e.sigma_min(), 0.0);
  }
  EXPECT_THROW(estimate_holonomy(path), SingularOverlapError);
}

TEST(Transport, ForwardTransportsCarryStepIndex) {
  std::vector<ComplexMatrix> m = {identity(2), identity(2), identity(2)};
  m[2](1, 1) = 1e-13;
  const OverlapSequence seq(m);
  EXPECT_EQ(seq.ill_conditioned_steps(1e-12), std::vector<std::size_t>{2});
  try {
    forward_transports(seq);
    FAIL() << "expected SingularOverlapError";
  } catch (const SingularOverlapError& e) {
    EXPECT_EQ(e.step().value(), 2u);
  }
}

TEST(Transport, TangentLoopConditioning) {
  const OverlapSequence seq = overlaps_from_frames(tangent_frame_loop(0.7, 80));
  EXPECT_GT(seq.mu_min(), 0.92);
  // Closed form for the 2x2 overlap [[a, -s], [s, d]]: the smaller singular
  // value is (sqrt((a + d)^2 + 4 s^2) - |a - d|) / 2.
  const double delta = 2.0 * kPi / 80.0, c = std::cos(0.7);
  const double a = c * c * std::cos(delta) + (1.0 - c * c), d = std::cos(delta);
  const double s = c * std::sin(delta);
  const double expected = 0.5 * (std::sqrt((a + d) * (a + d) + 4.0 * s * s) - std::abs(a - d));
  EXPECT_NEAR(seq.mu_min(), expected, 1e-12);
}

TEST(Transport, StepIsFirstOrderAccurate) {
  // ||T_k - (I - A dphi)|| <= C dphi^2 with A the tangent connection.
  const double theta0 = 0.7;
  const ComplexMatrix a = tangent_connection(theta0);
  double prev_ratio = 0.0;
  for (std::size_t n : {40u, 80u, 160u, 320u}) {
    const double dphi = 2.0 * kPi / static_cast<double>(n);
    const auto t = forward_transports(overlaps_from_frames(tangent_frame_loop(theta0, n)));
    double worst = 0.0;
    for (const auto& tk : t) worst = std::max(worst, (tk - (identity(2) - a * dphi)).norm());
    const double ratio = worst / (dphi * dphi);
    EXPECT_LT(ratio, 1.0);
    if (prev_ratio > 0.0) {
      EXPECT_NEAR(ratio, prev_ratio, 0.05 * prev_ratio);
    }
    prev_ratio = ratio;
  }
}

TEST(Transport, TangentLoopMatchesClosedForm) {
  EXPECT_LT(tangent_error(0.7, 1280), 1e-5);
  const auto phases = estimate_holonomy(tangent_frame_loop(0.7, 640)).eigenphase_list;
  EXPECT_NEAR(phases[0], -1.47754, 1e-3);
  EXPECT_NEAR(phases[1], 1.47754, 1e-3);
}

TEST(Transport, TangentLoopIsSecondOrder) {
  std::vector<double> hs, errs;
  for (std::size_t n : {40u, 80u, 160u, 320u, 640u}) {
    hs.push_back(2.0 * kPi / static_cast<double>(n));
    errs.push_back(tangent_error(0.7, n));
  }
  EXPECT_NEAR(fit_loglog_slope(hs, errs), 2.0, 0.1);
}

TEST(OrderedProduct, LaterStepsMultiplyOnTheLeft) {
  RngStream rng(2);
  const ComplexMatrix a = haar_unitary(2, rng), b = haar_unitary(2, rng);
  const std::vector<ComplexMatrix> steps = {a, b};
  EXPECT_LT((ordered_product(steps) - b * a).norm(), 1e-15);
  EXPECT_GT((b * a - a * b).norm(), 1e-3);
  EXPECT_THROW(ordered_product(std::span<const ComplexMatrix>{}), DomainError);
}

TEST(OrderedProduct, MatchesExplicitPolarProduct) {
  RngStream rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 4;
    std::vector<ComplexMatrix> m;
    for (std::size_t k = 0; k < n; ++k) m.push_back(random_matrix(3, 3, rng));
    const HolonomyEstimate est = estimate_holonomy(OverlapSequence(m));
    // Explicit: U = W_{N-1}^dagger ... W_0^dagger with W_k = L_k R_k^dagger.
    ComplexMatrix expected = identity(3);
    for (std::size_t k = 0; k < n; ++k) {
      const SvdResult f = svd(m[k]);
      expected = ((f.left * f.right.adjoint()).adjoint() * expected).eval();
    }
    EXPECT_LT((est.holonomy - expected).norm(), 1e-12);
    EXPECT_EQ(est.endpoint_identification, identity(3));
  }
}

TEST(Transport, UnitaryUnderIllConditioning) {
  RngStream rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ComplexMatrix> m;
    for (int k = 0; k < 20; ++k) {
      const ComplexMatrix l = haar_unitary(3, rng), r = haar_unitary(3, rng);
      RealVector s(3);
      s << 1.0, 1e-3, 1e-10;
      m.push_back(l * s.cast<Complex>().asDiagonal() * r.adjoint());
    }
    const HolonomyEstimate est = estimate_holonomy(OverlapSequence(m));
    EXPECT_LT(est.unitarity_residual, 1e-12);
    EXPECT_NEAR(est.mu_min, 1e-10, 1e-14);
  }
}

TEST(Transport, EndpointIdentificationAbsorbsFinalGauge) {
  RngStream rng(5);
  const FramePath loop = smooth_frame_loop(4, 2, 60, rng);
  const ComplexMatrix g = haar_unitary(2, rng);
  std::vector<Frame> frames = loop.frames();
  frames.back() = Frame(frames.front().matrix() * g);
  const FramePath twisted(frames, loop.parameter_values(), true);
  const HolonomyEstimate plain = estimate_holonomy(loop);
  const HolonomyEstimate est = estimate_holonomy(twisted);
  EXPECT_LT((plain.endpoint_identification - identity(2)).norm(), 1e-13);
  EXPECT_LT((est.endpoint_identification - g).norm(), 1e-12);
  EXPECT_LT((est.holonomy - g.adjoint() * plain.holonomy).norm(), 1e-12);
  EXPECT_LT((est.base_frame_holonomy - plain.base_frame_holonomy).norm(), 1e-12);
}

TEST(Transport, OpenPathWithOrthogonalEndsFallsBackToIdentity) {
  std::vector<Frame> frames;
  std::vector<double> ts;
  for (int k = 0; k <= 8; ++k) {
    const double a = 0.5 * kPi * k / 8.0;
    ComplexMatrix f(2, 1);
    f << std::cos(a), std::sin(a);
    frames.emplace_back(f);
    ts.push_back(a);
  }
  const HolonomyEstimate est = estimate_holonomy(FramePath(frames, ts, false));
  EXPECT_LT((est.endpoint_identification - identity(1)).norm(), 1e-15);
  EXPECT_LT(std::abs(est.holonomy(0, 0) - 1.0), 1e-14);
}

TEST(Transport, GenericLoopConverges) {
  RngStream rng(6);
  const auto seed_rng = rng;
  auto loop = [&](std::size_t n) {
    RngStream r = seed_rng;
    return estimate_holonomy(smooth_frame_loop(5, 2, n, r)).base_frame_holonomy;
  };
  const ComplexMatrix ref = loop(10240);
  std::vector<double> hs, errs;
  for (std::size_t n : {40u, 80u, 160u, 320u}) {
    hs.push_back(2.0 * kPi / static_cast<double>(n));
    errs.push_back((loop(n) - ref).norm());
  }
  EXPECT_GE(fit_loglog_slope(hs, errs), 0.9);
}

TEST(WilsonTraces, Examples) {
  const auto t = wilson_traces(identity(3));
  ASSERT_EQ(t.size(), 3u);
  for (const auto& z : t) EXPECT_LT(std::abs(z - 3.0), 1e-15);
  const Complex i{0, 1};
  ComplexMatrix d = identity(2);
  d(0, 0) = i;
  d(1, 1) = -i;
  const auto w = wilson_traces(d);
  EXPECT_LT(std::abs(w[0]), 1e-15);
  EXPECT_LT(std::abs(w[1] + 2.0), 1e-15);
  EXPECT_LT(std::abs(w[2]), 1e-15);
}

}  // namespace
}  // namespace holokit
