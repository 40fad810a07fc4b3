#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "holokit/models.hpp"
#include "holokit/studies.hpp"
#include "test_util.hpp"

namespace holokit {
namespace {

using testing::identity;

constexpr double kPi = std::numbers::pi;

TEST(Partition, NodesAndMesh) {
  const Partition p(0.0, 2.0 * kPi, 8);
  EXPECT_DOUBLE_EQ(p.mesh(), kPi / 4.0);
  EXPECT_EQ(p.node(0), 0.0);
  EXPECT_EQ(p.node(8), 2.0 * kPi);
  EXPECT_THROW(Partition(0.0, 1.0, 0), DomainError);
  EXPECT_THROW(Partition(1.0, 1.0, 4), DomainError);
}

TEST(Pauli, Algebra) {
  const Complex i{0, 1};
  EXPECT_LT((pauli::x() * pauli::y() - i * pauli::z()).norm(), 1e-15);
  EXPECT_LT((pauli::x() * pauli::x() - identity(2)).norm(), 1e-15);
}

TEST(Connection, BenchmarkIsAntiHermitianAndNonCommuting) {
  const ConnectionModel model = benchmark_connection();
  const ComplexMatrix a0 = model.evaluate(0.3), a1 = model.evaluate(1.4);
  EXPECT_LT((a0 + a0.adjoint()).norm(), 1e-15);
  EXPECT_GT((a0 * a1 - a1 * a0).norm(), 0.1);
}

TEST(Connection, ConstantGeneratorIsExactUpToRoundoff) {
  const ConnectionModel model = pauli_connection([](double) { return 0.0; },
                                                 [](double) { return 0.0; },
                                                 [](double) { return 0.5; });
  const Partition p(0.0, 2.0 * kPi, 7);
  const ComplexMatrix exact = expm_antihermitian(-model.evaluate(0.0) * 2.0 * kPi);
  EXPECT_LT((discrete_ordered_product(model, p) - exact).norm(), 1e-13);
  EXPECT_LT((reference_transport(model, p, 2) - exact).norm(), 1e-13);
}

TEST(Connection, ReferenceIsSelfConsistent) {
  const ConnectionModel model = benchmark_connection();
  const Partition p(0.0, 2.0 * kPi, 1280);
  const ComplexMatrix r16 = reference_transport(model, p, 16);
  const ComplexMatrix r32 = reference_transport(model, p, 32);
  EXPECT_LT((r16 - r32).norm(), 1e-9);
  EXPECT_LT(unitarity_residual(r16), 1e-11);
}

TEST(Connection, ReferenceSolvesTheTransportEquation) {
  // dU/dt = -A U at an interior point, by central differences on a fine grid.
  const ConnectionModel model = benchmark_connection();
  const double t = 1.3, h = 1e-4;
  auto u = [&](double end) { return reference_transport(model, Partition(0.0, end, 400), 4); };
  const ComplexMatrix du = (u(t + h) - u(t - h)) / (2.0 * h);
  EXPECT_LT((du + model.evaluate(t) * u(t)).norm(), 1e-6);
}

TEST(Connection, MidpointProductErrorLadder) {
  const std::vector<std::size_t> ladder = {10, 20, 40, 80, 160, 320, 640, 1280};
  const ConvergenceReport rep =
      connection_convergence_study(benchmark_connection(), 0.0, 2.0 * kPi, ladder);
  ASSERT_EQ(rep.errors.size(), ladder.size());
  EXPECT_NEAR(rep.errors.front(), 1.57e-2, 0.03 * 1.57e-2);
  EXPECT_NEAR(rep.errors.back(), 9.01e-7, 0.03 * 9.01e-7);
  EXPECT_NEAR(rep.fitted_order.value(), 2.0, 0.1);
  for (std::size_t i = 1; i < rep.errors.size(); ++i) EXPECT_LT(rep.errors[i], rep.errors[i - 1]);
}

TEST(Tangent, FrameExamples) {
  const ComplexMatrix f = tangent_frame(kPi / 2.0, 0.0);
  ComplexMatrix expected = ComplexMatrix::Zero(3, 2);
  expected(2, 0) = -1.0;
  expected(1, 1) = 1.0;
  EXPECT_LT((f - expected).norm(), 1e-15);
  EXPECT_LT((tangent_connection(kPi / 2.0)).norm(), 1e-15);
  EXPECT_LT((exact_tangent_holonomy(kPi / 2.0) - identity(2)).norm(), 1e-15);
}

TEST(Tangent, ConnectionMatchesFiniteDifferences) {
  const double theta0 = 0.7, h = 1e-6;
  for (double phi : {0.0, 1.0, 4.0}) {
    const ComplexMatrix df =
        (tangent_frame(theta0, phi + h) - tangent_frame(theta0, phi - h)) / (2.0 * h);
    EXPECT_LT((tangent_frame(theta0, phi).adjoint() * df - tangent_connection(theta0)).norm(), 1e-9);
  }
}

TEST(Tangent, ClosedFormEigenphases) {
  const auto phases = eigenphases(exact_tangent_holonomy(0.7));
  const double expected = 2.0 * kPi * std::cos(0.7) - 2.0 * kPi;
  EXPECT_NEAR(phases[0], -std::abs(expected), 1e-12);
  EXPECT_NEAR(phases[1], std::abs(expected), 1e-12);
  EXPECT_NEAR(phases[1], 1.47754, 1e-4);
}

TEST(Tangent, LoopClosesExactly) {
  const FramePath path = tangent_frame_loop(0.7, 10);
  EXPECT_EQ(path.frames().front().matrix(), path.frames().back().matrix());
  EXPECT_THROW(tangent_frame_loop(0.0, 10), DomainError);
  EXPECT_THROW(tangent_frame_loop(kPi, 10), DomainError);
  EXPECT_THROW(tangent_frame_loop(0.7, 2), DomainError);
}

TEST(Tangent, FrameErrorLadder) {
  const std::vector<std::size_t> ladder = {10, 20, 40, 80, 160, 320, 640, 1280};
  const ConvergenceReport rep = frame_convergence_study(
      [](std::size_t n) { return tangent_frame_loop(0.7, n); }, ladder,
      exact_tangent_holonomy(0.7), 2.0 * kPi);
  EXPECT_NEAR(rep.errors.front(), 9.32e-2, 0.03 * 9.32e-2);
  EXPECT_NEAR(rep.errors.back(), 5.66e-6, 0.03 * 5.66e-6);
  EXPECT_NEAR(rep.mu_min_per_partition.front(), 0.92074, 1e-5);
  EXPECT_NEAR(rep.fitted_order.value(), 2.0, 0.1);
}

TEST(Abelian, ReferencePhaseExamples) {
  EXPECT_EQ(abelian_reference_phase(0.0), 0.0);
  EXPECT_NEAR(std::abs(abelian_reference_phase(kPi / 2.0)), kPi, 1e-15);
  EXPECT_NEAR(abelian_reference_phase(kPi / 3.0), -kPi / 2.0, 1e-15);
  EXPECT_THROW(abelian_loop(kPi, 10), DomainError);
  EXPECT_THROW(abelian_loop(-0.1, 10), DomainError);
}

TEST(Abelian, ReferenceMatchesQuadrature) {
  // Berry phase as -i times the integral of <u|du/dphi>, trapezoid with
  // central differences.
  for (double theta0 : {0.3, 1.0, 2.2}) {
    auto state = [&](double phi) {
      ComplexMatrix u(2, 1);
      u << std::cos(theta0 / 2.0), std::polar(std::sin(theta0 / 2.0), phi);
      return u;
    };
    const int n = 2000;
    const double h = 1e-6;
    Complex integral = 0.0;
    for (int k = 0; k < n; ++k) {
      const double phi = 2.0 * kPi * k / n;
      const ComplexMatrix du = (state(phi + h) - state(phi - h)) / (2.0 * h);
      integral += (state(phi).adjoint() * du)(0, 0) * (2.0 * kPi / n);
    }
    const double quad = std::arg(std::exp(-integral));
    EXPECT_LT(detail::unit_circle_distance(quad, abelian_reference_phase(theta0)), 1e-8);
    const HolonomyEstimate est = estimate_holonomy(abelian_loop(theta0, 10000));
    EXPECT_LT(detail::unit_circle_distance(std::arg(est.base_frame_holonomy(0, 0)), quad), 1e-4);
  }
}

TEST(Abelian, NorthPoleIsTrivial) {
  const HolonomyEstimate est = estimate_holonomy(abelian_loop(0.0, 20));
  EXPECT_LT(std::abs(est.base_frame_holonomy(0, 0) - 1.0), 1e-15);
}

TEST(SmoothLoop, ClosedAndReproducible) {
  RngStream a(3), b(3);
  const FramePath pa = smooth_frame_loop(5, 2, 30, a);
  const FramePath pb = smooth_frame_loop(5, 2, 30, b);
  EXPECT_EQ(pa.closure_gap(), 0.0);
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k].matrix(), pb[k].matrix());
  EXPECT_THROW(smooth_frame_loop(2, 3, 30, a), DomainError);
}

TEST(TransferModel, RotationsProduceClosedLoop) {
  // T_k = exp(phi_k K) with K generating a closed SU(3) orbit.
  ComplexMatrix k = ComplexMatrix::Zero(3, 3);
  k(0, 1) = -1.0;
  k(1, 0) = 1.0;
  std::vector<ComplexMatrix> ts;
  for (int j = 0; j <= 24; ++j) ts.push_back(expm_antihermitian(k * (2.0 * kPi * j / 24.0)));
  const Frame input(ComplexMatrix::Identity(3, 1));
  const FramePath path = frames_from_transfer_model(ts, input);
  EXPECT_TRUE(path.closed_subspace());
  EXPECT_EQ(path.size(), 25u);
  // A real rotation in a plane: the holonomy of a real line bundle is +-1.
  const HolonomyEstimate est = estimate_holonomy(path);
  EXPECT_LT(std::abs(std::abs(est.base_frame_holonomy(0, 0)) - 1.0), 1e-12);
}

TEST(TransferModel, ReportsRankDeficientStep) {
  std::vector<ComplexMatrix> ts = {identity(3), identity(3), ComplexMatrix::Zero(3, 3)};
  const Frame input(ComplexMatrix::Identity(3, 1));
  try {
    frames_from_transfer_model(ts, input);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos);
  }
  std::vector<ComplexMatrix> wrong = {identity(2)};
  EXPECT_THROW(frames_from_transfer_model(wrong, input), DomainError);
}

TEST(TransferModel, OpenWhenProjectorDoesNotReturn) {
  ComplexMatrix swap = ComplexMatrix::Zero(3, 3);
  swap(0, 1) = swap(1, 0) = swap(2, 2) = 1.0;
  std::vector<ComplexMatrix> ts = {identity(3), 0.5 * identity(3) + 0.5 * swap, swap};
  const FramePath path = frames_from_transfer_model(ts, Frame(ComplexMatrix::Identity(3, 1)));
  EXPECT_FALSE(path.closed_subspace());
}

}  // namespace
}  // namespace holokit
