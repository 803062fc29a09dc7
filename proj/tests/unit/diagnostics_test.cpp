#include "fedsim/diagnostics.hpp"
#include "fedsim/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace fedsim {
namespace {

using testing::vec;

ClientUpdate logged(std::size_t id, std::vector<Vector> grads, std::vector<Vector> iterates = {}) {
  ClientUpdate u;
  u.client_id = id;
  u.displacement = Vector::Zero(grads.front().size());
  u.step_grads = std::move(grads);
  if (!iterates.empty()) u.iterates = std::move(iterates);
  return u;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(DeltaTilde, SingleClientSingleStep) {
  const std::vector<ClientUpdate> ups = {logged(0, {vec({1.5, -2.0})})};
  EXPECT_EQ(compute_delta_tilde(ups), vec({1.5, -2.0}));
}

TEST(DeltaTilde, OpposingClientsCancel) {
  const Vector u = vec({0.7, 0.1});
  const std::vector<ClientUpdate> ups = {logged(0, {u, u}), logged(1, {-u, -u})};
  EXPECT_EQ(compute_delta_tilde(ups), Vector::Zero(2));
}

TEST(DeltaTilde, MeanOfFourScalars) {
  const std::vector<ClientUpdate> ups = {logged(0, {vec({1.0}), vec({3.0})}), logged(1, {vec({5.0}), vec({7.0})})};
  EXPECT_EQ(compute_delta_tilde(ups)[0], 4.0);
}

TEST(DeltaTilde, MissingLogIsAnError) {
  ClientUpdate bare;
  bare.displacement = Vector::Zero(1);
  const std::vector<ClientUpdate> ups = {bare};
  EXPECT_EQ(code_of([&] { compute_delta_tilde(ups); }), ErrorCode::kMissingAuditLog);
}

TEST(MomentumIdentityCheck, AlphaOneExactMatch) {
  const Vector d = vec({0.2, -0.4});
  EXPECT_EQ(check_lemma1(d, d, vec({9.0, 9.0}), 1.0), 0.0);
}

TEST(MomentumIdentityCheck, DetectsSmallCorruption) {
  const Vector tilde = vec({0.5, 1.0});
  const Vector prev = vec({-1.0, 2.0});
  const double alpha = 0.3;
  Vector next = alpha * tilde + (1 - alpha) * prev;
  EXPECT_LE(check_lemma1(next, tilde, prev, alpha), 1e-15);
  next[1] += 1e-3;
  EXPECT_GE(check_lemma1(next, tilde, prev, alpha), 9e-4);
}

TEST(MomentumIdentityCheck, DimensionMismatch) {
  EXPECT_EQ(code_of([] { check_lemma1(vec({1.0}), vec({1.0, 2.0}), vec({1.0}), 0.5); }),
            ErrorCode::kDimensionMismatch);
}

TEST(ZSequence, AlphaOneIsTheIterate) {
  EXPECT_EQ(z_sequence(vec({3.0}), vec({1.0}), 1.0, 4), vec({3.0}));
}

TEST(ZSequence, StationaryIterate) {
  EXPECT_EQ(z_sequence(vec({3.0, 1.0}), vec({3.0, 1.0}), 0.2, 4), vec({3.0, 1.0}));
}

TEST(ZSequence, HandArithmetic) {
  EXPECT_EQ(z_sequence(vec({1.0}), vec({0.0}), 0.5, 1)[0], 2.0);
}

TEST(ZSequence, RoundZeroConventionAndMissingPrevious) {
  EXPECT_EQ(z_sequence(vec({1.0, 2.0}), std::nullopt, 0.1, 0), vec({1.0, 2.0}));
  EXPECT_EQ(code_of([] { z_sequence(vec({1.0}), std::nullopt, 0.1, 3); }), ErrorCode::kMissingPrev);
  EXPECT_EQ(code_of([] { z_sequence(vec({1.0}), vec({0.0}), 0.0, 3); }), ErrorCode::kInvalidArgument);
}

TEST(ZUpdateCheck, ZeroDeltaTildeMeasuresTheMove) {
  EXPECT_EQ(check_z_update(vec({1.0, 2.0}), vec({1.0, 2.0}), 0.5, Vector::Zero(2)), 0.0);
  EXPECT_EQ(check_z_update(vec({1.5, 2.0}), vec({1.0, 2.0}), 0.5, Vector::Zero(2)), 0.5);
}

TEST(ZUpdateCheck, AlphaOneCollapsesToTheServerStep) {
  // With α = 1, z = x and the check is x_{t+1} = x_t − η_g Δ̃_t.
  const Vector x = vec({1.0, -1.0});
  const Vector tilde = vec({0.25, 0.5});
  const double eta = 0.4;
  const Vector next = x - eta * tilde;
  EXPECT_LE(check_z_update(z_sequence(next, x, 1.0, 1), z_sequence(x, std::nullopt, 1.0, 0), eta, tilde), 1e-15);
}

TEST(ClientDrift, SingleStepFromTheSynchronizedPointIsZero) {
  const Vector x = vec({0.3, 0.3});
  const std::vector<ClientUpdate> ups = {logged(0, {vec({1.0, 1.0})}, {x}), logged(4, {vec({2.0, 0.0})}, {x})};
  const DriftRecord r = client_drift(ups, x, 7);
  EXPECT_EQ(r.epsilon, 0.0);
  EXPECT_EQ(r.round, 7u);
}

TEST(ClientDrift, HandAverage) {
  const Vector x = vec({0.0});
  const std::vector<ClientUpdate> ups = {logged(0, {vec({1.0}), vec({1.0})}, {vec({0.0}), vec({0.2})})};
  const DriftRecord r = client_drift(ups, x, 0);
  EXPECT_NEAR(r.epsilon, 0.02, 1e-17);
  ASSERT_EQ(r.per_step.size(), 2u);
  EXPECT_NEAR(r.per_step[1], 0.04, 1e-17);
}

TEST(ClientDrift, MissingTrajectory) {
  const std::vector<ClientUpdate> ups = {logged(0, {vec({1.0})})};
  EXPECT_EQ(code_of([&] { client_drift(ups, vec({0.0}), 0); }), ErrorCode::kMissingAuditLog);
}

TEST(WeightedAverage, SingleIterate) {
  const std::vector<Vector> z = {vec({4.0, -1.0})};
  EXPECT_EQ(weighted_average_iterate(z, 0.5, 0.3), z[0]);
}

TEST(WeightedAverage, ConstantSequence) {
  const std::vector<Vector> z(9, vec({2.5, -3.0}));
  EXPECT_LT((weighted_average_iterate(z, 0.1, 1.0) - z[0]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(WeightedAverage, TwoTermsWithHalfContraction) {
  // μη_g/2 = 0.5: raw weights 2 and 4.
  const auto w = geometric_weights(2, 1.0, 1.0);
  EXPECT_NEAR(w[0], 1.0 / 3.0, 1e-16);
  EXPECT_NEAR(w[1], 2.0 / 3.0, 1e-16);
  const std::vector<Vector> z = {vec({0.0}), vec({3.0})};
  EXPECT_NEAR(weighted_average_iterate(z, 1.0, 1.0)[0], 2.0, 1e-15);
}

TEST(WeightedAverage, LongHorizonsStayFinite) {
  const auto w = geometric_weights(200000, 1.8, 1.0);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(code_of([] { geometric_weights(3, 2.0, 1.0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { geometric_weights(3, 0.0, 1.0); }), ErrorCode::kInvalidArgument);
}

TEST(TheoremConstants, ZeroNoiseAndBoundsVanish) {
  const TheoremConstants c = assemble_constants(0.0, 0.0, 0.0, 5, 3.0, 10, 0.4, 1.0, 1.0);
  EXPECT_EQ(c.C1, 0.0);
  EXPECT_EQ(c.C2, 0.0);
}

TEST(TheoremConstants, FullParticipationDropsHeterogeneityTerm) {
  const TheoremConstants c = assemble_constants(0.5, 7.0, 2.0, 4, 10.0, 10, 1.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(c.C1, 0.25 + 4.0 * 10.0 * 4.0);
}

TEST(TheoremConstants, TwoClientSuiteAgainstDirectArithmetic) {
  const ProblemSuite suite = testing::two_client_line();
  RoundConfig cfg;
  cfg.local_steps = 2;
  cfg.alpha = 0.25;
  const TheoremConstants c = theorem_constants(suite, cfg, 1.0, vec({0.0}), 3.0);
  // ∇f(x) = x, so max ||∇f|| over |x| <= 3 is 3.
  double g_max = 0.0;
  for (int i = -300; i <= 300; ++i) g_max = std::max(g_max, std::abs(global_grad(suite, vec({i / 100.0}))[0]));
  EXPECT_DOUBLE_EQ(c.G, g_max);
  EXPECT_DOUBLE_EQ(c.sigma_g, 1.0);
  EXPECT_DOUBLE_EQ(c.sigma_l, 0.0);
  const double K = 2, S = 1, N = 2, sg = 1.0, G = 3.0;
  EXPECT_DOUBLE_EQ(c.C1, 0.0 + K * (1 - S / N) * sg * sg + K * S * G * G);
  EXPECT_DOUBLE_EQ(c.C2, 0.25 * (0.0 / K + sg * sg + G * G));
  EXPECT_EQ(c.D, 0.0);
  EXPECT_EQ(c.F, 0.0);
}

TEST(TheoremConstants, DistanceAndGapFromTheStartingPoint) {
  const ProblemSuite suite = testing::two_client_line();
  const TheoremConstants c = theorem_constants(suite, RoundConfig{}, 2.0, vec({2.0}));
  EXPECT_DOUBLE_EQ(c.D, 4.0);
  EXPECT_DOUBLE_EQ(c.F, global_loss(suite, vec({2.0})) - *suite.known->f_star);
  EXPECT_DOUBLE_EQ(c.box_radius, 2.0);
}

TEST(TheoremConstants, SigmaGBoundsMeasuredHeterogeneityInsideTheBall) {
  Rng rng(3);
  QuadraticSuiteOptions opt;
  opt.per_client_spectrum = true;
  const ProblemSuite suite = gen_quadratic_suite(10, 4, 0.1, 1.0, 1.0, 0.2, rng, opt);
  const Vector x0 = Vector::Zero(4);
  const TheoremConstants c = theorem_constants(suite, RoundConfig{}, 10.0, x0);
  Rng probe(4);
  for (int k = 0; k < 200; ++k) {
    Vector dir = testing::random_vector(4, probe);
    dir *= c.box_radius * std::uniform_real_distribution<double>(0.0, 1.0)(probe) / dir.norm();
    const Vector x = *suite.known->x_star + dir;
    EXPECT_LE(std::sqrt(measure_heterogeneity(suite, x)), c.sigma_g * (1 + 1e-12));
    EXPECT_LE(global_grad(suite, x).norm(), c.G * (1 + 1e-12));
  }
}

TEST(TheoremConstants, UnknownForClassificationSuites) {
  Rng rng(1);
  LogRegSuiteOptions opt;
  opt.total_samples = 40;
  const ProblemSuite suite = gen_logreg_suite(2, opt, rng);
  EXPECT_EQ(code_of([&] { theorem_constants(suite, RoundConfig{}, 1.0, Vector::Zero(suite.dim)); }),
            ErrorCode::kUnknownConstants);
}

}  // namespace
}  // namespace fedsim
