#include "fedsim/engine.hpp"
#include "fedsim/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

namespace fedsim {
namespace {

ProblemSuite hetero_suite(std::size_t n, double noise, std::uint64_t seed = 1) {
  Rng rng(seed);
  QuadraticSuiteOptions opt;
  opt.per_client_spectrum = true;
  return gen_quadratic_suite(n, 5, 0.1, 1.0, 1.0, noise, rng, opt);
}

RoundConfig round_config(int k, double alpha) {
  RoundConfig c;
  c.local_steps = k;
  c.local_lr = 0.1;
  c.alpha = alpha;
  c.scale_global_lr = true;
  return c;
}

TEST(RunRound, RecordedParticipantsMatchTheSampler) {
  const ProblemSuite suite = hetero_suite(30, 0.1);
  ServerState s = ServerState::initial(Vector::Zero(5));
  AlgorithmState as;
  const ParticipationScheme scheme = Bernoulli{0.2};
  for (std::size_t t = 0; t < 5; ++t) {
    RoundResult r = run_round(s, as, FedAvg{}, suite, round_config(2, 1.0), scheme, 99);
    EXPECT_EQ(r.record.participants, sample_participants(scheme, 30, t, 99));
    EXPECT_EQ(r.record.round, t);
    EXPECT_EQ(r.next.round, t + 1);
    s = std::move(r.next);
  }
}

TEST(RunRound, SingleClientMatchesGradientDescent) {
  Rng rng(2);
  const ProblemSuite suite = gen_quadratic_suite(1, 4, 0.5, 2.0, 0.0, 0.0, rng);
  RoundConfig cfg = round_config(1, 1.0);
  cfg.local_lr = 0.3;
  ServerState s = ServerState::initial(Vector::Constant(4, 1.0));
  Vector oracle = s.params;
  AlgorithmState as;
  for (int t = 0; t < 20; ++t) {
    s = run_round(s, as, FedAvg{}, suite, cfg, FixedUniform{1}, 5).next;
    oracle -= 0.3 * global_grad(suite, oracle);
    EXPECT_LT((s.params - oracle).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(RunRound, FedCMWithAlphaOneIsFedAvg) {
  const ProblemSuite suite = hetero_suite(10, 0.3);
  ServerState a = ServerState::initial(Vector::Zero(5));
  ServerState b = a;
  AlgorithmState sa;
  AlgorithmState sb;
  for (int t = 0; t < 30; ++t) {
    a = run_round(a, sa, FedAvg{}, suite, round_config(3, 1.0), Bernoulli{0.3}, 4).next;
    b = run_round(b, sb, FedCM{}, suite, round_config(3, 1.0), Bernoulli{0.3}, 4).next;
    ASSERT_EQ(a.params, b.params) << "round " << t;
  }
}

TEST(RunRound, ThreadCountDoesNotChangeResults) {
  const ProblemSuite suite = hetero_suite(40, 0.5);
  for (const AlgorithmDescriptor& alg : {AlgorithmDescriptor{FedCM{}}, AlgorithmDescriptor{Scaffold{}}}) {
    ServerState a = ServerState::initial(Vector::Zero(5));
    ServerState b = a;
    AlgorithmState sa = AlgorithmState::initial(alg, 40, 5);
    AlgorithmState sb = sa;
    RoundOptions serial;
    serial.audit = true;
    RoundOptions parallel = serial;
    parallel.threads = 4;
    for (int t = 0; t < 10; ++t) {
      RoundResult ra = run_round(a, sa, alg, suite, round_config(4, 0.2), FixedUniform{12}, 8, serial);
      RoundResult rb = run_round(b, sb, alg, suite, round_config(4, 0.2), FixedUniform{12}, 8, parallel);
      ASSERT_EQ(ra.next.params, rb.next.params);
      ASSERT_EQ(ra.record.global_loss, rb.record.global_loss);
      ASSERT_EQ(ra.record.drift, rb.record.drift);
      a = std::move(ra.next);
      b = std::move(rb.next);
    }
  }
}

TEST(RunRound, MeasuringAllClientsLeavesTheTrajectoryAlone) {
  const ProblemSuite suite = hetero_suite(20, 0.5);
  ServerState a = ServerState::initial(Vector::Zero(5));
  ServerState b = a;
  AlgorithmState sa;
  AlgorithmState sb;
  RoundOptions all;
  all.audit_all_clients = true;
  bool drift_differs = false;
  for (int t = 0; t < 10; ++t) {
    RoundResult ra = run_round(a, sa, FedCM{}, suite, round_config(3, 0.3), FixedUniform{4}, 2);
    RoundResult rb = run_round(b, sb, FedCM{}, suite, round_config(3, 0.3), FixedUniform{4}, 2, all);
    ASSERT_EQ(ra.next.params, rb.next.params);
    drift_differs = drift_differs || ra.record.drift != rb.record.drift;
    a = std::move(ra.next);
    b = std::move(rb.next);
  }
  EXPECT_TRUE(drift_differs);
}

TEST(RunRound, AuditedRoundsSatisfyTheMomentumIdentities) {
  const ProblemSuite suite = hetero_suite(20, 0.5);
  ServerState s = ServerState::initial(Vector::Zero(5));
  AlgorithmState as;
  RoundOptions audit;
  audit.audit = true;
  for (int t = 0; t < 40; ++t) {
    RoundResult r = run_round(s, as, FedCM{}, suite, round_config(5, 0.1), FixedUniform{3}, 6, audit);
    ASSERT_TRUE(r.record.ema_residual && r.record.z_residual);
    EXPECT_LE(*r.record.ema_residual, 1e-10 * (1.0 + r.record.delta_norm));
    EXPECT_LE(*r.record.z_residual, 1e-9 * (1.0 + r.record.z_norm));
    s = std::move(r.next);
  }
}

TEST(RunRound, DriftIsZeroForOneStepAndPositiveForMore) {
  const ProblemSuite suite = hetero_suite(10, 0.0);
  AlgorithmState as;
  const ServerState s = ServerState::initial(Vector::Zero(5));
  EXPECT_EQ(run_round(s, as, FedAvg{}, suite, round_config(1, 1.0), FixedUniform{10}, 1).record.drift, 0.0);
  EXPECT_GT(run_round(s, as, FedAvg{}, suite, round_config(2, 1.0), FixedUniform{10}, 1).record.drift, 0.0);
}

TEST(RunRound, DivergenceRaisesNanErrorWithTheRound) {
  const ProblemSuite suite = hetero_suite(5, 0.0);
  RoundConfig cfg = round_config(10, 1.0);
  cfg.local_lr = 5.0;
  cfg.scale_global_lr = false;
  ServerState s = ServerState::initial(Vector::Zero(5));
  AlgorithmState as;
  std::size_t t = 0;
  try {
    for (; t < 1000; ++t) s = run_round(s, as, FedAvg{}, suite, cfg, FixedUniform{5}, 1).next;
    FAIL() << "did not diverge";
  } catch (const NanError& e) {
    EXPECT_EQ(e.round(), t);
    EXPECT_EQ(e.code(), ErrorCode::kNanDetected);
  }
}

TEST(RunRound, FedAdamMovesAgainstThePseudoGradient) {
  const ProblemSuite suite = hetero_suite(10, 0.0);
  const AlgorithmDescriptor alg = FedAdam{};
  AlgorithmState as = AlgorithmState::initial(alg, 10, 5);
  RoundConfig cfg = round_config(2, 1.0);
  cfg.scale_global_lr = false;
  cfg.global_lr = 0.05;
  ServerState s = ServerState::initial(Vector::Zero(5));
  const double before = global_loss(suite, s.params);
  for (int t = 0; t < 50; ++t) s = run_round(s, as, alg, suite, cfg, FixedUniform{10}, 1).next;
  EXPECT_LT(global_loss(suite, s.params), before);
  EXPECT_NE(as.adam_v, Vector::Zero(5));
}

}  // namespace
}  // namespace fedsim
