// Randomized property checks. Each property draws its cases from a seeded
// generator, so failures reproduce exactly and report the case index.

#include "fedsim/diagnostics.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/error.hpp"
#include "fedsim/format.hpp"
#include "fedsim/partition.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace fedsim {
namespace {

struct Gen {
  Rng rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double log_real(double lo, double hi) { return std::exp(real(std::log(lo), std::log(hi))); }
  Vector vector(Eigen::Index dim, double scale = 1.0) { return testing::random_vector(dim, rng, scale); }

  ParticipationScheme scheme(std::size_t n) {
    if (size(0, 1) == 0) return FixedUniform{size(1, n)};
    return Bernoulli{real(0.05, 1.0)};
  }

  ProblemSuite quadratic_suite(std::size_t n, Eigen::Index dim) {
    QuadraticSuiteOptions opt;
    opt.per_client_spectrum = size(0, 1) == 1;
    opt.b_scale = real(0.5, 5.0);
    const double mu = real(0.05, 0.5);
    return gen_quadratic_suite(n, dim, mu, mu * real(1.0, 20.0), real(0.0, 2.0), real(0.0, 1.0), rng, opt);
  }
};

constexpr int kCases = 40;

TEST(Property, AggregationIsLinear) {
  Gen gen(1);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = gen.size(1, 12);
    const Eigen::Index d = static_cast<Eigen::Index>(gen.size(1, 8));
    const double scale = gen.real(-5.0, 5.0);
    const double lr = gen.log_real(1e-3, 1.0);
    const int k = static_cast<int>(gen.size(1, 10));
    std::vector<ClientUpdate> ups(n);
    std::vector<ClientUpdate> scaled(n);
    for (std::size_t i = 0; i < n; ++i) {
      ups[i].client_id = i;
      ups[i].displacement = gen.vector(d);
      scaled[i] = ups[i];
      scaled[i].displacement *= scale;
    }
    const Vector lhs = aggregate_updates(scaled, lr, k);
    const Vector rhs = scale * aggregate_updates(ups, lr, k);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + rhs.cwiseAbs().maxCoeff())) << "case " << c;
    const Vector before = aggregate_updates(ups, lr, k);
    std::shuffle(ups.begin(), ups.end(), gen.rng);
    EXPECT_EQ(aggregate_updates(ups, lr, k), before) << "case " << c;
  }
}

TEST(Property, ServerStepStoresTheMomentum) {
  Gen gen(2);
  for (int c = 0; c < kCases; ++c) {
    const Eigen::Index d = static_cast<Eigen::Index>(gen.size(1, 10));
    const ServerState s = ServerState::initial(gen.vector(d));
    const Vector delta = gen.vector(d);
    const ServerState next = server_step(s, delta, gen.real(0.01, 2.0));
    EXPECT_EQ(next.momentum, delta);
    EXPECT_EQ(next.dim(), d);
  }
}

TEST(Property, SamplerContracts) {
  Gen gen(3);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t n = gen.size(1, 60);
    const ParticipationScheme scheme = gen.scheme(n);
    const std::uint64_t seed = gen.size(0, 1000);
    for (std::size_t t = 0; t < 5; ++t) {
      const auto ids = sample_participants(scheme, n, t, seed);
      EXPECT_FALSE(ids.empty());
      EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
      EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
      EXPECT_LT(ids.back(), n);
      if (const auto* f = std::get_if<FixedUniform>(&scheme)) EXPECT_EQ(ids.size(), f->clients);
      EXPECT_EQ(ids, sample_participants(scheme, n, t, seed));
    }
  }
}

TEST(Property, LargestRemainderKeepsTheTotal) {
  Gen gen(4);
  for (int c = 0; c < 200; ++c) {
    const std::size_t k = gen.size(1, 12);
    std::vector<double> p(k);
    for (auto& v : p) v = gen.real(0.0, 1.0);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= sum;
    const std::size_t total = gen.size(0, 1000);
    const auto counts = largest_remainder(p, total);
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), total);
    for (std::size_t j = 0; j < k; ++j) EXPECT_LT(std::abs(static_cast<double>(counts[j]) - p[j] * total), 1.0 + 1e-9);
  }
}

TEST(Property, PartitionIsBalancedDisjointAndDeterministic) {
  Gen gen(5);
  for (int c = 0; c < kCases; ++c) {
    const std::size_t classes = gen.size(1, 10);
    const std::size_t total = gen.size(20, 3000);
    std::vector<int> labels(total);
    for (auto& l : labels) l = static_cast<int>(gen.size(0, classes - 1));
    const std::size_t n = gen.size(1, std::min<std::size_t>(50, total));
    PartitionSpec spec;
    spec.n_clients = n;
    if (gen.size(0, 2) == 0) {
      spec.scheme = IidSplit{};
    } else {
      spec.scheme = DirichletSplit{gen.log_real(0.05, 100.0)};
    }
    const std::uint64_t seed = gen.size(0, 1u << 20);
    Rng r1(seed);
    Rng r2(seed);
    const Assignment a = partition(labels, spec, r1);
    const Assignment b = partition(labels, spec, r2);
    EXPECT_EQ(a.client_of, b.client_of) << "case " << c;
    EXPECT_EQ(a.quota, total / n);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(a.members[i].size(), a.quota) << "case " << c;
      for (auto s : a.members[i]) {
        EXPECT_TRUE(seen.insert(s).second) << "duplicate sample " << s;
        EXPECT_EQ(a.client_of[s], static_cast<std::int64_t>(i));
      }
    }
    EXPECT_EQ(seen.size(), n * a.quota);
    EXPECT_NO_THROW(partition_stats(a, labels));
  }
}

TEST(Property, HeterogeneityFallsWithConcentration) {
  std::vector<int> labels(10000);
  for (std::size_t s = 0; s < labels.size(); ++s) labels[s] = static_cast<int>(s % 10);
  double previous = std::numeric_limits<double>::infinity();
  for (double conc : {0.1, 0.6, 10.0, 1000.0}) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      sum += partition_stats(partition(labels, {DirichletSplit{conc}, 20}, rng), labels).mean_tv;
    }
    EXPECT_LE(sum / 20.0, previous) << "concentration " << conc;
    previous = sum / 20.0;
  }
}

TEST(Property, GeometricWeightsSumToOne) {
  Gen gen(6);
  for (int c = 0; c < 200; ++c) {
    const std::size_t t = gen.size(1, 5000);
    const double half = gen.real(1e-6, 0.999);
    const auto w = geometric_weights(t, 2.0 * half, 1.0);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    EXPECT_TRUE(std::is_sorted(w.begin(), w.end()));
  }
}

TEST(Property, AuditedFedCMRoundsSatisfyLemmaOneAndTheZUpdate) {
  Gen gen(7);
  for (int c = 0; c < 12; ++c) {
    const std::size_t n = gen.size(1, 30);
    const ProblemSuite suite = gen.quadratic_suite(n, static_cast<Eigen::Index>(gen.size(1, 6)));
    RoundConfig cfg;
    cfg.alpha = gen.real(0.01, 1.0);
    cfg.local_steps = static_cast<int>(gen.size(1, 8));
    cfg.local_lr = gen.real(0.01, 0.2);
    cfg.scale_global_lr = gen.size(0, 1) == 1;
    const ParticipationScheme scheme = gen.scheme(n);
    RoundOptions audit;
    audit.audit = true;
    ServerState s = ServerState::initial(Vector::Zero(suite.dim));
    AlgorithmState as;
    for (int t = 0; t < 25; ++t) {
      RoundResult r = run_round(s, as, FedCM{}, suite, cfg, scheme, 3, audit);
      EXPECT_LE(*r.record.ema_residual, 1e-10 * (1.0 + r.record.delta_norm)) << "case " << c << " round " << t;
      EXPECT_LE(*r.record.z_residual, 1e-9 * (1.0 + r.record.z_norm)) << "case " << c << " round " << t;
      s = std::move(r.next);
    }
  }
}

TEST(Property, FedCMAtAlphaOneTracksFedAvgForAHundredRounds) {
  Gen gen(8);
  for (int c = 0; c < 6; ++c) {
    const std::size_t n = gen.size(1, 20);
    const ProblemSuite suite = gen.quadratic_suite(n, static_cast<Eigen::Index>(gen.size(1, 5)));
    RoundConfig cfg;
    cfg.local_steps = static_cast<int>(gen.size(1, 5));
    cfg.local_lr = gen.real(0.01, 0.1);
    const ParticipationScheme scheme = gen.scheme(n);
    ServerState a = ServerState::initial(Vector::Zero(suite.dim));
    ServerState b = a;
    AlgorithmState sa;
    AlgorithmState sb;
    RoundOptions quiet;
    quiet.evaluate = false;
    for (int t = 0; t < 100; ++t) {
      a = run_round(a, sa, FedAvg{}, suite, cfg, scheme, 5, quiet).next;
      b = run_round(b, sb, FedCM{}, suite, cfg, scheme, 5, quiet).next;
    }
    EXPECT_EQ(a.params, b.params) << "case " << c;
  }
}

TEST(Property, EveryAlgorithmKeepsStateFiniteAndShaped) {
  Gen gen(9);
  const std::vector<AlgorithmDescriptor> algorithms = {FedAvg{}, FedCM{}, FedAdam{}, Scaffold{}};
  for (int c = 0; c < 8; ++c) {
    const std::size_t n = gen.size(2, 20);
    const ProblemSuite suite = gen.quadratic_suite(n, static_cast<Eigen::Index>(gen.size(1, 6)));
    RoundConfig cfg;
    cfg.alpha = gen.real(0.05, 1.0);
    cfg.local_steps = static_cast<int>(gen.size(1, 5));
    cfg.local_lr = gen.real(0.01, 0.1);
    cfg.global_lr = 0.1;
    for (const auto& alg : algorithms) {
      ServerState s = ServerState::initial(Vector::Zero(suite.dim));
      AlgorithmState as = AlgorithmState::initial(alg, n, suite.dim);
      for (int t = 0; t < 30; ++t) {
        RoundResult r = run_round(s, as, alg, suite, cfg, gen.scheme(n), 11);
        ASSERT_EQ(r.next.dim(), suite.dim);
        ASSERT_TRUE(all_finite(r.next.params) && all_finite(r.next.momentum));
        ASSERT_TRUE(std::isfinite(r.record.global_loss));
        ASSERT_FALSE(r.record.participants.empty());
        s = std::move(r.next);
      }
    }
  }
}

TEST(Property, RealsRoundTripThroughText) {
  Gen gen(10);
  for (int c = 0; c < 2000; ++c) {
    const double v = std::ldexp(gen.real(-1.0, 1.0), static_cast<int>(gen.size(0, 200)) - 100);
    EXPECT_EQ(parse_real(format_real(v), "v"), v);
  }
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_THROW(parse_real("1.0x", "v"), Error);
}

TEST(Property, DerivedStreamsAreDistinct) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t a = 0; a < 30; ++a) {
    for (std::uint64_t b = 0; b < 30; ++b) {
      seeds.insert(derive_seed(1, StreamTag::kClient, a, b));
      seeds.insert(derive_seed(1, StreamTag::kParticipation, a, b));
    }
  }
  EXPECT_EQ(seeds.size(), 2u * 30u * 30u);
}

}  // namespace
}  // namespace fedsim
