#include "fedsim/engine.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/problems.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace fedsim;

// One FedCM round on the standard heterogeneous suite; range(0) is the thread count.
void BM_FedCMRound(benchmark::State& state) {
  ExperimentConfig c = standard_heterogeneous_config();
  c.participation.p = 0.5;
  const ProblemSuite suite = build_suite(c);
  const ParticipationScheme scheme = make_scheme(c.participation, suite.n_clients());
  RoundOptions options;
  options.threads = static_cast<unsigned>(state.range(0));
  ServerState s = ServerState::initial(initial_point(suite));
  AlgorithmState as;
  for (auto _ : state) {
    RoundResult r = run_round(s, as, FedCM{}, suite, c.round, scheme, 1, options);
    s = std::move(r.next);
    benchmark::DoNotOptimize(s.params.data());
  }
}
BENCHMARK(BM_FedCMRound)->Arg(1)->Arg(4);

void BM_AuditedRound(benchmark::State& state) {
  ExperimentConfig c = standard_heterogeneous_config();
  const ProblemSuite suite = build_suite(c);
  const ParticipationScheme scheme = make_scheme(c.participation, suite.n_clients());
  RoundOptions options;
  options.audit = true;
  ServerState s = ServerState::initial(initial_point(suite));
  AlgorithmState as;
  for (auto _ : state) {
    RoundResult r = run_round(s, as, FedCM{}, suite, c.round, scheme, 1, options);
    s = std::move(r.next);
    benchmark::DoNotOptimize(r.record.ema_residual);
  }
}
BENCHMARK(BM_AuditedRound);

void BM_DirichletPartition(benchmark::State& state) {
  std::vector<int> labels(50000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed++);
    benchmark::DoNotOptimize(partition(labels, {DirichletSplit{0.6}, 100}, rng).quota);
  }
}
BENCHMARK(BM_DirichletPartition);

void BM_LogRegGradient(benchmark::State& state) {
  LogRegSuiteOptions options;
  options.total_samples = static_cast<std::size_t>(state.range(0));
  options.num_classes = 10;
  options.n_features = 32;
  Rng rng(3);
  const ProblemSuite suite = gen_logreg_suite(1, options, rng);
  const Vector x = Vector::Constant(suite.dim, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(client_grad(suite.clients[0], x).data());
}
BENCHMARK(BM_LogRegGradient)->Arg(500)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
