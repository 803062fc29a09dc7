#include "fedsim/engine.hpp"

#include "fedsim/diagnostics.hpp"
#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace fedsim {
namespace {

struct ClientSlot {
  std::size_t client_id = 0;
  bool participates = false;
  ClientUpdate update;
  std::optional<Vector> new_client_c;
};

void run_client(ClientSlot& slot, const ServerState& state, const AlgorithmState& alg_state,
                const AlgorithmDescriptor& algorithm, const ProblemSuite& suite,
                const RoundConfig& config, const LocalOptions& local, std::uint64_t seed,
                double fault_alpha_shift) {
  const std::size_t id = slot.client_id;
  const ClientObjective& client = suite.clients[id];
  Rng rng = make_stream(seed, StreamTag::kClient, state.round, id);
  if (std::holds_alternative<FedCM>(algorithm)) {
    if (fault_alpha_shift != 0.0) {
      RoundConfig faulty = config;
      faulty.alpha = std::clamp(config.alpha + fault_alpha_shift, 1e-6, 1.0);
      slot.update = client_update_fedcm(state.params, state.momentum, client, id, faulty, local, rng);
    } else {
      slot.update = client_update_fedcm(state.params, state.momentum, client, id, config, local, rng);
    }
  } else if (std::holds_alternative<Scaffold>(algorithm)) {
    auto result = client_update_scaffold(state.params, alg_state.server_c, alg_state.client_c[id],
                                         client, id, config, local, rng);
    slot.update = std::move(result.update);
    slot.new_client_c = std::move(result.new_client_c);
  } else {
    slot.update = client_update_fedavg(state.params, client, id, config, local, rng);
  }
}

}  // namespace

void evaluate_metrics(const ProblemSuite& suite, const Vector& x, RoundRecord& record) {
  record.global_loss = global_loss(suite, x);
  record.grad_norm = global_grad(suite, x).norm();
  if (suite.known && suite.known->f_star) {
    record.suboptimality = record.global_loss - *suite.known->f_star;
  }
  if (suite.test_set) record.test_accuracy = test_accuracy(suite, x);
  record.evaluated = true;
}

RoundResult run_round(const ServerState& state, AlgorithmState& algorithm_state,
                      const AlgorithmDescriptor& algorithm, const ProblemSuite& suite,
                      const RoundConfig& config, const ParticipationScheme& scheme,
                      std::uint64_t seed, const RoundOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t t = state.round;
  const std::size_t n = suite.n_clients();
  require_dim(state.params, suite.dim, "run_round params");

  std::vector<std::size_t> participants = sample_participants(scheme, n, t, seed);

  std::vector<ClientSlot> slots;
  if (options.audit_all_clients) {
    slots.resize(n);
    for (std::size_t i = 0; i < n; ++i) slots[i].client_id = i;
    for (std::size_t id : participants) slots[id].participates = true;
  } else {
    slots.resize(participants.size());
    for (std::size_t j = 0; j < participants.size(); ++j) {
      slots[j].client_id = participants[j];
      slots[j].participates = true;
    }
  }

  const LocalOptions local{config.local_lr_at(t), options.audit};
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(options.threads, 1u), slots.size()));

  std::exception_ptr failure;
  std::size_t failed_client = 0;
  std::mutex failure_mutex;
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t j = begin; j < slots.size(); j += stride) {
      try {
        run_client(slots[j], state, algorithm_state, algorithm, suite, config, local, seed,
                   options.fault_alpha_shift);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure || slots[j].client_id < failed_client) {
          failure = std::current_exception();
          failed_client = slots[j].client_id;
        }
      }
    }
  };
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNanDetected) {
        throw NanError(t, "client " + std::to_string(failed_client));
      }
      throw;
    }
  }

  RoundRecord record;
  record.round = t;
  record.participants = participants;

  // Drift over every client that ran locally this round.
  double drift_total = 0.0;
  for (const auto& slot : slots) drift_total += slot.update.drift_sum;
  record.drift = drift_total / static_cast<double>(slots.size() * config.local_steps);

  std::vector<ClientUpdate> updates;
  updates.reserve(participants.size());
  for (auto& slot : slots) {
    if (slot.participates) updates.push_back(slot.update);
  }

  const Vector delta_next = aggregate_updates(updates, local.local_lr, config.local_steps);
  const double eta_g = config.global_lr_at(t);

  RoundResult result;
  if (const auto* adam = std::get_if<FedAdam>(&algorithm)) {
    FedAdamStep step =
        server_update_fedadam(algorithm_state.adam_m, algorithm_state.adam_v, delta_next, eta_g, *adam);
    result.next.round = t + 1;
    result.next.params = state.params - step.step;
    result.next.momentum = delta_next;
    result.next.prev_params = state.params;
    algorithm_state.adam_m = std::move(step.m);
    algorithm_state.adam_v = std::move(step.v);
  } else {
    result.next = server_step(state, delta_next, eta_g);
  }

  if (std::holds_alternative<Scaffold>(algorithm)) {
    Vector correction = Vector::Zero(suite.dim);
    for (auto& slot : slots) {
      if (!slot.participates) continue;
      correction += *slot.new_client_c - algorithm_state.client_c[slot.client_id];
      algorithm_state.client_c[slot.client_id] = std::move(*slot.new_client_c);
    }
    algorithm_state.server_c += correction / static_cast<double>(n);
  }

  if (!all_finite(result.next.params)) throw NanError(t, "server iterate");

  record.delta_norm = delta_next.norm();

  const bool momentum_family =
      std::holds_alternative<FedAvg>(algorithm) || std::holds_alternative<FedCM>(algorithm);
  if (options.audit && momentum_family) {
    const double alpha = std::holds_alternative<FedCM>(algorithm) ? config.alpha : 1.0;
    const Vector delta_tilde = compute_delta_tilde(updates);
    record.ema_residual = check_lemma1(delta_next, delta_tilde, state.momentum, alpha);
    const Vector z_curr = z_sequence(state.params, state.prev_params, alpha, t);
    const Vector z_next = z_sequence(result.next.params, result.next.prev_params, alpha, t + 1);
    record.z_residual = check_z_update(z_next, z_curr, eta_g, delta_tilde);
    record.z_norm = z_curr.norm();
  }

  if (options.evaluate) evaluate_metrics(suite, result.next.params, record);

  record.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  result.record = std::move(record);
  return result;
}

}  // namespace fedsim
