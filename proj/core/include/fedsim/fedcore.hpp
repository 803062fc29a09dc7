#pragma once

#include "fedsim/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace fedsim {

/// Server-side state between rounds: x_t, the momentum Δ_t broadcast to
/// clients, and x_{t-1} (needed for the auxiliary z-sequence).
struct ServerState {
  std::size_t round = 0;
  Vector params;
  Vector momentum;
  std::optional<Vector> prev_params;

  /// Round 0 with zero momentum and no previous iterate.
  static ServerState initial(Vector x0);

  Eigen::Index dim() const noexcept { return params.size(); }
};

/// Result of one client's local procedure.
struct ClientUpdate {
  std::size_t client_id = 0;
  /// x_{i,K} - x_t.
  Vector displacement;
  /// Σ_k ||x_{i,k} - x_t||² over k = 0..K-1, accumulated during the local run.
  double drift_sum = 0.0;
  /// Audit log: the K stochastic gradients g_{i,k}.
  std::optional<std::vector<Vector>> step_grads;
  /// Audit log: the K local iterates x_{i,0..K-1}.
  std::optional<std::vector<Vector>> iterates;
};

struct RoundConfig {
  double local_lr = 0.1;
  double global_lr = 1.0;
  int local_steps = 1;
  /// FedCM blend between the fresh gradient and the broadcast momentum.
  double alpha = 1.0;
  /// Minibatch size for data-backed clients; nullopt means full batch.
  std::optional<std::size_t> batch_size;
  /// Multiplicative decay of the local learning rate per round.
  double lr_decay = 1.0;
  /// When set, the server step uses global_lr * local_lr * K, so that
  /// global_lr = 1 reproduces plain model averaging.
  bool scale_global_lr = false;
  /// Per-step gradient norm clip; 0 disables.
  double clip_norm = 0.0;

  /// Throws Error(kConfig) on any out-of-range field.
  void validate() const;

  double local_lr_at(std::size_t round) const;
  double global_lr_at(std::size_t round) const;
};

/// Exactly `clients` distinct clients per round, uniformly without replacement.
struct FixedUniform {
  std::size_t clients = 1;
};

/// Every client joins independently with probability p.
struct Bernoulli {
  double p = 1.0;
};

using ParticipationScheme = std::variant<FixedUniform, Bernoulli>;

/// Expected number of participants per round.
double expected_participants(const ParticipationScheme& scheme, std::size_t n_clients);

/// Draws the participating client ids for `round`, sorted ascending. The
/// result depends only on (scheme, n_clients, seed, round). An empty
/// Bernoulli draw is repeated until non-empty.
std::vector<std::size_t> sample_participants(const ParticipationScheme& scheme,
                                             std::size_t n_clients, std::size_t round,
                                             std::uint64_t seed);

/// Δ_{t+1} = -(1 / (η_l K |S|)) Σ_i Δ_i, summed in ascending client-id order.
Vector aggregate_updates(std::span<const ClientUpdate> updates, double local_lr,
                         int local_steps);

/// x_{t+1} = x_t - η_g Δ_{t+1}; the new momentum is delta_next.
ServerState server_step(const ServerState& state, const Vector& delta_next,
                        double global_lr);

}  // namespace fedsim
