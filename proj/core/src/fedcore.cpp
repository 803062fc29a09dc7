#include "fedsim/fedcore.hpp"

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fedsim {

ServerState ServerState::initial(Vector x0) {
  ServerState state;
  state.momentum = Vector::Zero(x0.size());
  state.params = std::move(x0);
  return state;
}

void RoundConfig::validate() const {
  if (!(local_lr > 0.0) || !std::isfinite(local_lr)) {
    throw Error(ErrorCode::kConfig, "round.local_lr: must be positive");
  }
  if (!(global_lr > 0.0) || !std::isfinite(global_lr)) {
    throw Error(ErrorCode::kConfig, "round.global_lr: must be positive");
  }
  if (local_steps < 1) {
    throw Error(ErrorCode::kConfig, "round.local_steps: must be >= 1");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kConfig, "round.alpha: must lie in (0, 1]");
  }
  if (batch_size && *batch_size == 0) {
    throw Error(ErrorCode::kConfig, "round.batch_size: must be >= 1 or 'full'");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw Error(ErrorCode::kConfig, "round.lr_decay: must lie in (0, 1]");
  }
  if (!(clip_norm >= 0.0)) {
    throw Error(ErrorCode::kConfig, "round.clip_norm: must be non-negative");
  }
}

double RoundConfig::local_lr_at(std::size_t round) const {
  if (lr_decay == 1.0) return local_lr;
  return local_lr * std::pow(lr_decay, static_cast<double>(round));
}

double RoundConfig::global_lr_at(std::size_t round) const {
  if (!scale_global_lr) return global_lr;
  return global_lr * local_lr_at(round) * static_cast<double>(local_steps);
}

double expected_participants(const ParticipationScheme& scheme, std::size_t n_clients) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FixedUniform>) {
          return static_cast<double>(s.clients);
        } else {
          return s.p * static_cast<double>(n_clients);
        }
      },
      scheme);
}

std::vector<std::size_t> sample_participants(const ParticipationScheme& scheme,
                                             std::size_t n_clients, std::size_t round,
                                             std::uint64_t seed) {
  if (n_clients == 0) {
    throw Error(ErrorCode::kInvalidScheme, "sample_participants: no clients");
  }
  Rng rng = make_stream(seed, StreamTag::kParticipation, round);
  std::vector<std::size_t> chosen;

  if (const auto* fixed = std::get_if<FixedUniform>(&scheme)) {
    if (fixed->clients == 0 || fixed->clients > n_clients) {
      throw Error(ErrorCode::kInvalidScheme,
                  "FixedUniform: need 1 <= S <= N, got S=" + std::to_string(fixed->clients) +
                      " N=" + std::to_string(n_clients));
    }
    chosen.reserve(fixed->clients);
    // Selection sampling keeps the output in ascending order.
    std::vector<std::size_t> ids(n_clients);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    std::sample(ids.begin(), ids.end(), std::back_inserter(chosen), fixed->clients, rng);
    return chosen;
  }

  const double p = std::get<Bernoulli>(scheme).p;
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidScheme, "Bernoulli: p must lie in (0, 1]");
  }
  std::bernoulli_distribution coin(p);
  while (chosen.empty()) {
    for (std::size_t i = 0; i < n_clients; ++i) {
      if (coin(rng)) chosen.push_back(i);
    }
  }
  return chosen;
}

Vector aggregate_updates(std::span<const ClientUpdate> updates, double local_lr,
                         int local_steps) {
  if (updates.empty()) {
    throw Error(ErrorCode::kEmptyUpdates, "aggregate_updates: no client updates");
  }
  if (!(local_lr > 0.0) || local_steps < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "aggregate_updates: need local_lr > 0 and local_steps >= 1");
  }
  const Eigen::Index dim = updates.front().displacement.size();

  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });

  Vector sum = Vector::Zero(dim);
  for (std::size_t idx : order) {
    require_dim(updates[idx].displacement, dim, "aggregate_updates");
    sum += updates[idx].displacement;
  }
  const double scale = local_lr * static_cast<double>(local_steps) *
                       static_cast<double>(updates.size());
  return -sum / scale;
}

ServerState server_step(const ServerState& state, const Vector& delta_next,
                        double global_lr) {
  require_dim(delta_next, state.dim(), "server_step");
  ServerState next;
  next.round = state.round + 1;
  next.params = state.params - global_lr * delta_next;
  next.momentum = delta_next;
  next.prev_params = state.params;
  return next;
}

}  // namespace fedsim
