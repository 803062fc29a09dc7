#pragma once

#include "fedsim/fedcore.hpp"
#include "fedsim/problems.hpp"
#include "fedsim/rng.hpp"

#include <string_view>
#include <variant>
#include <vector>

namespace fedsim {

struct FedAvg {};

/// Client-level momentum: local steps follow α·g + (1−α)·Δ_t.
struct FedCM {};

/// Adam on the server, driven by the aggregated pseudo-gradient.
struct FedAdam {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 0.01;
};

/// Control-variate corrected local steps; per-client variates persist.
struct Scaffold {};

using AlgorithmDescriptor = std::variant<FedAvg, FedCM, FedAdam, Scaffold>;

std::string_view algorithm_name(const AlgorithmDescriptor& algorithm) noexcept;

/// Server-owned state beyond ServerState. Empty for FedAvg and FedCM.
struct AlgorithmState {
  // FedAdam moments.
  Vector adam_m;
  Vector adam_v;
  // SCAFFOLD server variate c and client variates c_i (index = client id).
  Vector server_c;
  std::vector<Vector> client_c;

  static AlgorithmState initial(const AlgorithmDescriptor& algorithm, std::size_t n_clients,
                                Eigen::Index dim);
};

/// Per-call knobs shared by the client procedures.
struct LocalOptions {
  /// η_l actually applied this round (after decay).
  double local_lr = 0.1;
  /// Record step gradients and local iterates in the returned update.
  bool audit = false;
};

ClientUpdate client_update_fedavg(const Vector& x_t, const ClientObjective& client,
                                  std::size_t client_id, const RoundConfig& config,
                                  const LocalOptions& local, Rng& rng);

ClientUpdate client_update_fedcm(const Vector& x_t, const Vector& momentum,
                                 const ClientObjective& client, std::size_t client_id,
                                 const RoundConfig& config, const LocalOptions& local, Rng& rng);

struct ScaffoldClientResult {
  ClientUpdate update;
  Vector new_client_c;
};

/// Local direction g − c_i + c; afterwards
/// c_i ← c_i − c + (x_t − x_{i,K}) / (K η_l).
ScaffoldClientResult client_update_scaffold(const Vector& x_t, const Vector& server_c,
                                            const Vector& client_c,
                                            const ClientObjective& client,
                                            std::size_t client_id, const RoundConfig& config,
                                            const LocalOptions& local, Rng& rng);

struct FedAdamStep {
  Vector m;
  Vector v;
  /// Amount subtracted from x_t.
  Vector step;
};

/// m ← β1 m + (1−β1) Δ, v ← β2 v + (1−β2) Δ², step = η_g m / (√v + τ).
/// No bias correction.
FedAdamStep server_update_fedadam(const Vector& m, const Vector& v, const Vector& delta_next,
                                  double global_lr, const FedAdam& params);

}  // namespace fedsim
