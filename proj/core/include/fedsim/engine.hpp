#pragma once

#include "fedsim/algorithms.hpp"
#include "fedsim/fedcore.hpp"
#include "fedsim/problems.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace fedsim {

/// Metrics for one executed round t. Loss-type fields describe the iterate
/// x_{t+1} the round produced; drift and residuals describe the round itself.
struct RoundRecord {
  std::size_t round = 0;
  double global_loss = 0.0;
  std::optional<double> suboptimality;
  double grad_norm = 0.0;
  /// ||Δ_{t+1}||.
  double delta_norm = 0.0;
  std::vector<std::size_t> participants;
  /// ε_t from the measured clients' local trajectories.
  double drift = 0.0;
  /// Momentum-identity residual (audit only, FedAvg/FedCM).
  std::optional<double> ema_residual;
  /// z-update residual (audit only, FedAvg/FedCM).
  std::optional<double> z_residual;
  std::optional<double> test_accuracy;
  double wall_ms = 0.0;
  /// Whether the loss fields were evaluated this round.
  bool evaluated = false;
  /// Norms used to turn residuals into relative errors.
  double z_norm = 0.0;
};

struct RoundOptions {
  bool audit = false;
  /// Run the local procedure on every client to measure ε_t over all N;
  /// only participants still enter aggregation.
  bool audit_all_clients = false;
  unsigned threads = 1;
  bool evaluate = true;
  /// Test hook: FedCM clients blend with alpha + shift while the audit keeps
  /// the configured alpha.
  double fault_alpha_shift = 0.0;
};

struct RoundResult {
  ServerState next;
  RoundRecord record;
};

/// One communication round. Client k of round t draws its noise from
/// make_stream(seed, kClient, t, k), so results do not depend on `threads`.
/// Throws NanError carrying the round on divergence.
RoundResult run_round(const ServerState& state, AlgorithmState& algorithm_state,
                      const AlgorithmDescriptor& algorithm, const ProblemSuite& suite,
                      const RoundConfig& config, const ParticipationScheme& scheme,
                      std::uint64_t seed, const RoundOptions& options = {});

/// Fills the loss-type fields of `record` at x.
void evaluate_metrics(const ProblemSuite& suite, const Vector& x, RoundRecord& record);

}  // namespace fedsim
