#pragma once

#include "fedsim/fedcore.hpp"
#include "fedsim/problems.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace fedsim {

struct MomentumAudit {
  std::size_t round = 0;
  Vector delta_tilde;
  double ema_residual = 0.0;
};

struct DriftRecord {
  std::size_t round = 0;
  double epsilon = 0.0;
  /// ε_k: mean squared distance from x_t at local step k, over clients.
  std::vector<double> per_step;
};

struct TheoremConstants {
  double C1 = 0.0;
  double C2 = 0.0;
  double D = 0.0;
  double F = 0.0;
  double mu = 0.0;
  double L = 0.0;
  double G = 0.0;
  double sigma_l = 0.0;
  double sigma_g = 0.0;
  int K = 1;
  double S = 1.0;
  std::size_t N = 1;
  double alpha = 1.0;
  /// Radius of the ball around x* over which G and σ_g are bounds.
  double box_radius = 0.0;
};

/// Δ̃_t = (1 / (K|S|)) Σ_{i,k} g_{i,k}, accumulated in client-id then step
/// order. Every update must carry its gradient log.
Vector compute_delta_tilde(std::span<const ClientUpdate> updates);

/// max-norm of Δ_{t+1} − α Δ̃_t − (1−α) Δ_t.
double check_lemma1(const Vector& delta_next, const Vector& delta_tilde,
                    const Vector& delta_prev, double alpha);

/// z_t = x_t + ((1−α)/α)(x_t − x_{t−1}); z_0 = x_0 when x_prev is absent at
/// round 0.
Vector z_sequence(const Vector& x_t, const std::optional<Vector>& x_prev, double alpha,
                  std::size_t round);

/// max-norm of z_{t+1} − z_t + η_g Δ̃_t.
double check_z_update(const Vector& z_next, const Vector& z_curr, double global_lr,
                      const Vector& delta_tilde);

/// Empirical ε_t over the recorded local iterates of every update.
DriftRecord client_drift(std::span<const ClientUpdate> updates, const Vector& x_t,
                         std::size_t round);

/// Normalized weights w_t ∝ (1 − μη_g/2)^{−t−1}, t = 0..count-1.
std::vector<double> geometric_weights(std::size_t count, double mu, double global_lr);

/// Σ w_t z_t with the weights above.
Vector weighted_average_iterate(std::span<const Vector> z_list, double mu, double global_lr);

/// C1 = σ_l² + K(1−S/N)σ_g² + K·S·G², C2 = α(σ_l²/K + σ_g² + G²).
TheoremConstants assemble_constants(double sigma_l, double sigma_g, double G, int K, double S,
                                    std::size_t N, double alpha, double D, double F);

/// Constants for a quadratic suite. G and σ_g are exact bounds over the ball
/// around x* that contains x_0 (or of `box_radius`, if larger):
/// G = λ_max(Ā)·R and σ_g = sqrt(H(x*)) + R·sqrt(mean ||A_i − Ā||₂²).
TheoremConstants theorem_constants(const ProblemSuite& suite, const RoundConfig& config,
                                   double expected_participants, const Vector& x0,
                                   double box_radius = 0.0);

}  // namespace fedsim
