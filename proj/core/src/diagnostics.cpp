#include "fedsim/diagnostics.hpp"

#include "fedsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedsim {
namespace {

std::vector<std::size_t> id_order(std::span<const ClientUpdate> updates) {
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });
  return order;
}

}  // namespace

Vector compute_delta_tilde(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw Error(ErrorCode::kEmptyUpdates, "compute_delta_tilde: no updates");
  std::size_t steps = 0;
  Eigen::Index dim = 0;
  for (const auto& u : updates) {
    if (!u.step_grads || u.step_grads->empty()) {
      throw Error(ErrorCode::kMissingAuditLog,
                  "client " + std::to_string(u.client_id) + " has no gradient log");
    }
    if (steps == 0) {
      steps = u.step_grads->size();
      dim = u.step_grads->front().size();
    } else if (u.step_grads->size() != steps) {
      throw Error(ErrorCode::kMissingAuditLog, "gradient logs differ in length");
    }
  }
  Vector sum = Vector::Zero(dim);
  for (std::size_t idx : id_order(updates)) {
    for (const auto& g : *updates[idx].step_grads) {
      require_dim(g, dim, "compute_delta_tilde");
      sum += g;
    }
  }
  return sum / static_cast<double>(steps * updates.size());
}

double check_lemma1(const Vector& delta_next, const Vector& delta_tilde,
                    const Vector& delta_prev, double alpha) {
  require_dim(delta_tilde, delta_next.size(), "check_lemma1 delta_tilde");
  require_dim(delta_prev, delta_next.size(), "check_lemma1 delta_prev");
  return max_norm(delta_next - alpha * delta_tilde - (1.0 - alpha) * delta_prev);
}

Vector z_sequence(const Vector& x_t, const std::optional<Vector>& x_prev, double alpha,
                  std::size_t round) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "z_sequence: alpha must lie in (0, 1]");
  }
  if (!x_prev) {
    if (round == 0) return x_t;
    throw Error(ErrorCode::kMissingPrev, "z_sequence: previous iterate missing at round " +
                                             std::to_string(round));
  }
  require_dim(*x_prev, x_t.size(), "z_sequence");
  if (alpha == 1.0) return x_t;
  return x_t + ((1.0 - alpha) / alpha) * (x_t - *x_prev);
}

double check_z_update(const Vector& z_next, const Vector& z_curr, double global_lr,
                      const Vector& delta_tilde) {
  require_dim(z_curr, z_next.size(), "check_z_update z_curr");
  require_dim(delta_tilde, z_next.size(), "check_z_update delta_tilde");
  return max_norm(z_next - z_curr + global_lr * delta_tilde);
}

DriftRecord client_drift(std::span<const ClientUpdate> updates, const Vector& x_t,
                         std::size_t round) {
  if (updates.empty()) throw Error(ErrorCode::kEmptyUpdates, "client_drift: no updates");
  DriftRecord record;
  record.round = round;
  std::size_t steps = 0;
  for (const auto& u : updates) {
    if (!u.iterates || u.iterates->empty()) {
      throw Error(ErrorCode::kMissingAuditLog,
                  "client " + std::to_string(u.client_id) + " has no trajectory");
    }
    if (steps == 0) steps = u.iterates->size();
    if (u.iterates->size() != steps) {
      throw Error(ErrorCode::kMissingAuditLog, "trajectories differ in length");
    }
  }
  record.per_step.assign(steps, 0.0);
  for (std::size_t idx : id_order(updates)) {
    const auto& traj = *updates[idx].iterates;
    for (std::size_t k = 0; k < steps; ++k) {
      require_dim(traj[k], x_t.size(), "client_drift");
      record.per_step[k] += (x_t - traj[k]).squaredNorm();
    }
  }
  double total = 0.0;
  for (auto& e : record.per_step) {
    total += e;
    e /= static_cast<double>(updates.size());
  }
  record.epsilon = total / static_cast<double>(steps * updates.size());
  return record;
}

std::vector<double> geometric_weights(std::size_t count, double mu, double global_lr) {
  if (count == 0) throw Error(ErrorCode::kInvalidArgument, "geometric_weights: empty sequence");
  const double half_step = 0.5 * mu * global_lr;
  if (!(mu > 0.0) || !(half_step > 0.0 && half_step < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "geometric_weights: need mu > 0 and 0 < mu*eta_g/2 < 1");
  }
  const double ratio = 1.0 - half_step;
  // Scale by the largest weight, ratio^{-count}: w_t ∝ ratio^{count-1-t} <= 1.
  std::vector<double> w(count);
  double sum = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    w[t] = std::pow(ratio, static_cast<double>(count - 1 - t));
    sum += w[t];
  }
  if (!std::isfinite(sum) || !(sum > 0.0)) {
    throw Error(ErrorCode::kWeightOverflow, "geometric_weights: normalization failed");
  }
  for (auto& v : w) v /= sum;
  return w;
}

Vector weighted_average_iterate(std::span<const Vector> z_list, double mu, double global_lr) {
  const std::vector<double> w = geometric_weights(z_list.size(), mu, global_lr);
  Vector out = Vector::Zero(z_list.front().size());
  for (std::size_t t = 0; t < z_list.size(); ++t) {
    require_dim(z_list[t], out.size(), "weighted_average_iterate");
    out += w[t] * z_list[t];
  }
  return out;
}

TheoremConstants assemble_constants(double sigma_l, double sigma_g, double G, int K, double S,
                                    std::size_t N, double alpha, double D, double F) {
  TheoremConstants c;
  c.sigma_l = sigma_l;
  c.sigma_g = sigma_g;
  c.G = G;
  c.K = K;
  c.S = S;
  c.N = N;
  c.alpha = alpha;
  c.D = D;
  c.F = F;
  const double k = static_cast<double>(K);
  const double sl2 = sigma_l * sigma_l;
  const double sg2 = sigma_g * sigma_g;
  const double g2 = G * G;
  c.C1 = sl2 + k * (1.0 - S / static_cast<double>(N)) * sg2 + k * S * g2;
  c.C2 = alpha * (sl2 / k + sg2 + g2);
  return c;
}

TheoremConstants theorem_constants(const ProblemSuite& suite, const RoundConfig& config,
                                   double expected_participants, const Vector& x0,
                                   double box_radius) {
  if (!suite.is_quadratic() || !suite.known || !suite.known->x_star || !suite.known->f_star) {
    throw Error(ErrorCode::kUnknownConstants,
                "theorem_constants: suite has no closed-form minimizer");
  }
  const KnownConstants& known = *suite.known;
  const Vector& x_star = *known.x_star;
  require_dim(x0, suite.dim, "theorem_constants");

  const auto [a_bar, b_bar] = mean_quadratic(suite);
  const double radius = std::max(box_radius, (x0 - x_star).norm());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a_bar, Eigen::EigenvaluesOnly);
  const double lambda_max = eig.eigenvalues().maxCoeff();

  double spread_sq = 0.0;
  for (const auto& client : suite.clients) {
    const auto& q = std::get<QuadraticClient>(client);
    const Matrix diff = q.A - a_bar;
    Eigen::SelfAdjointEigenSolver<Matrix> de(diff, Eigen::EigenvaluesOnly);
    const double op = de.eigenvalues().cwiseAbs().maxCoeff();
    spread_sq += op * op;
  }
  spread_sq /= static_cast<double>(suite.n_clients());

  const double sigma_g =
      std::sqrt(measure_heterogeneity(suite, x_star)) + radius * std::sqrt(spread_sq);
  const double G = lambda_max * radius;
  const double D = (x0 - x_star).squaredNorm();
  const double F = global_loss(suite, x0) - *known.f_star;

  TheoremConstants c = assemble_constants(known.sigma_l, sigma_g, G, config.local_steps,
                                          expected_participants, suite.n_clients(), config.alpha,
                                          D, F);
  c.mu = known.mu;
  c.L = known.L;
  c.box_radius = radius;
  return c;
}

}  // namespace fedsim
