#include "fedsim/algorithms.hpp"

#include "fedsim/error.hpp"

#include <cmath>

namespace fedsim {
namespace {

// K local steps x ← x − η_l · direction(g, x). `direction` receives the
// (possibly clipped) stochastic gradient and returns the step direction.
template <class Direction>
ClientUpdate local_descent(const Vector& x_t, const ClientObjective& client,
                           std::size_t client_id, const RoundConfig& config,
                           const LocalOptions& local, Rng& rng, Direction&& direction) {
  const int steps = config.local_steps;
  ClientUpdate update;
  update.client_id = client_id;
  if (local.audit) {
    update.step_grads.emplace();
    update.iterates.emplace();
    update.step_grads->reserve(static_cast<std::size_t>(steps));
    update.iterates->reserve(static_cast<std::size_t>(steps));
  }

  Vector x = x_t;
  for (int k = 0; k < steps; ++k) {
    update.drift_sum += (x - x_t).squaredNorm();
    Vector g = client_stoch_grad(client, x, config.batch_size, rng);
    if (config.clip_norm > 0.0) {
      const double norm = g.norm();
      if (norm > config.clip_norm) g *= config.clip_norm / norm;
    }
    if (local.audit) {
      update.iterates->push_back(x);
      update.step_grads->push_back(g);
    }
    x -= local.local_lr * direction(g);
  }
  update.displacement = x - x_t;
  if (!all_finite(update.displacement)) {
    throw Error(ErrorCode::kNanDetected,
                "client " + std::to_string(client_id) + " produced a non-finite iterate");
  }
  return update;
}

}  // namespace

std::string_view algorithm_name(const AlgorithmDescriptor& algorithm) noexcept {
  struct Visitor {
    std::string_view operator()(const FedAvg&) const { return "fedavg"; }
    std::string_view operator()(const FedCM&) const { return "fedcm"; }
    std::string_view operator()(const FedAdam&) const { return "fedadam"; }
    std::string_view operator()(const Scaffold&) const { return "scaffold"; }
  };
  return std::visit(Visitor{}, algorithm);
}

AlgorithmState AlgorithmState::initial(const AlgorithmDescriptor& algorithm,
                                       std::size_t n_clients, Eigen::Index dim) {
  AlgorithmState state;
  if (std::holds_alternative<FedAdam>(algorithm)) {
    state.adam_m = Vector::Zero(dim);
    state.adam_v = Vector::Zero(dim);
  } else if (std::holds_alternative<Scaffold>(algorithm)) {
    state.server_c = Vector::Zero(dim);
    state.client_c.assign(n_clients, Vector::Zero(dim));
  }
  return state;
}

ClientUpdate client_update_fedavg(const Vector& x_t, const ClientObjective& client,
                                  std::size_t client_id, const RoundConfig& config,
                                  const LocalOptions& local, Rng& rng) {
  return local_descent(x_t, client, client_id, config, local, rng,
                       [](const Vector& g) -> const Vector& { return g; });
}

ClientUpdate client_update_fedcm(const Vector& x_t, const Vector& momentum,
                                 const ClientObjective& client, std::size_t client_id,
                                 const RoundConfig& config, const LocalOptions& local, Rng& rng) {
  require_dim(momentum, x_t.size(), "client_update_fedcm momentum");
  const double alpha = config.alpha;
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "FedCM alpha must lie in (0, 1]");
  }
  return local_descent(x_t, client, client_id, config, local, rng,
                       [&](const Vector& g) -> Vector {
                         return alpha * g + (1.0 - alpha) * momentum;
                       });
}

ScaffoldClientResult client_update_scaffold(const Vector& x_t, const Vector& server_c,
                                            const Vector& client_c,
                                            const ClientObjective& client,
                                            std::size_t client_id, const RoundConfig& config,
                                            const LocalOptions& local, Rng& rng) {
  require_dim(server_c, x_t.size(), "client_update_scaffold server variate");
  require_dim(client_c, x_t.size(), "client_update_scaffold client variate");
  const Vector correction = server_c - client_c;
  ScaffoldClientResult result;
  result.update = local_descent(x_t, client, client_id, config, local, rng,
                                [&](const Vector& g) -> Vector { return g + correction; });
  const double scale = static_cast<double>(config.local_steps) * local.local_lr;
  result.new_client_c = client_c - server_c - result.update.displacement / scale;
  return result;
}

FedAdamStep server_update_fedadam(const Vector& m, const Vector& v, const Vector& delta_next,
                                  double global_lr, const FedAdam& params) {
  require_dim(m, delta_next.size(), "server_update_fedadam m");
  require_dim(v, delta_next.size(), "server_update_fedadam v");
  if (!(params.beta1 >= 0.0 && params.beta1 < 1.0) ||
      !(params.beta2 >= 0.0 && params.beta2 < 1.0) || !(params.tau > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "FedAdam needs beta1, beta2 in [0,1) and tau > 0");
  }
  FedAdamStep out;
  out.m = params.beta1 * m + (1.0 - params.beta1) * delta_next;
  out.v = params.beta2 * v + (1.0 - params.beta2) * delta_next.cwiseProduct(delta_next);
  out.step = global_lr * out.m.cwiseQuotient((out.v.cwiseSqrt().array() + params.tau).matrix());
  return out;
}

}  // namespace fedsim
