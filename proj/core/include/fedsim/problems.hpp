#pragma once

#include "fedsim/linalg.hpp"
#include "fedsim/rng.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

namespace fedsim {

/// f_i(x) = ½ xᵀA x − bᵀx, with additive N(0, noise_std²) gradient noise per
/// coordinate for the stochastic oracle.
struct QuadraticClient {
  Matrix A;
  Vector b;
  double noise_std = 0.0;
};

/// Multinomial logistic regression on a local dataset. Parameters are the
/// class weight rows laid out row-major: x = [w_0; w_1; ...; w_{C-1}].
/// Loss = mean cross-entropy + (l2 / 2)||x||².
struct LogRegClient {
  Matrix features;  // n_i × n_features
  std::vector<int> labels;
  int num_classes = 2;
  double l2 = 0.0;
};

using ClientObjective = std::variant<QuadraticClient, LogRegClient>;

struct LabeledData {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 2;
};

/// Closed-form facts about a suite, available for quadratic suites.
struct KnownConstants {
  double mu = 0.0;
  double L = 0.0;
  std::optional<Vector> x_star;
  std::optional<double> f_star;
  /// sqrt(E||ξ||²) of the stochastic gradient noise.
  double sigma_l = 0.0;
};

struct ProblemSuite {
  std::vector<ClientObjective> clients;
  Eigen::Index dim = 0;
  std::optional<KnownConstants> known;
  /// Held-out split for classification suites.
  std::optional<LabeledData> test_set;

  std::size_t n_clients() const noexcept { return clients.size(); }
  bool is_quadratic() const noexcept;
};

struct QuadraticSuiteOptions {
  /// Give every client (or pool atom) its own rotation and eigenvalues in
  /// [mu, L] instead of one shared matrix.
  bool per_client_spectrum = false;
  /// Standard deviation of the shared linear term b̄.
  double b_scale = 1.0;
  /// When non-zero, draw this many quadratic atoms and give each client the
  /// average of floor(pool_size / N) consecutive atoms. The atoms do not
  /// depend on N, so suites built from the same seed with different N share
  /// their global objective while per-client heterogeneity grows with N.
  std::size_t pool_size = 0;
};

/// Random quadratic suite with every A_i spectrum inside [mu, L] and
/// b_i = b̄ + hetero·u_i where Σ u_i = 0. Populates known constants.
ProblemSuite gen_quadratic_suite(std::size_t n_clients, Eigen::Index dim, double mu, double L,
                                 double hetero, double noise_std, Rng& rng,
                                 const QuadraticSuiteOptions& options = {});

/// Builds a suite from explicit quadratic clients and solves for x*, f*.
ProblemSuite make_quadratic_suite(std::vector<QuadraticClient> clients, double mu, double L);

/// Each client repeated `factor` times in place (0,0,..,1,1,..). The global
/// objective and the heterogeneity measure are unchanged.
ProblemSuite replicate_clients(const ProblemSuite& suite, std::size_t factor);

struct LogRegSuiteOptions {
  std::size_t total_samples = 5000;
  int num_classes = 4;
  Eigen::Index n_features = 5;
  double class_separation = 2.0;
  double l2 = 1e-3;
  /// Dirichlet concentration for label skew; nullopt gives an IID split.
  std::optional<double> concentration;
  std::size_t test_samples = 0;
};

/// Gaussian class-conditional data split over clients by the partition
/// module. A constant bias feature is appended.
ProblemSuite gen_logreg_suite(std::size_t n_clients, const LogRegSuiteOptions& options, Rng& rng);

Eigen::Index client_dim(const ClientObjective& client);
double client_loss(const ClientObjective& client, const Vector& x);
Vector client_grad(const ClientObjective& client, const Vector& x);
/// Unbiased gradient estimate. Quadratic: exact gradient plus Gaussian noise.
/// LogReg: gradient on `batch_size` rows drawn without replacement
/// (nullopt or >= n_i means the full batch).
Vector client_stoch_grad(const ClientObjective& client, const Vector& x,
                         std::optional<std::size_t> batch_size, Rng& rng);

/// f(x) = (1/N) Σ f_i(x), summed in client-id order.
double global_loss(const ProblemSuite& suite, const Vector& x);
Vector global_grad(const ProblemSuite& suite, const Vector& x);

/// (1/N) Σ ||∇f_i(x) − ∇f(x)||².
double measure_heterogeneity(const ProblemSuite& suite, const Vector& x);

/// Fraction of correctly classified held-out samples; requires test_set.
double test_accuracy(const ProblemSuite& suite, const Vector& x);

/// Mean of the client quadratic terms (Ā, b̄). Throws for non-quadratic suites.
std::pair<Matrix, Vector> mean_quadratic(const ProblemSuite& suite);

/// Plain-text, self-describing serialization; reals are written in shortest
/// round-trip form so a reloaded suite is bit-identical.
void save_suite(const ProblemSuite& suite, std::ostream& out);
ProblemSuite load_suite(std::istream& in);

}  // namespace fedsim
