#include "fedsim/problems.hpp"

#include "fedsim/error.hpp"
#include "fedsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fedsim {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Vector gaussian_vector(Eigen::Index dim, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index j = 0; j < dim; ++j) v[j] = stddev * normal(rng);
  return v;
}

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
Matrix random_rotation(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Matrix spd_from_spectrum(const Matrix& rotation, const Vector& eigenvalues) {
  Matrix a = rotation * eigenvalues.asDiagonal() * rotation.transpose();
  return 0.5 * (a + a.transpose());
}

// Eigenvalues spanning [mu, L] with both endpoints attained (dim >= 2).
Vector random_spectrum(Eigen::Index dim, double mu, double L, Rng& rng) {
  Vector eig(dim);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (dim == 1) {
    eig[0] = mu + (L - mu) * unit(rng);
    return eig;
  }
  eig[0] = mu;
  eig[dim - 1] = L;
  for (Eigen::Index j = 1; j + 1 < dim; ++j) {
    const double u = unit(rng);
    eig[j] = mu > 0.0 ? std::exp(std::log(mu) + u * (std::log(L) - std::log(mu)))
                      : mu + u * (L - mu);
  }
  return eig;
}

Matrix random_quadratic_matrix(Eigen::Index dim, double mu, double L, Rng& rng) {
  if (mu == L) return mu * Matrix::Identity(dim, dim);
  Matrix q = random_rotation(dim, rng);
  return spd_from_spectrum(q, random_spectrum(dim, mu, L, rng));
}

Matrix shared_quadratic_matrix(Eigen::Index dim, double mu, double L, Rng& rng) {
  if (mu == L) return mu * Matrix::Identity(dim, dim);
  Matrix q = random_rotation(dim, rng);
  Vector eig = dim == 1 ? Vector::Constant(1, mu) : Vector(Vector::LinSpaced(dim, mu, L));
  return spd_from_spectrum(q, eig);
}

void check_dim(const ClientObjective& client, const Vector& x) {
  require_dim(x, client_dim(client), "client objective");
}

auto weights_view(const LogRegClient& c, const Vector& x) {
  return Eigen::Map<const RowMajorMatrix>(x.data(), c.num_classes, c.features.cols());
}

double logreg_loss_rows(const LogRegClient& c, const Vector& x,
                        const std::vector<std::size_t>* rows) {
  const auto w = weights_view(c, x);
  const std::size_t n = rows ? rows->size() : c.labels.size();
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rows ? (*rows)[k] : k;
    const Vector logits = w * c.features.row(static_cast<Eigen::Index>(i)).transpose();
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    total += lse - logits[c.labels[i]];
  }
  return total / static_cast<double>(n) + 0.5 * c.l2 * x.squaredNorm();
}

Vector logreg_grad_rows(const LogRegClient& c, const Vector& x,
                        const std::vector<std::size_t>* rows) {
  const auto w = weights_view(c, x);
  const Eigen::Index n_feat = c.features.cols();
  const std::size_t n = rows ? rows->size() : c.labels.size();
  RowMajorMatrix g = RowMajorMatrix::Zero(c.num_classes, n_feat);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rows ? (*rows)[k] : k;
    const auto a = c.features.row(static_cast<Eigen::Index>(i));
    Vector p = w * a.transpose();
    p = (p.array() - p.maxCoeff()).exp();
    p /= p.sum();
    p[c.labels[i]] -= 1.0;
    g.noalias() += p * a;
  }
  g /= static_cast<double>(n);
  Vector out = Eigen::Map<const Vector>(g.data(), g.size());
  out += c.l2 * x;
  return out;
}

}  // namespace

bool ProblemSuite::is_quadratic() const noexcept {
  return !clients.empty() && std::holds_alternative<QuadraticClient>(clients.front());
}

Eigen::Index client_dim(const ClientObjective& client) {
  return std::visit(
      [](const auto& c) -> Eigen::Index {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, QuadraticClient>) {
          return c.b.size();
        } else {
          return static_cast<Eigen::Index>(c.num_classes) * c.features.cols();
        }
      },
      client);
}

double client_loss(const ClientObjective& client, const Vector& x) {
  check_dim(client, x);
  if (const auto* q = std::get_if<QuadraticClient>(&client)) {
    return 0.5 * x.dot(q->A * x) - q->b.dot(x);
  }
  const auto& c = std::get<LogRegClient>(client);
  if (c.labels.empty()) throw Error(ErrorCode::kEmptyDataset, "client has no samples");
  return logreg_loss_rows(c, x, nullptr);
}

Vector client_grad(const ClientObjective& client, const Vector& x) {
  check_dim(client, x);
  if (const auto* q = std::get_if<QuadraticClient>(&client)) {
    return q->A * x - q->b;
  }
  const auto& c = std::get<LogRegClient>(client);
  if (c.labels.empty()) throw Error(ErrorCode::kEmptyDataset, "client has no samples");
  return logreg_grad_rows(c, x, nullptr);
}

Vector client_stoch_grad(const ClientObjective& client, const Vector& x,
                         std::optional<std::size_t> batch_size, Rng& rng) {
  if (const auto* q = std::get_if<QuadraticClient>(&client)) {
    Vector g = client_grad(client, x);
    if (q->noise_std > 0.0) g += gaussian_vector(g.size(), q->noise_std, rng);
    return g;
  }
  const auto& c = std::get<LogRegClient>(client);
  if (c.labels.empty()) throw Error(ErrorCode::kEmptyDataset, "client has no samples");
  check_dim(client, x);
  const std::size_t n = c.labels.size();
  if (!batch_size || *batch_size >= n) return logreg_grad_rows(c, x, nullptr);
  if (*batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  std::vector<std::size_t> rows;
  rows.reserve(*batch_size);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::sample(ids.begin(), ids.end(), std::back_inserter(rows), *batch_size, rng);
  return logreg_grad_rows(c, x, &rows);
}

double global_loss(const ProblemSuite& suite, const Vector& x) {
  require_dim(x, suite.dim, "global_loss");
  double total = 0.0;
  for (const auto& client : suite.clients) total += client_loss(client, x);
  return total / static_cast<double>(suite.n_clients());
}

Vector global_grad(const ProblemSuite& suite, const Vector& x) {
  require_dim(x, suite.dim, "global_grad");
  Vector total = Vector::Zero(suite.dim);
  for (const auto& client : suite.clients) total += client_grad(client, x);
  return total / static_cast<double>(suite.n_clients());
}

double measure_heterogeneity(const ProblemSuite& suite, const Vector& x) {
  const Vector mean = global_grad(suite, x);
  double total = 0.0;
  for (const auto& client : suite.clients) {
    total += (client_grad(client, x) - mean).squaredNorm();
  }
  return total / static_cast<double>(suite.n_clients());
}

double test_accuracy(const ProblemSuite& suite, const Vector& x) {
  if (!suite.test_set || suite.test_set->labels.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "suite has no held-out split");
  }
  const LabeledData& test = *suite.test_set;
  require_dim(x, static_cast<Eigen::Index>(test.num_classes) * test.features.cols(),
              "test_accuracy");
  const auto w = Eigen::Map<const RowMajorMatrix>(x.data(), test.num_classes,
                                                  test.features.cols());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.labels.size(); ++i) {
    Eigen::Index best = 0;
    (w * test.features.row(static_cast<Eigen::Index>(i)).transpose()).maxCoeff(&best);
    if (best == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.labels.size());
}

std::pair<Matrix, Vector> mean_quadratic(const ProblemSuite& suite) {
  if (!suite.is_quadratic()) {
    throw Error(ErrorCode::kUnknownConstants, "suite is not quadratic");
  }
  Matrix a = Matrix::Zero(suite.dim, suite.dim);
  Vector b = Vector::Zero(suite.dim);
  for (const auto& client : suite.clients) {
    const auto& q = std::get<QuadraticClient>(client);
    a += q.A;
    b += q.b;
  }
  const double n = static_cast<double>(suite.n_clients());
  return {a / n, b / n};
}

ProblemSuite make_quadratic_suite(std::vector<QuadraticClient> clients, double mu, double L) {
  if (clients.empty()) throw Error(ErrorCode::kInvalidArgument, "suite needs >= 1 client");
  if (mu < 0.0 || mu > L) {
    throw Error(ErrorCode::kInvalidConstants, "need 0 <= mu <= L");
  }
  ProblemSuite suite;
  suite.dim = clients.front().b.size();
  double sigma_l = 0.0;
  for (const auto& c : clients) {
    if (c.A.rows() != suite.dim || c.A.cols() != suite.dim || c.b.size() != suite.dim) {
      throw Error(ErrorCode::kDimensionMismatch, "quadratic clients must share dimension");
    }
    sigma_l = std::max(sigma_l, c.noise_std * std::sqrt(static_cast<double>(suite.dim)));
  }
  suite.clients.assign(clients.begin(), clients.end());

  KnownConstants known;
  known.mu = mu;
  known.L = L;
  known.sigma_l = sigma_l;
  const auto [a_bar, b_bar] = mean_quadratic(suite);
  Eigen::LLT<Matrix> llt(a_bar);
  if (llt.info() == Eigen::Success) {
    Vector x = llt.solve(b_bar);
    x += llt.solve(b_bar - a_bar * x);  // one step of iterative refinement
    known.f_star = global_loss(suite, x);
    known.x_star = std::move(x);
  }
  suite.known = std::move(known);
  return suite;
}

ProblemSuite gen_quadratic_suite(std::size_t n_clients, Eigen::Index dim, double mu, double L,
                                 double hetero, double noise_std, Rng& rng,
                                 const QuadraticSuiteOptions& options) {
  if (n_clients == 0 || dim <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "need n_clients >= 1 and dim >= 1");
  }
  if (!(mu >= 0.0) || mu > L) throw Error(ErrorCode::kInvalidConstants, "need 0 <= mu <= L");
  if (!(hetero >= 0.0) || !(noise_std >= 0.0) || !(options.b_scale >= 0.0)) {
    throw Error(ErrorCode::kInvalidConstants, "hetero, noise_std and b_scale must be >= 0");
  }

  const Vector b_bar = gaussian_vector(dim, options.b_scale, rng);
  const std::size_t n_atoms = options.pool_size > 0 ? options.pool_size : n_clients;
  if (n_atoms < n_clients) {
    throw Error(ErrorCode::kInvalidArgument, "pool_size must be >= n_clients");
  }

  std::vector<Matrix> atom_a;
  std::optional<Matrix> shared;
  if (options.per_client_spectrum) {
    atom_a.reserve(n_atoms);
    for (std::size_t j = 0; j < n_atoms; ++j) {
      atom_a.push_back(random_quadratic_matrix(dim, mu, L, rng));
    }
  } else {
    shared = shared_quadratic_matrix(dim, mu, L, rng);
  }

  std::vector<Vector> offsets;
  offsets.reserve(n_atoms);
  Vector offset_mean = Vector::Zero(dim);
  for (std::size_t j = 0; j < n_atoms; ++j) {
    offsets.push_back(gaussian_vector(dim, 1.0, rng));
    offset_mean += offsets.back();
  }
  offset_mean /= static_cast<double>(n_atoms);
  for (auto& u : offsets) u -= offset_mean;

  const std::size_t per_client = n_atoms / n_clients;
  std::vector<QuadraticClient> clients;
  clients.reserve(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) {
    QuadraticClient c;
    c.noise_std = noise_std;
    if (per_client == 1) {
      c.A = shared ? *shared : atom_a[i];
      c.b = b_bar + hetero * offsets[i];
    } else {
      Matrix a_sum = Matrix::Zero(dim, dim);
      Vector u_sum = Vector::Zero(dim);
      for (std::size_t j = i * per_client; j < (i + 1) * per_client; ++j) {
        if (!shared) a_sum += atom_a[j];
        u_sum += offsets[j];
      }
      const double k = static_cast<double>(per_client);
      c.A = shared ? *shared : Matrix(a_sum / k);
      c.b = b_bar + hetero * (u_sum / k);
    }
    clients.push_back(std::move(c));
  }
  return make_quadratic_suite(std::move(clients), mu, L);
}

ProblemSuite replicate_clients(const ProblemSuite& suite, std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::kInvalidArgument, "replication factor must be >= 1");
  ProblemSuite out;
  out.dim = suite.dim;
  out.known = suite.known;
  out.test_set = suite.test_set;
  out.clients.reserve(suite.n_clients() * factor);
  for (const auto& c : suite.clients) {
    for (std::size_t r = 0; r < factor; ++r) out.clients.push_back(c);
  }
  if (out.known && out.known->x_star) {
    out.known->f_star = global_loss(out, *out.known->x_star);
  }
  return out;
}

ProblemSuite gen_logreg_suite(std::size_t n_clients, const LogRegSuiteOptions& options,
                              Rng& rng) {
  if (options.num_classes < 2 || options.n_features < 1 || options.total_samples == 0) {
    throw Error(ErrorCode::kInvalidArgument, "logreg suite needs >= 2 classes and samples");
  }
  if (options.l2 < 0.0) throw Error(ErrorCode::kInvalidConstants, "l2 must be >= 0");
  const int n_classes = options.num_classes;
  const Eigen::Index n_raw = options.n_features;
  const Eigen::Index n_feat = n_raw + 1;

  Matrix means(n_classes, n_raw);
  for (int c = 0; c < n_classes; ++c) {
    means.row(c) = gaussian_vector(n_raw, options.class_separation, rng).transpose();
  }
  auto draw = [&](std::size_t count, Matrix& feats, std::vector<int>& labels) {
    feats.resize(static_cast<Eigen::Index>(count), n_feat);
    labels.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
      const int y = static_cast<int>(s % static_cast<std::size_t>(n_classes));
      labels[s] = y;
      const auto row = static_cast<Eigen::Index>(s);
      feats.row(row).head(n_raw) = means.row(y) + gaussian_vector(n_raw, 1.0, rng).transpose();
      feats(row, n_raw) = 1.0;
    }
  };

  Matrix train;
  std::vector<int> labels;
  draw(options.total_samples, train, labels);

  PartitionSpec spec;
  spec.n_clients = n_clients;
  if (options.concentration) {
    spec.scheme = DirichletSplit{*options.concentration};
  } else {
    spec.scheme = IidSplit{};
  }
  const Assignment assignment = partition(labels, spec, rng);

  ProblemSuite suite;
  suite.dim = static_cast<Eigen::Index>(n_classes) * n_feat;
  double smooth = 0.0;
  for (std::size_t i = 0; i < n_clients; ++i) {
    LogRegClient c;
    c.num_classes = n_classes;
    c.l2 = options.l2;
    const auto& members = assignment.members[i];
    c.features.resize(static_cast<Eigen::Index>(members.size()), n_feat);
    c.labels.reserve(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      c.features.row(static_cast<Eigen::Index>(k)) =
          train.row(static_cast<Eigen::Index>(members[k]));
      c.labels.push_back(labels[members[k]]);
      smooth = std::max(smooth, c.features.row(static_cast<Eigen::Index>(k)).squaredNorm());
    }
    suite.clients.emplace_back(std::move(c));
  }
  KnownConstants known;
  known.mu = options.l2;
  // Softmax cross-entropy Hessian is bounded by ½·max||a||² per sample.
  known.L = 0.5 * smooth + options.l2;
  suite.known = known;

  if (options.test_samples > 0) {
    LabeledData test;
    test.num_classes = n_classes;
    draw(options.test_samples, test.features, test.labels);
    suite.test_set = std::move(test);
  }
  return suite;
}

}  // namespace fedsim
