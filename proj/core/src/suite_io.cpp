#include "fedsim/error.hpp"
#include "fedsim/format.hpp"
#include "fedsim/problems.hpp"

#include <istream>
#include <ostream>
#include <string>

// Layout:
//   fedsim-suite 1
//   kind quadratic|logreg
//   clients N
//   dim d
//   mu <real>  L <real>
//   then one block per client, and an optional "test" block for logreg.
// Matrices are written row-major, one row per line.

namespace fedsim {
namespace {

void write_row(std::ostream& out, const auto& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j > 0) out << ' ';
    out << format_real(row[j]);
  }
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail("unexpected end of file");
    return w;
  }

  void expect(const std::string& keyword) {
    const std::string w = word();
    if (w != keyword) fail("expected '" + keyword + "', got '" + w + "'");
  }

  double real() { return parse_real(word(), "suite file"); }

  long long integer() {
    const std::string w = word();
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(w, &pos);
      if (pos == w.size()) return v;
    } catch (const std::exception&) {
    }
    fail("expected an integer, got '" + w + "'");
  }

  std::size_t count() {
    const long long v = integer();
    if (v < 0) fail("negative count");
    return static_cast<std::size_t>(v);
  }

  Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = real();
    }
    return m;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw Error(ErrorCode::kIo, "suite file: " + msg);
  }

 private:
  std::istream& in_;
};

void write_labeled_rows(std::ostream& out, const Matrix& features, const std::vector<int>& labels) {
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    out << labels[static_cast<std::size_t>(r)] << ' ';
    write_row(out, features.row(r));
  }
}

void read_labeled_rows(Reader& reader, std::size_t n, Eigen::Index n_feat, int n_classes,
                       Matrix& features, std::vector<int>& labels) {
  features.resize(static_cast<Eigen::Index>(n), n_feat);
  labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const long long y = reader.integer();
    if (y < 0 || y >= n_classes) reader.fail("label out of range");
    labels[s] = static_cast<int>(y);
    for (Eigen::Index j = 0; j < n_feat; ++j) {
      features(static_cast<Eigen::Index>(s), j) = reader.real();
    }
  }
}

}  // namespace

void save_suite(const ProblemSuite& suite, std::ostream& out) {
  if (suite.clients.empty()) throw Error(ErrorCode::kInvalidArgument, "save_suite: empty suite");
  out << "fedsim-suite 1\n";
  out << "kind " << (suite.is_quadratic() ? "quadratic" : "logreg") << '\n';
  out << "clients " << suite.n_clients() << '\n';
  out << "dim " << suite.dim << '\n';
  const double mu = suite.known ? suite.known->mu : 0.0;
  const double L = suite.known ? suite.known->L : 0.0;
  out << "mu " << format_real(mu) << '\n';
  out << "L " << format_real(L) << '\n';

  if (suite.is_quadratic()) {
    for (std::size_t i = 0; i < suite.n_clients(); ++i) {
      const auto& q = std::get<QuadraticClient>(suite.clients[i]);
      out << "client " << i << '\n';
      out << "noise_std " << format_real(q.noise_std) << '\n';
      out << "A\n";
      for (Eigen::Index r = 0; r < q.A.rows(); ++r) write_row(out, q.A.row(r));
      out << "b\n";
      write_row(out, q.b);
    }
    return;
  }

  const auto& first = std::get<LogRegClient>(suite.clients.front());
  out << "classes " << first.num_classes << '\n';
  out << "features " << first.features.cols() << '\n';
  for (std::size_t i = 0; i < suite.n_clients(); ++i) {
    const auto& c = std::get<LogRegClient>(suite.clients[i]);
    out << "client " << i << '\n';
    out << "l2 " << format_real(c.l2) << '\n';
    out << "samples " << c.labels.size() << '\n';
    write_labeled_rows(out, c.features, c.labels);
  }
  if (suite.test_set) {
    out << "test " << suite.test_set->labels.size() << '\n';
    write_labeled_rows(out, suite.test_set->features, suite.test_set->labels);
  } else {
    out << "test 0\n";
  }
}

ProblemSuite load_suite(std::istream& in) {
  Reader reader(in);
  reader.expect("fedsim-suite");
  if (reader.integer() != 1) reader.fail("unsupported version");
  reader.expect("kind");
  const std::string kind = reader.word();
  reader.expect("clients");
  const std::size_t n_clients = reader.count();
  reader.expect("dim");
  const auto dim = static_cast<Eigen::Index>(reader.count());
  reader.expect("mu");
  const double mu = reader.real();
  reader.expect("L");
  const double L = reader.real();
  if (n_clients == 0 || dim == 0) reader.fail("empty suite");

  if (kind == "quadratic") {
    std::vector<QuadraticClient> clients(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) {
      reader.expect("client");
      if (reader.count() != i) reader.fail("clients out of order");
      reader.expect("noise_std");
      clients[i].noise_std = reader.real();
      reader.expect("A");
      clients[i].A = reader.matrix(dim, dim);
      reader.expect("b");
      clients[i].b = reader.matrix(dim, 1);
    }
    return make_quadratic_suite(std::move(clients), mu, L);
  }
  if (kind != "logreg") reader.fail("unknown kind '" + kind + "'");

  reader.expect("classes");
  const int n_classes = static_cast<int>(reader.count());
  reader.expect("features");
  const auto n_feat = static_cast<Eigen::Index>(reader.count());
  if (n_classes < 2 || static_cast<Eigen::Index>(n_classes) * n_feat != dim) {
    reader.fail("classes x features does not match dim");
  }
  ProblemSuite suite;
  suite.dim = dim;
  for (std::size_t i = 0; i < n_clients; ++i) {
    reader.expect("client");
    if (reader.count() != i) reader.fail("clients out of order");
    LogRegClient c;
    c.num_classes = n_classes;
    reader.expect("l2");
    c.l2 = reader.real();
    reader.expect("samples");
    read_labeled_rows(reader, reader.count(), n_feat, n_classes, c.features, c.labels);
    suite.clients.emplace_back(std::move(c));
  }
  reader.expect("test");
  const std::size_t n_test = reader.count();
  if (n_test > 0) {
    LabeledData test;
    test.num_classes = n_classes;
    read_labeled_rows(reader, n_test, n_feat, n_classes, test.features, test.labels);
    suite.test_set = std::move(test);
  }
  KnownConstants known;
  known.mu = mu;
  known.L = L;
  suite.known = known;
  return suite;
}

}  // namespace fedsim
