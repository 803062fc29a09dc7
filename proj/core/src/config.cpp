#include "fedsim/config.hpp"

#include "fedsim/error.hpp"
#include "fedsim/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

namespace fedsim {
namespace {

[[noreturn]] void bad(std::string_view key, const std::string& message) {
  throw Error(ErrorCode::kConfig, std::string(key) + ": " + message);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t to_uint(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    bad(key, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

double to_real(std::string_view key, std::string_view text) {
  return parse_real(trim(text), key);
}

bool to_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad(key, "expected true or false, got '" + std::string(text) + "'");
}

std::optional<double> to_opt_real(std::string_view key, std::string_view text) {
  if (trim(text) == "none") return std::nullopt;
  return to_real(key, text);
}

std::string show(bool v) { return v ? "true" : "false"; }
std::string show(double v) { return format_real(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(const std::optional<double>& v) { return v ? format_real(*v) : "none"; }

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class Member>
Field real_field(std::string key, Member member) {
  return {key,
          [key, member](ExperimentConfig& c, std::string_view v) { std::invoke(member, c) = to_real(key, v); },
          [member](const ExperimentConfig& c) { return show(std::invoke(member, c)); }};
}

template <class T, class Member>
Field uint_field(std::string key, Member member) {
  return {key,
          [key, member](ExperimentConfig& c, std::string_view v) {
            std::invoke(member, c) = static_cast<T>(to_uint(key, v));
          },
          [member](const ExperimentConfig& c) {
            return show(static_cast<std::uint64_t>(std::invoke(member, c)));
          }};
}

template <class Member>
Field bool_field(std::string key, Member member) {
  return {key,
          [key, member](ExperimentConfig& c, std::string_view v) { std::invoke(member, c) = to_bool(key, v); },
          [member](const ExperimentConfig& c) { return show(std::invoke(member, c)); }};
}

template <class Member>
Field string_field(std::string key, Member member) {
  return {key,
          [member](ExperimentConfig& c, std::string_view v) { std::invoke(member, c) = std::string(trim(v)); },
          [member](const ExperimentConfig& c) { return std::invoke(member, c); }};
}

template <class Member>
Field choice_field(std::string key, Member member, std::initializer_list<std::string_view> allowed) {
  std::vector<std::string_view> options(allowed);
  return {key,
          [key, member, options](ExperimentConfig& c, std::string_view v) {
            const auto t = trim(v);
            if (std::find(options.begin(), options.end(), t) == options.end()) {
              std::string list;
              for (auto a : options) list += (list.empty() ? "" : ", ") + std::string(a);
              bad(key, "expected one of {" + list + "}, got '" + std::string(t) + "'");
            }
            std::invoke(member, c) = std::string(t);
          },
          [member](const ExperimentConfig& c) { return std::invoke(member, c); }};
}

template <class Member>
Field opt_real_field(std::string key, Member member) {
  return {key,
          [key, member](ExperimentConfig& c, std::string_view v) { std::invoke(member, c) = to_opt_real(key, v); },
          [member](const ExperimentConfig& c) { return show(std::invoke(member, c)); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // suite
    f.push_back(choice_field("suite.kind", [](auto& c) -> auto& { return c.suite.kind; },
                             {"quadratic", "logreg", "file"}));
    f.push_back(uint_field<std::size_t>("suite.n_clients", [](auto& c) -> auto& { return c.suite.n_clients; }));
    f.push_back(uint_field<Eigen::Index>("suite.dim", [](auto& c) -> auto& { return c.suite.dim; }));
    f.push_back(real_field("suite.mu", [](auto& c) -> auto& { return c.suite.mu; }));
    f.push_back(real_field("suite.L", [](auto& c) -> auto& { return c.suite.L; }));
    f.push_back(real_field("suite.hetero", [](auto& c) -> auto& { return c.suite.hetero; }));
    f.push_back(real_field("suite.noise_std", [](auto& c) -> auto& { return c.suite.noise_std; }));
    f.push_back(choice_field("suite.spectrum", [](auto& c) -> auto& { return c.suite.spectrum; },
                             {"shared", "per_client"}));
    f.push_back(real_field("suite.b_scale", [](auto& c) -> auto& { return c.suite.b_scale; }));
    f.push_back(uint_field<std::size_t>("suite.pool_size", [](auto& c) -> auto& { return c.suite.pool_size; }));
    f.push_back(uint_field<std::size_t>("suite.replicate", [](auto& c) -> auto& { return c.suite.replicate; }));
    f.push_back(uint_field<std::uint64_t>("suite.seed", [](auto& c) -> auto& { return c.suite.seed; }));
    f.push_back(string_field("suite.path", [](auto& c) -> auto& { return c.suite.path; }));
    f.push_back(uint_field<std::size_t>("suite.samples", [](auto& c) -> auto& { return c.suite.samples; }));
    f.push_back(uint_field<int>("suite.classes", [](auto& c) -> auto& { return c.suite.classes; }));
    f.push_back(uint_field<Eigen::Index>("suite.features", [](auto& c) -> auto& { return c.suite.features; }));
    f.push_back(real_field("suite.separation", [](auto& c) -> auto& { return c.suite.separation; }));
    f.push_back(real_field("suite.l2", [](auto& c) -> auto& { return c.suite.l2; }));
    f.push_back(opt_real_field("suite.concentration", [](auto& c) -> auto& { return c.suite.concentration; }));
    f.push_back(uint_field<std::size_t>("suite.test_samples", [](auto& c) -> auto& { return c.suite.test_samples; }));
    // algorithm
    f.push_back(choice_field("algorithm.kind", [](auto& c) -> auto& { return c.algorithm; },
                             {"fedavg", "fedcm", "fedadam", "scaffold"}));
    f.push_back(real_field("algorithm.beta1", [](auto& c) -> auto& { return c.adam.beta1; }));
    f.push_back(real_field("algorithm.beta2", [](auto& c) -> auto& { return c.adam.beta2; }));
    f.push_back(real_field("algorithm.tau", [](auto& c) -> auto& { return c.adam.tau; }));
    // round
    f.push_back(real_field("round.local_lr", [](auto& c) -> auto& { return c.round.local_lr; }));
    f.push_back(real_field("round.global_lr", [](auto& c) -> auto& { return c.round.global_lr; }));
    f.push_back(uint_field<int>("round.local_steps", [](auto& c) -> auto& { return c.round.local_steps; }));
    f.push_back(real_field("round.alpha", [](auto& c) -> auto& { return c.round.alpha; }));
    f.push_back(Field{"round.batch_size",
                      [](C& c, std::string_view v) {
                        if (trim(v) == "full") {
                          c.round.batch_size.reset();
                        } else {
                          c.round.batch_size = static_cast<std::size_t>(to_uint("round.batch_size", v));
                        }
                      },
                      [](const C& c) {
                        return c.round.batch_size ? std::to_string(*c.round.batch_size) : std::string("full");
                      }});
    f.push_back(real_field("round.lr_decay", [](auto& c) -> auto& { return c.round.lr_decay; }));
    f.push_back(bool_field("round.scale_global_lr", [](auto& c) -> auto& { return c.round.scale_global_lr; }));
    f.push_back(real_field("round.clip_norm", [](auto& c) -> auto& { return c.round.clip_norm; }));
    f.push_back(bool_field("round.theory_lr", [](auto& c) -> auto& { return c.theory_lr; }));
    // participation
    f.push_back(choice_field("participation.scheme", [](auto& c) -> auto& { return c.participation.scheme; },
                             {"full", "uniform", "bernoulli"}));
    f.push_back(uint_field<std::size_t>("participation.clients",
                                        [](auto& c) -> auto& { return c.participation.clients; }));
    f.push_back(real_field("participation.p", [](auto& c) -> auto& { return c.participation.p; }));
    // run
    f.push_back(uint_field<std::size_t>("run.rounds", [](auto& c) -> auto& { return c.run.rounds; }));
    f.push_back(uint_field<std::size_t>("run.eval_every", [](auto& c) -> auto& { return c.run.eval_every; }));
    f.push_back(uint_field<std::uint64_t>("run.seed", [](auto& c) -> auto& { return c.run.seed; }));
    f.push_back(bool_field("run.audit", [](auto& c) -> auto& { return c.run.audit; }));
    f.push_back(bool_field("run.audit_all_clients", [](auto& c) -> auto& { return c.run.audit_all_clients; }));
    f.push_back(uint_field<unsigned>("run.threads", [](auto& c) -> auto& { return c.run.threads; }));
    f.push_back(real_field("run.box_radius", [](auto& c) -> auto& { return c.run.box_radius; }));
    f.push_back(opt_real_field("run.threshold", [](auto& c) -> auto& { return c.run.threshold; }));
    f.push_back(uint_field<std::size_t>("run.tail_window", [](auto& c) -> auto& { return c.run.tail_window; }));
    // output
    f.push_back(string_field("output.csv", [](auto& c) -> auto& { return c.output.csv; }));
    f.push_back(string_field("output.svg", [](auto& c) -> auto& { return c.output.svg; }));
    f.push_back(string_field("output.summary", [](auto& c) -> auto& { return c.output.summary; }));
    f.push_back(bool_field("output.wall_clock", [](auto& c) -> auto& { return c.output.wall_clock; }));
    // debug
    f.push_back(real_field("debug.fault_alpha_shift", [](auto& c) -> auto& { return c.fault_alpha_shift; }));
    return f;
  }();
  return table;
}

const Field& find_field(std::string_view key) {
  const auto& table = fields();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
  if (it == table.end()) bad(key, "unknown key");
  return *it;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (suite.n_clients < 1) bad("suite.n_clients", "must be >= 1");
  if (suite.kind == "quadratic") {
    if (suite.dim < 1) bad("suite.dim", "must be >= 1");
    if (!(suite.mu > 0.0)) bad("suite.mu", "must be positive");
    if (!(suite.L >= suite.mu)) bad("suite.L", "must be >= suite.mu");
    if (!(suite.hetero >= 0.0)) bad("suite.hetero", "must be non-negative");
    if (!(suite.noise_std >= 0.0)) bad("suite.noise_std", "must be non-negative");
    if (!(suite.b_scale >= 0.0)) bad("suite.b_scale", "must be non-negative");
    if (suite.pool_size != 0 && suite.pool_size < suite.n_clients) {
      bad("suite.pool_size", "must be 0 or >= suite.n_clients");
    }
  } else if (suite.kind == "logreg") {
    if (suite.classes < 2) bad("suite.classes", "must be >= 2");
    if (suite.features < 1) bad("suite.features", "must be >= 1");
    if (suite.samples < suite.n_clients) bad("suite.samples", "must be >= suite.n_clients");
    if (!(suite.l2 >= 0.0)) bad("suite.l2", "must be non-negative");
    if (suite.concentration && !(*suite.concentration > 0.0)) {
      bad("suite.concentration", "must be positive or none");
    }
  } else if (suite.path.empty()) {
    bad("suite.path", "required when suite.kind = file");
  }
  if (suite.replicate < 1) bad("suite.replicate", "must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) bad("algorithm.beta1", "must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) bad("algorithm.beta2", "must lie in [0, 1)");
  if (!(adam.tau > 0.0)) bad("algorithm.tau", "must be positive");
  round.validate();
  if (participation.scheme == "uniform" && participation.clients < 1) {
    bad("participation.clients", "must be >= 1");
  }
  if (participation.scheme == "bernoulli" && !(participation.p > 0.0 && participation.p <= 1.0)) {
    bad("participation.p", "must lie in (0, 1]");
  }
  if (run.rounds < 1) bad("run.rounds", "must be >= 1");
  if (run.eval_every < 1) bad("run.eval_every", "must be >= 1");
  if (run.tail_window < 1) bad("run.tail_window", "must be >= 1");
  if (run.threads < 1) bad("run.threads", "must be >= 1");
  if (!(run.box_radius >= 0.0)) bad("run.box_radius", "must be non-negative");
  if (run.threshold && !(*run.threshold > 0.0)) bad("run.threshold", "must be positive or none");
  if (!std::isfinite(fault_alpha_shift)) bad("debug.fault_alpha_shift", "must be finite");
}

AlgorithmDescriptor ExperimentConfig::descriptor() const {
  if (algorithm == "fedcm") return FedCM{};
  if (algorithm == "fedadam") return adam;
  if (algorithm == "scaffold") return Scaffold{};
  return FedAvg{};
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  find_field(trim(key)).set(config, value);
}

std::string get_config_value(const ExperimentConfig& config, std::string_view key) {
  return find_field(trim(key)).get(config);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::kConfig, "override '" + std::string(assignment) + "': expected key=value");
  }
  set_config_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

ExperimentConfig parse_config(std::istream& in, std::string_view source) {
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, std::string(source) + ":" + std::to_string(line_no) +
                                          ": expected 'key = value'");
    }
    try {
      set_config_value(config, view.substr(0, eq), view.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig,
                  std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

void write_config(const ExperimentConfig& config, std::ostream& out) {
  for (const auto& f : fields()) out << f.key << " = " << f.get(config) << '\n';
}

ParticipationScheme make_scheme(const ParticipationSpec& spec, std::size_t n_clients) {
  if (spec.scheme == "uniform") return FixedUniform{spec.clients};
  if (spec.scheme == "bernoulli") return Bernoulli{spec.p};
  return FixedUniform{n_clients};
}

}  // namespace fedsim
