#include "fedsim/experiment.hpp"

#include "fedsim/error.hpp"
#include "fedsim/format.hpp"
#include "fedsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fedsim {
namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return out;
}

Series suboptimality_series(const std::vector<RoundRecord>& records, const std::string& label) {
  Series s;
  s.label = label;
  for (const auto& r : records) {
    if (!r.evaluated) continue;
    s.x.push_back(static_cast<double>(r.round));
    s.y.push_back(r.suboptimality ? *r.suboptimality : r.global_loss);
  }
  return s;
}

bool has_known_optimum(const ProblemSuite& suite) {
  return suite.known && suite.known->f_star.has_value();
}

void write_outputs(const ExperimentConfig& config, const RunResult& result) {
  if (!config.output.csv.empty()) {
    auto out = open_output(config.output.csv);
    write_csv(result.records, out, config.output.wall_clock);
  }
  if (!config.output.svg.empty()) {
    auto out = open_output(config.output.svg);
    const std::string label = result.summary.algorithm;
    write_svg({suboptimality_series(result.records, label)}, label,
              result.summary.final_suboptimality ? "f(x) - f*" : "f(x)", out);
  }
  if (!config.output.summary.empty()) {
    auto out = open_output(config.output.summary);
    out << summary_json(result.summary, config) << '\n';
  }
}

}  // namespace

ProblemSuite build_suite(const ExperimentConfig& config) {
  const SuiteSpec& spec = config.suite;
  Rng rng = make_stream(spec.seed, StreamTag::kSuite);
  ProblemSuite suite;
  if (spec.kind == "quadratic") {
    QuadraticSuiteOptions options;
    options.per_client_spectrum = spec.spectrum == "per_client";
    options.b_scale = spec.b_scale;
    options.pool_size = spec.pool_size;
    suite = gen_quadratic_suite(spec.n_clients, spec.dim, spec.mu, spec.L, spec.hetero,
                                spec.noise_std, rng, options);
  } else if (spec.kind == "logreg") {
    LogRegSuiteOptions options;
    options.total_samples = spec.samples;
    options.num_classes = spec.classes;
    options.n_features = spec.features;
    options.class_separation = spec.separation;
    options.l2 = spec.l2;
    options.concentration = spec.concentration;
    options.test_samples = spec.test_samples;
    suite = gen_logreg_suite(spec.n_clients, options, rng);
  } else {
    std::ifstream in(spec.path);
    if (!in) throw Error(ErrorCode::kConfig, "suite.path: cannot open '" + spec.path + "'");
    suite = load_suite(in);
  }
  if (spec.replicate > 1) suite = replicate_clients(suite, spec.replicate);
  return suite;
}

Vector initial_point(const ProblemSuite& suite) { return Vector::Zero(suite.dim); }

double theory_local_lr(double L, int local_steps, double expected_participants,
                       double global_lr) {
  if (!(L > 0.0) || local_steps < 1 || !(expected_participants > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "theory_local_lr: need L > 0, K >= 1, S > 0");
  }
  const double k = static_cast<double>(local_steps);
  return std::min(std::min(global_lr, 1.0) / (8.0 * L * k),
                  1.0 / (8.0 * L * expected_participants * k * k));
}

RunResult simulate(const ExperimentConfig& config, const ProblemSuite& suite,
                   const RoundObserver& observer, RunResult* partial) {
  config.validate();
  const std::size_t n = suite.n_clients();
  if (n == 0) throw Error(ErrorCode::kConfig, "suite: no clients");
  const ParticipationScheme scheme = make_scheme(config.participation, n);
  const double expected = expected_participants(scheme, n);
  const AlgorithmDescriptor algorithm = config.descriptor();
  const bool is_fedcm = std::holds_alternative<FedCM>(algorithm);

  RoundConfig round = config.round;
  if (config.theory_lr) {
    if (!suite.known) {
      throw Error(ErrorCode::kConfig, "round.theory_lr: suite has no known smoothness constant");
    }
    round.local_lr =
        theory_local_lr(suite.known->L, round.local_steps, expected, round.global_lr);
  }
  round.validate();

  RunResult result;
  result.summary.algorithm = std::string(algorithm_name(algorithm));
  result.summary.alpha = is_fedcm ? round.alpha : 1.0;
  result.summary.local_lr = round.local_lr;
  result.summary.rounds = config.run.rounds;

  const Vector x0 = initial_point(suite);
  ServerState state = ServerState::initial(x0);
  AlgorithmState algorithm_state = AlgorithmState::initial(algorithm, n, suite.dim);

  const bool track_z = is_fedcm && round.alpha < 1.0 && suite.known && suite.known->mu > 0.0 &&
                       has_known_optimum(suite);
  std::vector<Vector> z_list;

  RoundOptions options;
  options.audit = config.run.audit;
  options.audit_all_clients = config.run.audit_all_clients;
  options.threads = config.run.threads;
  options.fault_alpha_shift = config.fault_alpha_shift;

  double drift_total = 0.0;
  for (std::size_t t = 0; t < config.run.rounds; ++t) {
    options.evaluate = (t + 1) % config.run.eval_every == 0 || t + 1 == config.run.rounds;
    if (track_z) z_list.push_back(z_sequence(state.params, state.prev_params, round.alpha, t));
    RoundResult step;
    try {
      step = run_round(state, algorithm_state, algorithm, suite, round, scheme, config.run.seed,
                       options);
      if (step.record.evaluated && !std::isfinite(step.record.global_loss)) {
        throw NanError(t, "global loss");
      }
    } catch (const NanError& e) {
      result.summary.nan_round = e.round();
      result.summary.rounds_completed = t;
      result.final_params = state.params;
      if (partial) *partial = result;
      throw;
    }
    state = std::move(step.next);
    RoundRecord& rec = step.record;
    drift_total += rec.drift;
    if (rec.ema_residual) {
      const double rel = *rec.ema_residual / (1.0 + rec.delta_norm);
      result.summary.max_ema_relative = std::max(result.summary.max_ema_relative.value_or(0.0), rel);
    }
    if (rec.z_residual) {
      const double rel = *rec.z_residual / (1.0 + rec.z_norm);
      result.summary.max_z_relative = std::max(result.summary.max_z_relative.value_or(0.0), rel);
    }
    if (rec.evaluated && rec.suboptimality) {
      if (!result.summary.best_suboptimality || *rec.suboptimality < *result.summary.best_suboptimality) {
        result.summary.best_suboptimality = rec.suboptimality;
      }
      if (config.run.threshold && !result.summary.rounds_to_threshold &&
          *rec.suboptimality <= *config.run.threshold) {
        result.summary.rounds_to_threshold = t + 1;
      }
    }
    if (observer) observer(rec, state);
    result.records.push_back(std::move(rec));
  }
  result.summary.rounds_completed = config.run.rounds;
  result.final_params = state.params;
  result.summary.mean_drift = drift_total / static_cast<double>(config.run.rounds);

  std::vector<const RoundRecord*> evaluated;
  for (const auto& r : result.records) {
    if (r.evaluated) evaluated.push_back(&r);
  }
  const std::size_t window = std::min(config.run.tail_window, evaluated.size());
  double loss_sum = 0.0;
  double sub_sum = 0.0;
  for (std::size_t j = evaluated.size() - window; j < evaluated.size(); ++j) {
    loss_sum += evaluated[j]->global_loss;
    sub_sum += evaluated[j]->suboptimality.value_or(0.0);
  }
  result.summary.final_loss = loss_sum / static_cast<double>(window);
  if (has_known_optimum(suite)) {
    result.summary.final_suboptimality = sub_sum / static_cast<double>(window);
    result.summary.last_suboptimality = evaluated.back()->suboptimality;
  }
  if (evaluated.back()->test_accuracy) {
    result.summary.final_test_accuracy = evaluated.back()->test_accuracy;
  }

  if (track_z) {
    z_list.push_back(z_sequence(state.params, state.prev_params, round.alpha, config.run.rounds));
    try {
      const Vector z_bar = weighted_average_iterate(z_list, suite.known->mu, round.global_lr_at(0));
      result.summary.weighted_iterate_suboptimality =
          global_loss(suite, z_bar) - *suite.known->f_star;
    } catch (const Error&) {
      // Step size outside the weights' domain; the field stays empty.
    }
  }

  if (suite.is_quadratic() && suite.known && suite.known->x_star) {
    RoundConfig constants_round = round;
    if (!is_fedcm) constants_round.alpha = 1.0;
    result.summary.constants =
        theorem_constants(suite, constants_round, expected, x0, config.run.box_radius);
  }
  return result;
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const ProblemSuite suite = build_suite(config);
  RunResult partial;
  try {
    RunResult result = simulate(config, suite, {}, &partial);
    write_outputs(config, result);
    return result;
  } catch (const NanError&) {
    write_outputs(config, partial);
    throw;
  }
}

std::string alpha_path(const std::string& path, double alpha) {
  const std::string tag = "_alpha" + format_real(alpha);
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& base, const std::vector<double>& alphas) {
  if (alphas.empty()) throw Error(ErrorCode::kConfig, "sweep: no alphas given");
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) {
      throw Error(ErrorCode::kConfig, "sweep: alpha " + format_real(a) + " outside (0, 1]");
    }
  }
  base.validate();
  const ProblemSuite suite = build_suite(base);

  std::vector<SweepCell> cells;
  std::vector<Series> series;
  for (double a : alphas) {
    SweepCell cell;
    cell.alpha = a;
    ExperimentConfig cfg = base;
    cfg.algorithm = "fedcm";
    cfg.round.alpha = a;
    if (!base.output.csv.empty()) cell.csv_path = alpha_path(base.output.csv, a);
    RunResult partial;
    try {
      RunResult result = simulate(cfg, suite, {}, &partial);
      cell.summary = result.summary;
      if (!cell.csv_path.empty()) {
        auto out = open_output(cell.csv_path);
        write_csv(result.records, out, base.output.wall_clock);
      }
      series.push_back(suboptimality_series(result.records, "alpha=" + format_real(a)));
    } catch (const NanError& e) {
      cell.error = e.what();
      cell.summary = partial.summary;
      if (!cell.csv_path.empty()) {
        auto out = open_output(cell.csv_path);
        write_csv(partial.records, out, base.output.wall_clock);
      }
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }

  if (!base.output.summary.empty()) {
    auto out = open_output(base.output.summary);
    for (const auto& cell : cells) out << sweep_json(cell) << '\n';
  }
  if (!base.output.svg.empty() && !series.empty()) {
    auto out = open_output(base.output.svg);
    write_svg(series, "alpha sweep", has_known_optimum(suite) ? "f(x) - f*" : "f(x)", out);
  }
  return cells;
}

VerifyReport verify(const ExperimentConfig& base, std::size_t rounds, std::ostream* log) {
  if (rounds < 1) throw Error(ErrorCode::kConfig, "verify: rounds must be >= 1");
  ExperimentConfig cfg = base;
  cfg.run.audit = true;
  cfg.run.rounds = rounds;
  cfg.run.eval_every = 1;
  cfg.run.threshold.reset();
  cfg.round.lr_decay = 1.0;
  cfg.theory_lr = false;
  cfg.output = OutputOptions{};
  cfg.suite.replicate = 1;

  struct Participation {
    std::string label;
    std::size_t n_clients;
    ParticipationSpec spec;
  };
  const std::vector<Participation> participations = {
      {"uniform S=2 N=20", 20, {"uniform", 2, 1.0}},
      {"bernoulli p=0.1 N=100", 100, {"bernoulli", 1, 0.1}},
      {"full N=20", 20, {"full", 1, 1.0}},
  };
  const std::vector<double> alphas = {0.05, 0.1, 0.5, 1.0};
  const std::vector<int> steps = {1, 5, 10};

  VerifyReport report;
  auto fail = [&](AuditFailure f) {
    if (!report.first_failure) report.first_failure = std::move(f);
  };

  for (const auto& part : participations) {
    ExperimentConfig pcfg = cfg;
    if (pcfg.suite.kind != "file") {
      pcfg.suite.n_clients = part.n_clients;
      if (pcfg.suite.pool_size != 0 && pcfg.suite.pool_size < part.n_clients) {
        pcfg.suite.pool_size = part.n_clients;
      }
      if (pcfg.suite.kind == "logreg") {
        pcfg.suite.samples = std::max(pcfg.suite.samples, part.n_clients);
      }
    }
    pcfg.participation = part.spec;
    const ProblemSuite suite = build_suite(pcfg);
    if (part.spec.scheme == "uniform") {
      pcfg.participation.clients = std::min<std::size_t>(2, suite.n_clients());
    }

    for (double alpha : alphas) {
      for (int k : steps) {
        ExperimentConfig cell_cfg = pcfg;
        cell_cfg.algorithm = "fedcm";
        cell_cfg.round.alpha = alpha;
        cell_cfg.round.local_steps = k;
        AuditCell cell;
        cell.alpha = alpha;
        cell.local_steps = k;
        cell.participation = part.label;
        cell.rounds = rounds;
        cell.label = "fedcm alpha=" + format_real(alpha) + " K=" + std::to_string(k) + " " + part.label;
        simulate(cell_cfg, suite, [&](const RoundRecord& r, const ServerState&) {
          report.checks += 2;
          const double ema_rel = r.ema_residual.value_or(0.0) / (1.0 + r.delta_norm);
          const double z_rel = r.z_residual.value_or(0.0) / (1.0 + r.z_norm);
          if (ema_rel > cell.max_ema_relative) {
            cell.max_ema_relative = ema_rel;
            cell.worst_ema_round = r.round;
          }
          if (z_rel > cell.max_z_relative) {
            cell.max_z_relative = z_rel;
            cell.worst_z_round = r.round;
          }
          if (!r.ema_residual || !(ema_rel <= kLemmaTolerance)) {
            fail({cell.label, r.round, "lemma1", r.ema_residual.value_or(NAN),
                  kLemmaTolerance * (1.0 + r.delta_norm)});
          }
          if (!r.z_residual || !(z_rel <= kZTolerance)) {
            fail({cell.label, r.round, "z_update", r.z_residual.value_or(NAN),
                  kZTolerance * (1.0 + r.z_norm)});
          }
        });
        if (log) {
          *log << cell.label << ": lemma1 " << format_real(cell.max_ema_relative) << " z "
               << format_real(cell.max_z_relative) << '\n';
        }
        report.cells.push_back(std::move(cell));
      }
    }

    // FedCM with alpha = 1 must reproduce FedAvg byte for byte.
    ExperimentConfig avg_cfg = pcfg;
    avg_cfg.algorithm = "fedavg";
    avg_cfg.round.local_steps = 5;
    avg_cfg.fault_alpha_shift = 0.0;
    ExperimentConfig cm_cfg = avg_cfg;
    cm_cfg.algorithm = "fedcm";
    cm_cfg.round.alpha = 1.0;
    cm_cfg.fault_alpha_shift = cfg.fault_alpha_shift;
    std::ostringstream avg_csv;
    std::ostringstream cm_csv;
    write_csv(simulate(avg_cfg, suite).records, avg_csv, false);
    write_csv(simulate(cm_cfg, suite).records, cm_csv, false);
    ++report.checks;
    if (avg_csv.str() != cm_csv.str()) {
      std::istringstream a(avg_csv.str());
      std::istringstream b(cm_csv.str());
      std::string la;
      std::string lb;
      std::size_t row = 0;
      while (std::getline(a, la) && std::getline(b, lb) && la == lb) ++row;
      fail({"reduction " + part.label, row == 0 ? 0 : row - 1, "fedcm(alpha=1) == fedavg", 1.0, 0.0});
    }
    if (log) *log << "reduction " << part.label << ": " << (avg_csv.str() == cm_csv.str() ? "identical" : "differs") << '\n';

    // Analytic gradients against central differences.
    Rng probe = make_stream(cfg.run.seed, StreamTag::kProbe, part.n_clients);
    std::normal_distribution<double> normal;
    const std::size_t probes = std::min<std::size_t>(3, suite.n_clients());
    const double h = 1e-6;
    for (std::size_t c = 0; c < probes; ++c) {
      const ClientObjective& client = suite.clients[c];
      Vector x(suite.dim);
      for (auto& v : x) v = normal(probe);
      const Vector g = client_grad(client, x);
      double worst = 0.0;
      for (Eigen::Index j = 0; j < suite.dim; ++j) {
        Vector xp = x;
        Vector xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd = (client_loss(client, xp) - client_loss(client, xm)) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - g[j]) / (1.0 + std::abs(g[j])));
      }
      ++report.checks;
      if (!(worst <= kGradCheckTolerance)) {
        fail({"gradient client " + std::to_string(c) + " " + part.label, 0, "finite_difference",
              worst, kGradCheckTolerance});
      }
    }
  }
  return report;
}

ExperimentConfig standard_heterogeneous_config() {
  ExperimentConfig c;
  c.suite.kind = "quadratic";
  c.suite.n_clients = 100;
  c.suite.dim = 10;
  c.suite.mu = 0.1;
  c.suite.L = 1.0;
  c.suite.hetero = 1.0;
  c.suite.noise_std = 0.5;
  c.suite.spectrum = "per_client";
  c.suite.b_scale = 5.0;
  c.algorithm = "fedcm";
  c.round.local_lr = 0.1;
  c.round.global_lr = 1.0;
  c.round.local_steps = 5;
  c.round.alpha = 0.1;
  c.round.scale_global_lr = true;
  c.participation.scheme = "bernoulli";
  c.participation.p = 0.1;
  c.run.rounds = 400;
  c.run.eval_every = 1;
  c.run.tail_window = 50;
  return c;
}

}  // namespace fedsim
