#pragma once

#include "fedsim/config.hpp"
#include "fedsim/diagnostics.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/problems.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fedsim {

struct RunSummary {
  std::string algorithm;
  double alpha = 1.0;
  double local_lr = 0.0;
  std::size_t rounds = 0;
  std::size_t rounds_completed = 0;
  /// Mean over the last run.tail_window evaluated rounds.
  double final_loss = 0.0;
  std::optional<double> final_suboptimality;
  std::optional<double> last_suboptimality;
  std::optional<double> best_suboptimality;
  /// Rounds executed before suboptimality first dropped to run.threshold.
  std::optional<std::size_t> rounds_to_threshold;
  /// f(Σ w_t z_t) − f*, reported for FedCM with α < 1 on suites with μ > 0.
  std::optional<double> weighted_iterate_suboptimality;
  double mean_drift = 0.0;
  std::optional<double> final_test_accuracy;
  /// Largest residual / (1 + norm) over audited rounds.
  std::optional<double> max_ema_relative;
  std::optional<double> max_z_relative;
  std::optional<TheoremConstants> constants;
  std::optional<std::size_t> nan_round;
};

struct RunResult {
  std::vector<RoundRecord> records;
  RunSummary summary;
  Vector final_params;
};

/// Generates (or loads) the suite described by config.suite.
ProblemSuite build_suite(const ExperimentConfig& config);

/// The starting point x_0 = 0.
Vector initial_point(const ProblemSuite& suite);

/// η_l = min(min(η_g, 1) / (8LK), 1 / (8LSK²)).
double theory_local_lr(double L, int local_steps, double expected_participants, double global_lr);

using RoundObserver = std::function<void(const RoundRecord&, const ServerState&)>;

/// Runs config.run.rounds rounds on `suite` without touching the file system.
/// Throws NanError; `partial`, when given, receives the records up to the
/// failure first.
RunResult simulate(const ExperimentConfig& config, const ProblemSuite& suite,
                   const RoundObserver& observer = {}, RunResult* partial = nullptr);

/// build_suite + simulate + the configured CSV/SVG/summary outputs.
RunResult run_experiment(const ExperimentConfig& config);

struct SweepCell {
  double alpha = 1.0;
  std::optional<RunSummary> summary;
  std::string error;
  std::string csv_path;
};

/// One FedCM run per α with shared seeds and suite. A failing cell records
/// its error and the sweep continues.
std::vector<SweepCell> run_sweep(const ExperimentConfig& base, const std::vector<double>& alphas);

/// `path` with "_alpha<α>" inserted before the extension.
std::string alpha_path(const std::string& path, double alpha);

struct AuditCell {
  std::string label;
  double alpha = 1.0;
  int local_steps = 1;
  std::string participation;
  std::size_t rounds = 0;
  double max_ema_relative = 0.0;
  double max_z_relative = 0.0;
  std::size_t worst_ema_round = 0;
  std::size_t worst_z_round = 0;
};

struct AuditFailure {
  std::string cell;
  std::size_t round = 0;
  std::string check;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct VerifyReport {
  std::vector<AuditCell> cells;
  std::size_t checks = 0;
  std::optional<AuditFailure> first_failure;
  bool passed() const { return !first_failure.has_value(); }
};

inline constexpr double kLemmaTolerance = 1e-10;
inline constexpr double kZTolerance = 1e-9;
inline constexpr double kGradCheckTolerance = 1e-5;

/// The audit matrix α ∈ {0.05, 0.1, 0.5, 1} × K ∈ {1, 5, 10} ×
/// {uniform S=2 of N=20, Bernoulli p=0.1 of N=100, full}, each FedCM cell run
/// for `rounds` rounds; then FedCM(α=1) vs FedAvg CSV identity per
/// participation scheme and finite-difference gradient checks.
/// The suite parameters, seeds and debug.fault_alpha_shift come from `base`.
VerifyReport verify(const ExperimentConfig& base, std::size_t rounds,
                    std::ostream* log = nullptr);

// Report writers.

void write_csv(const std::vector<RoundRecord>& records, std::ostream& out, bool wall_clock);
std::string csv_header(bool wall_clock);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart; a log10 y axis is used when every y is positive.
void write_svg(const std::vector<Series>& series, const std::string& title,
               const std::string& y_label, std::ostream& out);

/// One JSON object on a single line.
std::string summary_json(const RunSummary& summary, const ExperimentConfig& config);
std::string sweep_json(const SweepCell& cell);
void write_sweep_table(const std::vector<SweepCell>& cells, std::ostream& out);

/// The heterogeneous quadratic setting used for the α and drift studies.
ExperimentConfig standard_heterogeneous_config();

}  // namespace fedsim
