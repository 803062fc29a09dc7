#pragma once

#include "fedsim/algorithms.hpp"
#include "fedsim/fedcore.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

struct SuiteSpec {
  /// quadratic | logreg | file
  std::string kind = "quadratic";
  std::size_t n_clients = 10;
  Eigen::Index dim = 10;
  double mu = 0.1;
  double L = 1.0;
  double hetero = 1.0;
  double noise_std = 0.0;
  /// shared | per_client
  std::string spectrum = "shared";
  double b_scale = 1.0;
  std::size_t pool_size = 0;
  /// Repeat each generated client this many times.
  std::size_t replicate = 1;
  std::uint64_t seed = 1;
  /// Suite file for kind = file.
  std::string path;
  // logreg
  std::size_t samples = 5000;
  int classes = 4;
  Eigen::Index features = 5;
  double separation = 2.0;
  double l2 = 1e-3;
  std::optional<double> concentration;
  std::size_t test_samples = 0;
};

struct ParticipationSpec {
  /// full | uniform | bernoulli
  std::string scheme = "full";
  std::size_t clients = 1;
  double p = 1.0;
};

struct RunOptions {
  std::size_t rounds = 100;
  std::size_t eval_every = 1;
  std::uint64_t seed = 1;
  bool audit = false;
  bool audit_all_clients = false;
  unsigned threads = 1;
  /// Lower bound on the radius used for G and σ_g in the summary constants.
  double box_radius = 0.0;
  /// Suboptimality level for rounds-to-threshold; unset disables it.
  std::optional<double> threshold;
  /// Final suboptimality is the mean over this many last evaluated rounds.
  std::size_t tail_window = 1;
};

struct OutputOptions {
  std::string csv;
  std::string svg;
  std::string summary;
  /// Append a wall_ms column. Off by default so CSVs are reproducible bytes.
  bool wall_clock = false;
};

struct ExperimentConfig {
  SuiteSpec suite;
  /// fedavg | fedcm | fedadam | scaffold
  std::string algorithm = "fedavg";
  FedAdam adam;
  RoundConfig round;
  /// Replace round.local_lr by min(min(η_g,1)/(8LK), 1/(8LSK²)).
  bool theory_lr = false;
  ParticipationSpec participation;
  RunOptions run;
  OutputOptions output;
  double fault_alpha_shift = 0.0;

  /// Throws Error(kConfig) whose message starts with the offending key.
  void validate() const;

  AlgorithmDescriptor descriptor() const;
};

/// Every key the parser understands, in canonical order.
const std::vector<std::string>& config_keys();

/// Sets one dotted key from its textual value. Unknown keys and malformed
/// values throw Error(kConfig) naming the key.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Applies a "key=value" override.
void apply_override(ExperimentConfig& config, std::string_view assignment);

std::string get_config_value(const ExperimentConfig& config, std::string_view key);

/// Parses "key = value" lines; '#' starts a comment. Later lines win.
ExperimentConfig parse_config(std::istream& in, std::string_view source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config(write_config(c)) reproduces c.
void write_config(const ExperimentConfig& config, std::ostream& out);

/// Resolves the participation spec against the final client count.
ParticipationScheme make_scheme(const ParticipationSpec& spec, std::size_t n_clients);

}  // namespace fedsim
