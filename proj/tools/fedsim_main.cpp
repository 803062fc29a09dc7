// fedsim: command-line front end for the federated optimization simulator.
//
// Exit status: 0 success, 1 unexpected failure, 2 configuration error,
// 3 run aborted on a non-finite value, 4 audit failure.

#include "fedsim/config.hpp"
#include "fedsim/error.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/format.hpp"
#include "fedsim/partition.hpp"
#include "fedsim/problems.hpp"
#include "fedsim/rng.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNan = 3;
constexpr int kExitAudit = 4;

// FEDSIM_LOG=quiet silences progress messages. It never changes results.
bool quiet() {
  const char* level = std::getenv("FEDSIM_LOG");
  return level != nullptr && std::string(level) == "quiet";
}

void note(const std::string& message) {
  if (!quiet()) std::cerr << message << '\n';
}

fedsim::ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  fedsim::ExperimentConfig config = fedsim::load_config(path);
  for (const auto& o : overrides) fedsim::apply_override(config, o);
  config.validate();
  return config;
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides) {
  const auto config = load(path, overrides);
  const auto result = fedsim::run_experiment(config);
  std::cout << fedsim::summary_json(result.summary, config) << '\n';
  if (!config.output.csv.empty()) note("wrote " + config.output.csv);
  return kExitOk;
}

int cmd_sweep(const std::string& path, const std::vector<std::string>& overrides,
              const std::vector<double>& alphas) {
  const auto config = load(path, overrides);
  const auto cells = fedsim::run_sweep(config, alphas);
  fedsim::write_sweep_table(cells, std::cout);
  for (const auto& cell : cells) {
    if (!cell.error.empty()) return cell.summary && cell.summary->nan_round ? kExitNan : kExitFailure;
  }
  return kExitOk;
}

int cmd_partition(const std::string& labels_path, const std::string& spec_text, std::uint64_t seed,
                  const std::string& out_path) {
  std::ifstream in(labels_path);
  if (!in) throw fedsim::Error(fedsim::ErrorCode::kConfig, "cannot open labels file '" + labels_path + "'");
  const std::vector<int> labels = fedsim::read_labels(in);
  const fedsim::PartitionSpec spec = fedsim::parse_partition_spec(spec_text);
  fedsim::Rng rng = fedsim::make_stream(seed, fedsim::StreamTag::kPartition);
  const fedsim::Assignment assignment = fedsim::partition(labels, spec, rng);
  if (out_path.empty()) {
    fedsim::write_assignment(assignment, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw fedsim::Error(fedsim::ErrorCode::kIo, "cannot write '" + out_path + "'");
    fedsim::write_assignment(assignment, out);
  }
  const auto stats = fedsim::partition_stats(assignment, labels);
  note("clients=" + std::to_string(assignment.members.size()) +
       " quota=" + std::to_string(assignment.quota) +
       " mean_tv=" + fedsim::format_real(stats.mean_tv) +
       " adjustments=" + std::to_string(assignment.adjustments.size()));
  return kExitOk;
}

int cmd_verify(const std::string& path, const std::vector<std::string>& overrides, std::size_t rounds) {
  const auto config = load(path, overrides);
  const auto report = fedsim::verify(config, rounds, quiet() ? nullptr : &std::cerr);
  if (report.passed()) {
    std::cout << "verify: all " << report.checks << " checks passed\n";
    return kExitOk;
  }
  const auto& f = *report.first_failure;
  std::cout << "verify: FAILED round=" << f.round << " check=" << f.check
            << " residual=" << fedsim::format_real(f.residual)
            << " tolerance=" << fedsim::format_real(f.tolerance) << " cell=\"" << f.cell << "\"\n";
  return kExitAudit;
}

int cmd_export(const std::string& path, const std::vector<std::string>& overrides,
               const std::string& out_path) {
  const auto config = load(path, overrides);
  const auto suite = fedsim::build_suite(config);
  std::ofstream out(out_path);
  if (!out) throw fedsim::Error(fedsim::ErrorCode::kIo, "cannot write '" + out_path + "'");
  fedsim::save_suite(suite, out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated optimization simulator"};
  app.require_subcommand(1);

  std::vector<std::string> overrides;
  std::string config_path;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--set", overrides, "Override a config key (key=value)")->take_all();

  std::vector<double> alphas;
  auto* sweep = app.add_subcommand("sweep", "Run FedCM over a list of alpha values");
  sweep->add_option("config", config_path, "Config file")->required();
  sweep->add_option("--alphas", alphas, "Alpha values, space or comma separated")
      ->required()
      ->delimiter(',');
  sweep->add_option("--set", overrides, "Override a config key (key=value)")->take_all();

  std::string labels_path;
  std::string spec_text;
  std::uint64_t partition_seed = 0;
  std::string partition_out;
  auto* part = app.add_subcommand("partition", "Split a label file across clients");
  part->add_option("labels", labels_path, "File with one integer label per line")->required();
  part->add_option("spec", spec_text, "iid:N or dirichlet:CONCENTRATION:N")->required();
  part->add_option("--seed", partition_seed, "Partition seed");
  part->add_option("--out", partition_out, "Output file (default stdout)");

  std::size_t verify_rounds = 50;
  auto* ver = app.add_subcommand("verify", "Run the invariant audit matrix");
  ver->add_option("config", config_path, "Config file")->required();
  ver->add_option("--rounds", verify_rounds, "Rounds per audited cell");
  ver->add_option("--set", overrides, "Override a config key (key=value)")->take_all();

  std::string export_out;
  auto* exp = app.add_subcommand("export-suite", "Write the configured problem suite to a file");
  exp->add_option("config", config_path, "Config file")->required();
  exp->add_option("out", export_out, "Output suite file")->required();
  exp->add_option("--set", overrides, "Override a config key (key=value)")->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, overrides);
    if (*sweep) return cmd_sweep(config_path, overrides, alphas);
    if (*part) return cmd_partition(labels_path, spec_text, partition_seed, partition_out);
    if (*ver) return cmd_verify(config_path, overrides, verify_rounds);
    if (*exp) return cmd_export(config_path, overrides, export_out);
  } catch (const fedsim::NanError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNan;
  } catch (const fedsim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool config_error = e.code() == fedsim::ErrorCode::kConfig ||
                              e.code() == fedsim::ErrorCode::kInvalidScheme ||
                              e.code() == fedsim::ErrorCode::kInvalidConstants;
    return config_error ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
