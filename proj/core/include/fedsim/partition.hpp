#pragma once

#include "fedsim/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fedsim {

struct IidSplit {};

/// Per-client class proportions q ~ Dir(concentration · 1).
struct DirichletSplit {
  double concentration = 1.0;
};

/// Balanced split: every client receives floor(total / N) samples and the
/// remainder is discarded.
struct PartitionSpec {
  std::variant<IidSplit, DirichletSplit> scheme;
  std::size_t n_clients = 1;
};

/// A class ran out while filling a client's quota; `count` samples were moved
/// from `from_class` to `to_class`.
struct PoolAdjustment {
  std::size_t client = 0;
  std::size_t from_class = 0;
  std::size_t to_class = 0;
  std::size_t count = 0;
};

struct Assignment {
  static constexpr std::int64_t kDiscarded = -1;

  /// client id per sample index, kDiscarded for dropped leftovers.
  std::vector<std::int64_t> client_of;
  /// Sample indices held by each client, in draw order.
  std::vector<std::vector<std::size_t>> members;
  /// N × num_classes histogram.
  std::vector<std::vector<std::size_t>> class_counts;
  std::size_t quota = 0;
  std::size_t num_classes = 0;
  std::vector<PoolAdjustment> adjustments;
};

Assignment partition(std::span<const int> labels, const PartitionSpec& spec, Rng& rng);

struct HeterogeneityReport {
  std::vector<std::vector<std::size_t>> histograms;
  std::vector<double> global_distribution;
  /// Total-variation distance of each client's class distribution from the
  /// global one.
  std::vector<double> tv_distance;
  double mean_tv = 0.0;
};

/// Throws Error(kInconsistent) if the assignment disagrees with `labels`.
HeterogeneityReport partition_stats(const Assignment& assignment, std::span<const int> labels);

/// Largest-remainder rounding of proportions to integers summing to `total`.
/// Ties go to the lower index.
std::vector<std::size_t> largest_remainder(std::span<const double> proportions,
                                           std::size_t total);

/// Parses "iid:N" or "dirichlet:CONCENTRATION:N".
PartitionSpec parse_partition_spec(const std::string& text);

/// One label per line (blank lines and '#' comments skipped).
std::vector<int> read_labels(std::istream& in);

/// "sample_index client_id" per retained sample, ascending sample index.
void write_assignment(const Assignment& assignment, std::ostream& out);

}  // namespace fedsim
