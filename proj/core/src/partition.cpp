#include "fedsim/partition.hpp"

#include "fedsim/error.hpp"
#include "fedsim/format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace fedsim {
namespace {

std::vector<double> sample_dirichlet(std::size_t k, double concentration, Rng& rng) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> q(k);
  double sum = 0.0;
  for (auto& v : q) {
    v = gamma(rng);
    sum += v;
  }
  if (!(sum > 0.0)) {
    // Every gamma draw underflowed: the limit of Dir(a) as a -> 0 is a
    // uniformly chosen vertex of the simplex.
    std::fill(q.begin(), q.end(), 0.0);
    q[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return q;
  }
  for (auto& v : q) v /= sum;
  return q;
}

std::size_t num_classes_of(std::span<const int> labels) {
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw Error(ErrorCode::kInvalidArgument, "labels must be non-negative");
    max_label = std::max(max_label, y);
  }
  return static_cast<std::size_t>(max_label + 1);
}

}  // namespace

std::vector<std::size_t> largest_remainder(std::span<const double> proportions,
                                           std::size_t total) {
  const std::size_t k = proportions.size();
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> frac(k, 0.0);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = proportions[c] * static_cast<double>(total);
    const double fl = std::floor(exact);
    counts[c] = static_cast<std::size_t>(fl);
    frac[c] = exact - fl;
    assigned += counts[c];
  }
  // Floating error can push the floor sum past the total; trim from the
  // smallest remainders first.
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  while (assigned > total) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > total; ++it) {
      if (counts[*it] > 0) {
        --counts[*it];
        --assigned;
      }
    }
  }
  for (std::size_t j = 0; assigned < total; j = (j + 1) % k) {
    ++counts[order[j]];
    ++assigned;
  }
  return counts;
}

Assignment partition(std::span<const int> labels, const PartitionSpec& spec, Rng& rng) {
  if (labels.empty()) throw Error(ErrorCode::kEmptyDataset, "partition: no labels");
  if (spec.n_clients == 0) throw Error(ErrorCode::kInvalidArgument, "partition: N must be >= 1");
  const std::size_t total = labels.size();
  const std::size_t n_clients = spec.n_clients;
  const std::size_t quota = total / n_clients;
  if (quota == 0) {
    throw Error(ErrorCode::kInvalidArgument, "partition: fewer samples than clients");
  }
  const std::size_t n_classes = num_classes_of(labels);

  Assignment out;
  out.quota = quota;
  out.num_classes = n_classes;
  out.client_of.assign(total, Assignment::kDiscarded);
  out.members.assign(n_clients, {});
  out.class_counts.assign(n_clients, std::vector<std::size_t>(n_classes, 0));

  if (std::holds_alternative<IidSplit>(spec.scheme)) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n_clients; ++i) {
      for (std::size_t k = i * quota; k < (i + 1) * quota; ++k) {
        const std::size_t s = order[k];
        out.client_of[s] = static_cast<std::int64_t>(i);
        out.members[i].push_back(s);
        ++out.class_counts[i][static_cast<std::size_t>(labels[s])];
      }
    }
    return out;
  }

  const double concentration = std::get<DirichletSplit>(spec.scheme).concentration;
  if (!(concentration > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "partition: concentration must be > 0");
  }
  // Per-class pools, shuffled once; drawing from the back is sampling without
  // replacement.
  std::vector<std::vector<std::size_t>> pool(n_classes);
  for (std::size_t s = 0; s < total; ++s) pool[static_cast<std::size_t>(labels[s])].push_back(s);
  for (auto& p : pool) std::shuffle(p.begin(), p.end(), rng);

  for (std::size_t i = 0; i < n_clients; ++i) {
    const std::vector<double> q = sample_dirichlet(n_classes, concentration, rng);
    std::vector<std::size_t> want = largest_remainder(q, quota);

    for (std::size_t c = 0; c < n_classes; ++c) {
      if (want[c] <= pool[c].size()) continue;
      std::size_t deficit = want[c] - pool[c].size();
      want[c] = pool[c].size();
      // Move the deficit one sample at a time to the class with the most
      // spare samples; ties go to the lower class id.
      while (deficit > 0) {
        std::size_t best = n_classes;
        std::size_t best_spare = 0;
        for (std::size_t o = 0; o < n_classes; ++o) {
          const std::size_t spare = pool[o].size() - std::min(pool[o].size(), want[o]);
          if (spare > best_spare) {
            best_spare = spare;
            best = o;
          }
        }
        if (best == n_classes) {
          throw Error(ErrorCode::kInconsistent, "partition: sample pool exhausted");
        }
        ++want[best];
        --deficit;
        if (!out.adjustments.empty() && out.adjustments.back().client == i &&
            out.adjustments.back().from_class == c && out.adjustments.back().to_class == best) {
          ++out.adjustments.back().count;
        } else {
          out.adjustments.push_back({i, c, best, 1});
        }
      }
    }

    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t k = 0; k < want[c]; ++k) {
        const std::size_t s = pool[c].back();
        pool[c].pop_back();
        out.client_of[s] = static_cast<std::int64_t>(i);
        out.members[i].push_back(s);
      }
      out.class_counts[i][c] = want[c];
    }
  }
  return out;
}

HeterogeneityReport partition_stats(const Assignment& assignment, std::span<const int> labels) {
  if (assignment.client_of.size() != labels.size()) {
    throw Error(ErrorCode::kInconsistent, "partition_stats: assignment covers a different dataset");
  }
  const std::size_t n_clients = assignment.members.size();
  const std::size_t n_classes = std::max(assignment.num_classes, num_classes_of(labels));

  HeterogeneityReport report;
  report.histograms.assign(n_clients, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < n_clients; ++i) {
    for (std::size_t s : assignment.members[i]) {
      if (s >= labels.size() || assignment.client_of[s] != static_cast<std::int64_t>(i)) {
        throw Error(ErrorCode::kInconsistent, "partition_stats: member list disagrees with client_of");
      }
      ++report.histograms[i][static_cast<std::size_t>(labels[s])];
    }
    if (i < assignment.class_counts.size()) {
      for (std::size_t c = 0; c < n_classes; ++c) {
        const std::size_t recorded =
            c < assignment.class_counts[i].size() ? assignment.class_counts[i][c] : 0;
        if (recorded != report.histograms[i][c]) {
          throw Error(ErrorCode::kInconsistent,
                      "partition_stats: class counts disagree with labels for client " +
                          std::to_string(i));
        }
      }
    }
  }

  report.global_distribution.assign(n_classes, 0.0);
  for (int y : labels) report.global_distribution[static_cast<std::size_t>(y)] += 1.0;
  for (auto& p : report.global_distribution) p /= static_cast<double>(labels.size());

  report.tv_distance.assign(n_clients, 0.0);
  double sum_tv = 0.0;
  for (std::size_t i = 0; i < n_clients; ++i) {
    const double held = static_cast<double>(assignment.members[i].size());
    double tv = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double p = held > 0 ? static_cast<double>(report.histograms[i][c]) / held : 0.0;
      tv += std::abs(p - report.global_distribution[c]);
    }
    report.tv_distance[i] = 0.5 * tv;
    sum_tv += report.tv_distance[i];
  }
  report.mean_tv = n_clients > 0 ? sum_tv / static_cast<double>(n_clients) : 0.0;
  return report;
}

PartitionSpec parse_partition_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);

  auto parse_count = [&](const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || v == 0) {
      throw Error(ErrorCode::kConfig, "partition spec: bad client count '" + s + "'");
    }
    return static_cast<std::size_t>(v);
  };

  PartitionSpec spec;
  if (parts.size() == 2 && parts[0] == "iid") {
    spec.scheme = IidSplit{};
    spec.n_clients = parse_count(parts[1]);
    return spec;
  }
  if (parts.size() == 3 && parts[0] == "dirichlet") {
    const double conc = parse_real(parts[1], "partition spec concentration");
    if (!(conc > 0.0)) throw Error(ErrorCode::kConfig, "partition spec: concentration must be > 0");
    spec.scheme = DirichletSplit{conc};
    spec.n_clients = parse_count(parts[2]);
    return spec;
  }
  throw Error(ErrorCode::kConfig,
              "partition spec must be 'iid:N' or 'dirichlet:CONCENTRATION:N', got '" + text + "'");
}

std::vector<int> read_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::stringstream ss(line);
    long long v = 0;
    if (!(ss >> v)) continue;
    std::string rest;
    if (ss >> rest || v < 0) {
      throw Error(ErrorCode::kIo, "labels file line " + std::to_string(line_no) +
                                      ": expected one non-negative integer");
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

void write_assignment(const Assignment& assignment, std::ostream& out) {
  out << "# sample_index client_id\n";
  for (std::size_t s = 0; s < assignment.client_of.size(); ++s) {
    if (assignment.client_of[s] == Assignment::kDiscarded) continue;
    out << s << ' ' << assignment.client_of[s] << '\n';
  }
}

}  // namespace fedsim
