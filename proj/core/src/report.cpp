#include "fedsim/experiment.hpp"

#include "fedsim/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace fedsim {
namespace {

using nlohmann::json;

std::string opt(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

json opt_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

json constants_json(const TheoremConstants& c) {
  return json{{"C1", c.C1},           {"C2", c.C2},         {"D", c.D},
              {"F", c.F},             {"mu", c.mu},         {"L", c.L},
              {"G", c.G},             {"sigma_l", c.sigma_l}, {"sigma_g", c.sigma_g},
              {"K", c.K},             {"S", c.S},           {"N", c.N},
              {"alpha", c.alpha},     {"box_radius", c.box_radius}};
}

json run_summary_json(const RunSummary& s) {
  json j;
  j["algorithm"] = s.algorithm;
  j["alpha"] = s.alpha;
  j["local_lr"] = s.local_lr;
  j["rounds"] = s.rounds;
  j["rounds_completed"] = s.rounds_completed;
  j["final_loss"] = opt_json(s.final_loss);
  j["final_suboptimality"] = opt_json(s.final_suboptimality);
  j["last_suboptimality"] = opt_json(s.last_suboptimality);
  j["best_suboptimality"] = opt_json(s.best_suboptimality);
  j["rounds_to_threshold"] = s.rounds_to_threshold ? json(*s.rounds_to_threshold) : json(nullptr);
  j["weighted_iterate_suboptimality"] = opt_json(s.weighted_iterate_suboptimality);
  j["mean_drift"] = opt_json(s.mean_drift);
  j["final_test_accuracy"] = opt_json(s.final_test_accuracy);
  j["max_lemma1_relative"] = opt_json(s.max_ema_relative);
  j["max_z_relative"] = opt_json(s.max_z_relative);
  j["constants"] = s.constants ? constants_json(*s.constants) : json(nullptr);
  j["nan_round"] = s.nan_round ? json(*s.nan_round) : json(nullptr);
  return j;
}

}  // namespace

std::string csv_header(bool wall_clock) {
  std::string h =
      "round,global_loss,suboptimality,grad_norm,delta_norm,num_participants,participants,drift,"
      "ema_residual,z_residual,test_accuracy";
  if (wall_clock) h += ",wall_ms";
  return h;
}

void write_csv(const std::vector<RoundRecord>& records, std::ostream& out, bool wall_clock) {
  out << csv_header(wall_clock) << '\n';
  for (const auto& r : records) {
    if (!r.evaluated) continue;
    out << r.round << ',' << format_real(r.global_loss) << ',' << opt(r.suboptimality) << ','
        << format_real(r.grad_norm) << ',' << format_real(r.delta_norm) << ','
        << r.participants.size() << ',';
    for (std::size_t j = 0; j < r.participants.size(); ++j) {
      if (j) out << ';';
      out << r.participants[j];
    }
    out << ',' << format_real(r.drift) << ',' << opt(r.ema_residual) << ',' << opt(r.z_residual)
        << ',' << opt(r.test_accuracy);
    if (wall_clock) out << ',' << format_real(r.wall_ms);
    out << '\n';
  }
}

void write_svg(const std::vector<Series>& series, const std::string& title,
               const std::string& y_label, std::ostream& out) {
  constexpr double width = 720.0;
  constexpr double height = 440.0;
  constexpr double left = 70.0;
  constexpr double right = 160.0;
  constexpr double top = 40.0;
  constexpr double bottom = 50.0;
  static const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  bool log_y = true;
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = x_min;
  double y_max = -x_min;
  for (const auto& s : series) {
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if (!std::isfinite(s.y[j])) continue;
      if (!(s.y[j] > 0.0)) log_y = false;
      x_min = std::min(x_min, s.x[j]);
      x_max = std::max(x_max, s.x[j]);
    }
  }
  auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
  for (const auto& s : series) {
    for (double y : s.y) {
      if (!std::isfinite(y)) continue;
      y_min = std::min(y_min, ty(y));
      y_max = std::max(y_max, ty(y));
    }
  }
  if (!std::isfinite(x_min)) x_min = x_max = y_min = y_max = 0.0;
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return top + (1.0 - (ty(y) - y_min) / (y_max - y_min)) * plot_h; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return std::string(buf);
  };
  auto tick = [&](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", log_y ? std::pow(10.0, v) : v);
    return std::string(buf);
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fy = y_min + (y_max - y_min) * i / 4.0;
    const double yy = top + (1.0 - i / 4.0) * plot_h;
    out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(yy + 4)
        << "\" text-anchor=\"end\">" << tick(fy) << "</text>\n";
    const double fx = x_min + (x_max - x_min) * i / 4.0;
    out << "<text x=\"" << num(px(fx)) << "\" y=\"" << num(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
  }
  out << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 10)
      << "\" text-anchor=\"middle\">round</text>\n";
  out << "<text x=\"16\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num(top + plot_h / 2) << ")\">" << y_label << (log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % (sizeof palette / sizeof palette[0])];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t j = 0; j < series[s].x.size(); ++j) {
      if (!std::isfinite(series[s].y[j]) || (log_y && !(series[s].y[j] > 0.0))) continue;
      if (!first) out << ' ';
      out << num(px(series[s].x[j])) << ',' << num(py(series[s].y[j]));
      first = false;
    }
    out << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(s + 1);
    out << "<line x1=\"" << num(width - right + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
        << num(width - right + 30) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(width - right + 36) << "\" y=\"" << num(ly) << "\">"
        << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

std::string summary_json(const RunSummary& summary, const ExperimentConfig& config) {
  json j = run_summary_json(summary);
  json cfg = json::object();
  for (const auto& key : config_keys()) cfg[key] = get_config_value(config, key);
  j["config"] = std::move(cfg);
  return j.dump();
}

std::string sweep_json(const SweepCell& cell) {
  json j = cell.summary ? run_summary_json(*cell.summary) : json::object();
  j["alpha"] = cell.alpha;
  j["csv"] = cell.csv_path;
  j["error"] = cell.error.empty() ? json(nullptr) : json(cell.error);
  return j.dump();
}

void write_sweep_table(const std::vector<SweepCell>& cells, std::ostream& out) {
  out << "alpha,final_suboptimality,rounds_to_threshold,status\n";
  for (const auto& c : cells) {
    out << format_real(c.alpha) << ',';
    if (c.summary && c.summary->final_suboptimality && c.error.empty()) {
      out << format_real(*c.summary->final_suboptimality);
    }
    out << ',';
    if (c.summary && c.summary->rounds_to_threshold) out << *c.summary->rounds_to_threshold;
    out << ',' << (c.error.empty() ? "ok" : "error: " + c.error) << '\n';
  }
}

}  // namespace fedsim
