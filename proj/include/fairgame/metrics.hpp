#pragma once

// Fairness/efficiency metrics, training-log CSV I/O and plot-panel emission.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fairgame/error.hpp"

namespace fairgame {

struct GiniResult {
  double value = 0.0;
  bool zero_total = false;  // all consumptions were zero; value reported as 0
};

/// sum_i sum_j |c_i - c_j| / (2 N sum_i c_i).
inline GiniResult gini(std::span<const double> consumptions) {
  if (consumptions.empty()) throw DomainError("Gini coefficient needs at least one agent");
  double total = 0.0;
  for (double c : consumptions) {
    if (!(c >= 0.0)) throw DomainError("consumptions must be nonnegative");
    total += c;
  }
  if (total == 0.0) return {0.0, true};
  double pairwise = 0.0;
  for (double a : consumptions) {
    for (double b : consumptions) pairwise += std::abs(a - b);
  }
  const double n = static_cast<double>(consumptions.size());
  return {pairwise / (2.0 * n * total), false};
}

struct RollingSeries {
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;
};

/// Trailing-window mean/min/max; the first window-1 entries use the shorter prefix.
inline RollingSeries rolling_aggregate(std::span<const double> series, std::size_t window) {
  if (window == 0) throw DomainError("rolling window must be >= 1");
  if (series.empty()) throw DomainError("rolling aggregate of an empty series");
  RollingSeries out;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const std::size_t begin = k + 1 >= window ? k + 1 - window : 0;
    double sum = 0.0;
    double lo = series[begin];
    double hi = series[begin];
    for (std::size_t j = begin; j <= k; ++j) {
      sum += series[j];
      lo = std::min(lo, series[j]);
      hi = std::max(hi, series[j]);
    }
    out.mean.push_back(sum / static_cast<double>(k + 1 - begin));
    out.min.push_back(lo);
    out.max.push_back(hi);
  }
  return out;
}

/// Shortest round-trip decimal form; stable across runs.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kLogHeader = "step,episode,agent,return,apples,gini,actor_loss,critic_loss,entropy,floor_hits";

/// Plain record mirroring the training-log schema.
struct LogRecord {
  std::size_t step = 0;
  std::size_t episode = 0;
  std::size_t agent = 0;
  double episode_return = 0.0;
  double apples = 0.0;
  double gini = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  std::size_t floor_hits = 0;
};

template <typename Row>
void write_log_csv(std::ostream& os, std::span<const Row> rows) {
  os << kLogHeader << '\n';
  for (const auto& r : rows) {
    os << r.step << ',' << r.episode << ',' << r.agent << ',' << format_number(r.episode_return) << ','
       << format_number(r.apples) << ',' << format_number(r.gini) << ',' << format_number(r.actor_loss) << ','
       << format_number(r.critic_loss) << ',' << format_number(r.entropy) << ',' << r.floor_hits << '\n';
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

/// Parses a training log, locating columns by header name.
inline std::vector<LogRecord> read_log_csv(std::istream& is) {
  std::string line;
  std::vector<LogRecord> rows;
  if (!std::getline(is, line)) return rows;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  for (const char* name : {"step", "episode", "agent", "return", "apples", "gini", "actor_loss", "critic_loss",
                           "entropy", "floor_hits"}) {
    if (!col.count(name)) throw SchemaError(std::string("training log is missing column '") + name + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    }
    auto num = [&](const char* name) { return detail::parse_double(cells[col[name]], lineno); };
    LogRecord r;
    r.step = static_cast<std::size_t>(num("step"));
    r.episode = static_cast<std::size_t>(num("episode"));
    r.agent = static_cast<std::size_t>(num("agent"));
    r.episode_return = num("return");
    r.apples = num("apples");
    r.gini = num("gini");
    r.actor_loss = num("actor_loss");
    r.critic_loss = num("critic_loss");
    r.entropy = num("entropy");
    r.floor_hits = static_cast<std::size_t>(num("floor_hits"));
    rows.push_back(r);
  }
  return rows;
}

/// Rolling panel: x positions plus aggregated band, optionally one per agent.
struct Panel {
  std::string name;
  std::vector<std::size_t> steps;
  std::vector<RollingSeries> series;   // one entry, or one per agent
  std::vector<std::string> labels;
};

namespace detail {

inline std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Minimal line chart: mean lines plus faint min/max lines.
inline std::string render_svg(const Panel& panel) {
  constexpr double kWidth = 640.0;
  constexpr double kHeight = 400.0;
  constexpr double kMargin = 48.0;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
  os << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << panel.name
     << "</text>\n";
  os << "<rect x=\"48\" y=\"48\" width=\"544\" height=\"304\" fill=\"none\" stroke=\"black\"/>\n";

  double x_lo = 0.0;
  double x_hi = 1.0;
  double y_lo = 0.0;
  double y_hi = 1.0;
  if (!panel.steps.empty()) {
    x_lo = static_cast<double>(panel.steps.front());
    x_hi = static_cast<double>(panel.steps.back());
    y_lo = 0.0;
    y_hi = 0.0;
    for (const auto& s : panel.series) {
      for (double v : s.max) y_hi = std::max(y_hi, v);
      for (double v : s.min) y_lo = std::min(y_lo, v);
    }
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  if (y_hi <= y_lo) y_hi = y_lo + 1.0;
  auto px = [&](double x) { return kMargin + (x - x_lo) / (x_hi - x_lo) * (kWidth - 2 * kMargin); };
  auto py = [&](double y) { return kHeight - kMargin - (y - y_lo) / (y_hi - y_lo) * (kHeight - 2 * kMargin); };

  os << "<text x=\"48\" y=\"368\" font-family=\"sans-serif\" font-size=\"10\">" << svg_number(x_lo) << "</text>\n";
  os << "<text x=\"592\" y=\"368\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
     << svg_number(x_hi) << "</text>\n";
  os << "<text x=\"44\" y=\"352\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << svg_number(y_lo)
     << "</text>\n";
  os << "<text x=\"44\" y=\"52\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << svg_number(y_hi)
     << "</text>\n";

  auto polyline = [&](const std::vector<double>& ys, const char* color, double opacity, double width) {
    if (ys.empty()) return;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-opacity=\"" << svg_number(opacity)
       << "\" stroke-width=\"" << svg_number(width) << "\" points=\"";
    for (std::size_t k = 0; k < ys.size(); ++k) {
      if (k) os << ' ';
      os << svg_number(px(static_cast<double>(panel.steps[k]))) << ',' << svg_number(py(ys[k]));
    }
    os << "\"/>\n";
  };
  for (std::size_t k = 0; k < panel.series.size(); ++k) {
    const char* color = kColors[k % 10];
    polyline(panel.series[k].min, color, 0.3, 1.0);
    polyline(panel.series[k].max, color, 0.3, 1.0);
    polyline(panel.series[k].mean, color, 1.0, 2.0);
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_panel_csv(const std::filesystem::path& path, const Panel& panel, bool per_agent) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << (per_agent ? "step,mean,min,max,agent\n" : "step,mean,min,max\n");
  for (std::size_t a = 0; a < panel.series.size(); ++a) {
    const auto& s = panel.series[a];
    for (std::size_t k = 0; k < s.mean.size(); ++k) {
      os << panel.steps[k] << ',' << format_number(s.mean[k]) << ',' << format_number(s.min[k]) << ','
         << format_number(s.max[k]);
      if (per_agent) os << ',' << a;
      os << '\n';
    }
  }
}

}  // namespace detail

/// Builds the total/per-agent/Gini panels from log records (one point per
/// episode, rolling window over episodes).
inline std::vector<Panel> build_panels(std::span<const LogRecord> rows, std::size_t window = 50) {
  std::vector<std::size_t> steps;
  std::vector<double> totals;
  std::vector<double> ginis;
  std::map<std::size_t, std::vector<double>> per_agent;  // agent -> per-episode apples
  std::map<std::size_t, std::size_t> episode_slot;
  std::size_t num_agents = 0;
  for (const auto& r : rows) num_agents = std::max(num_agents, r.agent + 1);
  for (const auto& r : rows) {
    auto [it, fresh] = episode_slot.try_emplace(r.episode, steps.size());
    if (fresh) {
      steps.push_back(r.step);
      totals.push_back(0.0);
      ginis.push_back(r.gini);
      for (std::size_t a = 0; a < num_agents; ++a) per_agent[a].push_back(0.0);
    }
    const std::size_t k = it->second;
    steps[k] = std::max(steps[k], r.step);
    totals[k] += r.apples;
    per_agent[r.agent][k] = r.apples;
  }

  Panel total{"panel_total", steps, {}, {"total"}};
  Panel agents{"panel_per_agent", steps, {}, {}};
  Panel gini_panel{"panel_gini", steps, {}, {"gini"}};
  if (!steps.empty()) {
    total.series.push_back(rolling_aggregate(totals, window));
    gini_panel.series.push_back(rolling_aggregate(ginis, window));
    for (auto& [agent, series] : per_agent) {
      agents.series.push_back(rolling_aggregate(series, window));
      agents.labels.push_back("agent " + std::to_string(agent));
    }
  }
  return {total, agents, gini_panel};
}

/// Writes panel_{total,per_agent,gini}.{csv,svg} under `out_dir`.
inline std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& log_csv,
                                                         const std::filesystem::path& out_dir,
                                                         std::size_t window = 50) {
  std::ifstream is(log_csv);
  if (!is) throw SchemaError("cannot open training log " + log_csv.string());
  const auto rows = read_log_csv(is);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& panel : build_panels(rows, window)) {
    const bool per_agent = panel.name == "panel_per_agent";
    const auto csv = out_dir / (panel.name + ".csv");
    const auto svg = out_dir / (panel.name + ".svg");
    detail::write_panel_csv(csv, panel, per_agent);
    std::ofstream(svg) << detail::render_svg(panel);
    written.push_back(csv);
    written.push_back(svg);
  }
  return written;
}

}  // namespace fairgame
