#pragma once

// CSV and SVG output for sweeps and convergence traces. Numbers are written
// with fixed printf formats so files are byte-stable for fixed inputs; wall
// times are written as NA unless timing output is requested.

#include "crbf/harness/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace crbf::harness {

struct OutputOptions {
  bool timing = false;
};

namespace detail {

inline std::string fmt(double v, int digits = 6) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string label;
  std::vector<double> x, mean, low, high;
};

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};
  return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

// Line chart with an optional shaded band per series. Missing points (NaN)
// are skipped.
inline std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<std::string>& x_ticks, const std::vector<Series>& series) {
  const double width = 720, height = 440, left = 70, right = 190, top = 40, bottom = 60;
  double x_min = INFINITY, x_max = -INFINITY, y_min = INFINITY, y_max = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.mean[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      for (double y : {s.mean[i], s.low[i], s.high[i]}) {
        if (!std::isfinite(y)) continue;
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
      }
    }
  }
  if (!std::isfinite(x_min)) x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * pw; };
  auto py = [&](double y) { return top + (y_max - y) / (y_max - y_min) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << svg_escape(title)
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = y_min + (y_max - y_min) * i / 5.0;
    o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fmt(py(y), 2) << "\" y2=\""
      << fmt(py(y), 2) << "\" stroke=\"#e0e0e0\"/>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << fmt(py(y) + 4, 2) << "\" text-anchor=\"end\">" << fmt(y, 2)
      << "</text>\n";
  }
  if (!series.empty()) {
    const auto& xs = series.front().x;
    for (std::size_t i = 0; i < xs.size() && i < x_ticks.size(); ++i) {
      o << "<text x=\"" << fmt(px(xs[i]), 2) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
        << svg_escape(x_ticks[i]) << "</text>\n";
    }
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">"
    << svg_escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << svg_escape(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    std::string upper, lower, line;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!std::isfinite(ser.mean[i])) continue;
      line += fmt(px(ser.x[i]), 2) + "," + fmt(py(ser.mean[i]), 2) + " ";
      if (std::isfinite(ser.low[i]) && std::isfinite(ser.high[i])) {
        upper += fmt(px(ser.x[i]), 2) + "," + fmt(py(ser.high[i]), 2) + " ";
        lower = fmt(px(ser.x[i]), 2) + "," + fmt(py(ser.low[i]), 2) + " " + lower;
      }
    }
    if (!upper.empty()) {
      o << "<polygon points=\"" << upper << lower << "\" fill=\"" << palette(s)
        << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    o << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << palette(s) << "\" stroke-width=\"2\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << palette(s) << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << svg_escape(ser.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace detail

inline std::string aggregate_csv(SweepVariable variable, const std::vector<AggregateRow>& rows,
                                 const OutputOptions& opts = {}) {
  std::ostringstream o;
  o << "sweep_variable,sweep_value,design,n_feasible,n_total,mean_sum_rate_bps,ci95_low,ci95_high,"
       "mean_iterations,mean_wall_time_ms\n";
  for (const auto& r : rows) {
    o << to_string(variable) << ',' << detail::csv_field(r.sweep_value) << ',' << to_string(r.design) << ','
      << r.n_feasible << ',' << r.n_total << ',' << detail::fmt(r.sum_rate.mean) << ','
      << detail::fmt(r.sum_rate.ci95_low) << ',' << detail::fmt(r.sum_rate.ci95_high) << ','
      << detail::fmt(r.mean_iterations, 3) << ','
      << (opts.timing ? detail::fmt(r.mean_wall_time_ms, 3) : std::string("NA")) << '\n';
  }
  return o.str();
}

/// Per-trial records. sum_rate_bps carries ten decimals so aggregate means
/// can be recomputed from this file alone.
inline std::string trials_csv(SweepVariable variable, const std::vector<TrialRecord>& records,
                              const OutputOptions& opts = {}) {
  std::ostringstream o;
  o << "sweep_variable,sweep_value,trial,seed,channel_hash,design,status,feasible,sum_rate_bps,per_user_rates_bps,"
       "iterations,wall_time_ms,nominal_sum_rate_bps,interference_excess,rate_shortfall_bps\n";
  for (const auto& r : records) {
    std::string per_user;
    for (std::size_t k = 0; k < r.per_user_rates_bps.size(); ++k) {
      if (k) per_user += ';';
      per_user += detail::fmt(r.per_user_rates_bps[k], 10);
    }
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.channel_hash));
    o << to_string(variable) << ',' << detail::csv_field(r.sweep_value) << ',' << r.trial << ',' << r.seed << ','
      << hash << ',' << to_string(r.design) << ',' << to_string(r.status) << ',' << (r.feasible ? 1 : 0) << ','
      << (r.feasible ? detail::fmt(r.sum_rate_bps, 10) : std::string("NA")) << ','
      << (per_user.empty() ? std::string("NA") : per_user) << ',' << r.iterations << ','
      << (opts.timing ? detail::fmt(r.wall_time_ms, 3) : std::string("NA")) << ','
      << (r.nominal_sum_rate_bps ? detail::fmt(*r.nominal_sum_rate_bps, 10) : std::string("NA")) << ','
      << (r.nominal_sum_rate_bps ? detail::fmt(r.interference_excess, 10) : std::string("NA")) << ','
      << (r.nominal_sum_rate_bps ? detail::fmt(r.rate_shortfall_bps, 10) : std::string("NA")) << '\n';
  }
  return o.str();
}

/// One line per design over the sweep values, mean with its 95 % band.
/// Epsilon pairs are placed at equal spacing.
inline std::string sweep_svg(SweepVariable variable, const std::vector<AggregateRow>& rows) {
  std::vector<std::string> ticks;
  std::vector<detail::Series> series;
  std::map<DesignId, std::size_t> slot;
  for (const auto& r : rows) {
    if (r.value_index >= ticks.size()) ticks.resize(r.value_index + 1);
    ticks[r.value_index] = r.sweep_value;
  }
  auto x_of = [&](const AggregateRow& r) {
    if (variable == SweepVariable::EpsilonPair) return static_cast<double>(r.value_index);
    return std::stod(r.sweep_value);
  };
  for (const auto& r : rows) {
    auto it = slot.find(r.design);
    if (it == slot.end()) {
      it = slot.emplace(r.design, series.size()).first;
      series.push_back({to_string(r.design), {}, {}, {}, {}});
    }
    auto& s = series[it->second];
    s.x.push_back(x_of(r));
    s.mean.push_back(r.sum_rate.mean);
    s.low.push_back(r.sum_rate.ci95_low);
    s.high.push_back(r.sum_rate.ci95_high);
  }
  return detail::line_chart(std::string("Average sum rate versus ") + to_string(variable), to_string(variable),
                            "sum rate (bps/Hz)", ticks, series);
}

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream o;
  o << "n_antennas,trial,seed,design,status,iteration,sum_rate_bps\n";
  for (const auto& r : rows) {
    o << r.n_antennas << ',' << r.trial << ',' << r.seed << ',' << to_string(r.design) << ',' << to_string(r.status)
      << ',' << r.iteration << ',' << detail::fmt(r.sum_rate_bps, 10) << '\n';
  }
  return o.str();
}

/// Mean trace per (design, N_t); a finished trial keeps its last value.
inline std::string trace_svg(const std::vector<TraceRow>& rows) {
  std::map<std::pair<Index, DesignId>, std::map<int, std::vector<double>>> traces;  // key -> trial -> values
  int longest = 0;
  for (const auto& r : rows) {
    traces[{r.n_antennas, r.design}][r.trial].push_back(r.sum_rate_bps);
    longest = std::max(longest, r.iteration + 1);
  }
  std::vector<detail::Series> series;
  std::vector<std::string> ticks;
  for (int i = 0; i < longest; ++i) ticks.push_back(std::to_string(i));
  for (const auto& [key, by_trial] : traces) {
    detail::Series s;
    s.label = std::string(to_string(key.second)) + " N_t=" + std::to_string(key.first);
    for (int i = 0; i < longest; ++i) {
      std::vector<double> values;
      for (const auto& [trial, v] : by_trial) values.push_back(v[std::min<std::size_t>(i, v.size() - 1)]);
      const Summary sum = summarize(values);
      s.x.push_back(i);
      s.mean.push_back(sum.mean);
      s.low.push_back(sum.ci95_low);
      s.high.push_back(sum.ci95_high);
    }
    series.push_back(std::move(s));
  }
  return detail::line_chart("Objective per outer iteration", "iteration", "sum rate (bps/Hz)", ticks, series);
}

/// Writes trials.csv, aggregate.csv and sweep.svg under dir.
inline std::vector<AggregateRow> emit_outputs(const std::filesystem::path& dir, SweepVariable variable,
                                              const std::vector<TrialRecord>& records,
                                              const OutputOptions& opts = {}) {
  if (records.empty()) throw std::invalid_argument("emit_outputs: no records to write");
  const auto rows = aggregate(records);
  detail::write_file(dir / "trials.csv", trials_csv(variable, records, opts));
  detail::write_file(dir / "aggregate.csv", aggregate_csv(variable, rows, opts));
  detail::write_file(dir / "sweep.svg", sweep_svg(variable, rows));
  return rows;
}

inline void emit_trace(const std::filesystem::path& dir, const std::vector<TraceRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("emit_trace: no rows to write");
  detail::write_file(dir / "trace.csv", trace_csv(rows));
  detail::write_file(dir / "trace.svg", trace_svg(rows));
}

}  // namespace crbf::harness
