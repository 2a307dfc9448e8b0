#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "headway/engine.hpp"
#include "headway/errors.hpp"
#include "headway/ppo.hpp"

namespace headway {

// Bumped whenever a CSV header below changes.
inline constexpr int kCsvSchemaVersion = 1;

inline constexpr std::string_view kTraceHeader =
    "t_s,link_id,count,density,autonomy_fraction,s_l,flow_vps,latency_s,beta_a_m";
inline constexpr std::string_view kEpisodeHeader = "seed,ttt,total_exited";
inline constexpr std::string_view kSummaryHeader = "controller,seeds,ttt_mean,ttt_std";
inline constexpr std::string_view kCurveHeader =
    "update_index,env_steps,mean_eval_ttt,policy_loss,value_loss,clip_fraction,best_eval_ttt";

/// Shortest representation that round-trips; identical on every run.
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

inline std::string trace_csv(const EpisodeTrace& trace) {
  std::ostringstream os;
  os << kTraceHeader << '\n';
  for (std::size_t k = 0; k < trace.num_steps(); ++k) {
    for (std::size_t l = 0; l < trace.links[k].size(); ++l) {
      const LinkSnapshot& s = trace.links[k][l];
      os << fmt_num(trace.t_s[k]) << ',' << l << ',' << fmt_num(s.count) << ',' << fmt_num(s.density)
         << ',' << fmt_num(s.autonomy_fraction) << ',' << s.congested << ',' << fmt_num(s.flow_vps) << ','
         << fmt_num(s.latency_s) << ',' << fmt_num(s.beta_a_m) << '\n';
    }
  }
  return os.str();
}

/// Parses a trace CSV back into per-step link snapshots (vehicle totals are not stored).
inline EpisodeTrace parse_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw ConfigError("not a trace CSV (bad header)");
  EpisodeTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        f.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad number in trace CSV: " + cell);
      }
    }
    if (f.size() != 9) throw ConfigError("trace CSV row must have 9 fields");
    const auto link = static_cast<std::size_t>(f[1]);
    if (trace.t_s.empty() || trace.t_s.back() != f[0]) {
      trace.t_s.push_back(f[0]);
      trace.links.emplace_back();
    }
    auto& row = trace.links.back();
    if (link != row.size()) throw ConfigError("trace CSV link ids must be 0..L-1 per time step");
    LinkSnapshot s;
    s.count = f[2];
    s.density = f[3];
    s.autonomy_fraction = f[4];
    s.congested = static_cast<int>(f[5]);
    s.flow_vps = f[6];
    s.latency_s = f[7];
    s.beta_a_m = f[8];
    row.push_back(s);
  }
  return trace;
}

struct SeedResult {
  std::uint64_t seed = 0;
  double ttt = 0.0;
  double exited = 0.0;
};

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

inline Stats mean_std(std::span<const double> xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(xs.size()));
  return s;
}

inline std::string episodes_csv(std::span<const SeedResult> rows) {
  std::ostringstream os;
  os << kEpisodeHeader << '\n';
  for (const auto& r : rows) os << r.seed << ',' << fmt_num(r.ttt) << ',' << fmt_num(r.exited) << '\n';
  return os.str();
}

inline std::string curve_csv(std::span<const CurvePoint> curve) {
  std::ostringstream os;
  os << kCurveHeader << '\n';
  for (const auto& p : curve)
    os << p.update_index << ',' << p.env_steps << ',' << fmt_num(p.mean_eval_ttt) << ','
       << fmt_num(p.policy_loss) << ',' << fmt_num(p.value_loss) << ',' << fmt_num(p.clip_fraction) << ','
       << fmt_num(p.best_eval_ttt) << '\n';
  return os.str();
}

// Heatmap: one row per link, one column per step, colored green (free) to
// red (jam) by density / jam density.

struct Rgb {
  int r = 0, g = 0, b = 0;
};

inline constexpr Rgb kFreeColor{0, 160, 0};
inline constexpr Rgb kJamColor{220, 0, 0};

inline Rgb heat_color(double fraction) {
  const double f = std::clamp(fraction, 0.0, 1.0);
  auto lerp = [f](int a, int b) { return static_cast<int>(std::lround(a + f * (b - a))); };
  return {lerp(kFreeColor.r, kJamColor.r), lerp(kFreeColor.g, kJamColor.g), lerp(kFreeColor.b, kJamColor.b)};
}

inline std::string render_heatmap(const EpisodeTrace& trace, const Network& net) {
  if (trace.num_steps() == 0) throw ConfigError("cannot draw a heatmap of an empty trace");
  const std::size_t L = net.num_links();
  const std::size_t steps = trace.num_steps();
  constexpr int cell_w = 4, cell_h = 24, left = 70, top = 20, bottom = 40;
  const int width = left + static_cast<int>(steps) * cell_w + 20;
  const int height = top + static_cast<int>(L) * cell_h + bottom;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<g id=\"cells\">\n";
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t k = 0; k < steps; ++k) {
      if (trace.links[k].size() != L) throw ConfigError("trace does not match the network's link count");
      const double frac = trace.links[k][l].density / net.links[l].jam_density();
      const Rgb c = heat_color(frac);
      os << "<rect x=\"" << left + static_cast<int>(k) * cell_w << "\" y=\"" << top + static_cast<int>(l) * cell_h
         << "\" width=\"" << cell_w << "\" height=\"" << cell_h << "\" fill=\"rgb(" << c.r << ',' << c.g << ','
         << c.b << ")\"/>\n";
    }
  }
  os << "</g>\n";
  for (std::size_t l = 0; l < L; ++l)
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + static_cast<int>(l) * cell_h + cell_h / 2 + 4
       << "\" text-anchor=\"end\">link " << l << "</text>\n";
  const double dt = steps > 1 ? trace.t_s[1] - trace.t_s[0] : 60.0;
  const int axis_y = top + static_cast<int>(L) * cell_h;
  const std::size_t tick_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1200.0 / dt)));
  for (std::size_t k = 0; k <= steps; k += tick_every) {
    const int x = left + static_cast<int>(k) * cell_w;
    const double minutes = (trace.t_s[0] + static_cast<double>(k) * dt) / 60.0;
    os << "<line x1=\"" << x << "\" y1=\"" << axis_y << "\" x2=\"" << x << "\" y2=\"" << axis_y + 4
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << axis_y + 16 << "\" text-anchor=\"middle\">" << fmt_num(minutes)
       << "</text>\n";
  }
  os << "<text x=\"" << left + static_cast<int>(steps) * cell_w / 2 << "\" y=\"" << axis_y + 32
     << "\" text-anchor=\"middle\">time (min)</text>\n";
  os << "</svg>\n";
  return os.str();
}

inline void write_heatmap(const EpisodeTrace& trace, const Network& net, const std::string& path) {
  write_text(path, render_heatmap(trace, net));
}

}  // namespace headway
