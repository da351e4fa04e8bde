#pragma once

// CSV emission for metrics, schedules and analysis output, plus the run
// manifest. Numbers are printed with 12 significant digits.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gossipkf/analysis.hpp"
#include "gossipkf/errors.hpp"
#include "gossipkf/scheduler.hpp"
#include "gossipkf/sim.hpp"

namespace gossipkf {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// 64-bit FNV-1a; used only to fingerprint artifacts in the manifest.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Per step k: one `msee` row per node, `ave` msee, `delta` disagreement,
/// then one `trace_P` row per node. k and node are 1-based.
inline std::string metrics_csv(const MetricSeries& series) {
  std::string out = "k,node,metric,value\n";
  for (int k = 0; k < series.horizon(); ++k) {
    const std::string kk = std::to_string(k + 1);
    for (int i = 0; i < series.nodes(); ++i)
      out += kk + "," + std::to_string(i + 1) + ",msee," + format_number(series.msee(k, i)) + "\n";
    out += kk + ",ave,msee," + format_number(series.msee_ave(k)) + "\n";
    out += kk + ",delta,disagreement," + format_number(series.disagreement(k)) + "\n";
    for (int i = 0; i < series.nodes(); ++i)
      out += kk + "," + std::to_string(i + 1) + ",trace_P," + format_number(series.trace_P(k, i)) +
             "\n";
  }
  return out;
}

inline std::string gamma_string(const GammaRow& row) {
  std::string s;
  for (auto g : row) s += g ? '1' : '0';
  return s;
}

inline std::string schedule_csv(const ScheduleResult& result) {
  std::string out = "node,method,gamma,power,trace\n";
  const std::string method = to_string(result.method);
  for (const auto& s : result.nodes)
    out += std::to_string(s.node + 1) + "," + method + "," + gamma_string(s.gamma) + "," +
           format_number(s.power) + "," + format_number(s.trace) + "\n";
  out += "J," + method + ",,," + format_number(result.J) + "\n";
  return out;
}

/// Output of `analyze`: spectral diagnostics and the trace comparison series.
struct AnalysisReport {
  double lambda2 = 0.0;
  int averaging_time = 0;
  int rounds = 0;
  double orthogonality_deviation = 0.0;
  double fixed_point_trace = 0.0;
  double contraction_ratio = 0.0;
  int fixed_point_iterations = 0;
  std::vector<TraceComparison> series;
};

inline std::string analysis_csv(const AnalysisReport& r) {
  std::string out = "k,quantity,value\n";
  auto row = [&](const std::string& k, const std::string& q, double v) {
    out += k + "," + q + "," + format_number(v) + "\n";
  };
  row("", "lambda2", r.lambda2);
  row("", "averaging_time_0.01", r.averaging_time);
  row("", "K", r.rounds);
  row("", "orthogonality_deviation", r.orthogonality_deviation);
  row("", "fixed_point_trace", r.fixed_point_trace);
  row("", "contraction_ratio", r.contraction_ratio);
  row("", "fixed_point_iterations", r.fixed_point_iterations);
  for (const auto& c : r.series) {
    row(std::to_string(c.k), "gossip_trace", c.gossip_trace);
    row(std::to_string(c.k), "decentralized_trace", c.decentralized_trace);
  }
  return out;
}

/// Writes `content` to `dir/name` and returns the path.
inline std::string emit_csv(const std::string& dir, const std::string& name,
                            const std::string& content) {
  const std::string path = (std::filesystem::path(dir) / name).string();
  write_file(path, content);
  return path;
}

/// Provenance of one CLI invocation. The manifest is written before any result
/// file and rewritten with artifact checksums once they exist.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::pair<std::string, std::string>> settings;   // key, value
  std::vector<std::pair<std::string, std::uint64_t>> artifacts;  // file, fnv1a64

  std::string render() const {
    std::string out;
    out += "command=" + command + "\n";
    out += "config=" + config_path + "\n";
    out += "seed=" + std::to_string(seed) + "\n";
    out += "out=" + out_dir + "\n";
    for (const auto& [k, v] : settings) out += k + "=" + v + "\n";
    for (const auto& [file, sum] : artifacts) out += "artifact " + file + " fnv1a64=" + hex64(sum) + "\n";
    return out;
  }

  void write() const { emit_csv(out_dir, "manifest.txt", render()); }

  /// Writes an artifact and records its checksum.
  void add_artifact(const std::string& name, const std::string& content) {
    emit_csv(out_dir, name, content);
    artifacts.emplace_back(name, fnv1a64(content));
  }
};

}  // namespace gossipkf
