#pragma once

// Scenario files: flat sectioned text, one `key = value` per line.
//
//   [model]      A, Q, Pi0 (default identity)
//   [sensor.N]   C, R, upsilon (number in (0,1] or "random"; default 1)
//   [topology]   Gamma
//   [gossip]     P (optional; uniform over neighbors otherwise)
//   [run]        K (integer or "auto"), horizon, runs, seed, strategy
//   [budget]     c, delta
//
// Matrices are written row by row, rows separated by ';' and entries by
// whitespace or commas. '#' starts a comment.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gossipkf/errors.hpp"
#include "gossipkf/gossip.hpp"
#include "gossipkf/linalg.hpp"
#include "gossipkf/model.hpp"
#include "gossipkf/sim.hpp"

namespace gossipkf {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& token, int line) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(line, "not a number: '" + token + "'");
  return v;
}

inline long long parse_integer(const std::string& token, int line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError(line, "not an integer: '" + token + "'");
  return v;
}

inline Matrix parse_matrix(const std::string& text, int line) {
  std::vector<std::vector<double>> rows;
  std::stringstream row_stream(text);
  std::string row_text;
  while (std::getline(row_stream, row_text, ';')) {
    for (char& c : row_text)
      if (c == ',') c = ' ';
    std::stringstream entries(row_text);
    std::vector<double> row;
    std::string token;
    while (entries >> token) row.push_back(parse_double(token, line));
    if (row.empty()) throw ParseError(line, "empty matrix row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(line, "empty matrix");
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ParseError(line, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

/// Round-trippable rendering of a double.
inline std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string render_matrix(const Matrix& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r > 0) out += "; ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ' ';
      out += exact(m(r, c));
    }
  }
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

}  // namespace detail

/// Builds the gossip plan, resolves K = "auto" as the 0.01-averaging time of
/// the plan, and checks every invariant. Safe to call again after overrides.
inline void finalize_scenario(ScenarioConfig& config) {
  const int n = config.nodes();
  if (config.explicit_plan) {
    config.plan = GossipPlan{*config.explicit_plan};
  } else {
    config.plan = build_uniform_gossip_plan(config.topology);
  }
  if (config.auto_rounds) {
    config.rounds = n < 2 ? 1 : averaging_time(0.01, second_eigenvalue(expected_matrix(config.plan)));
  }
  validate(config);
}

/// Parses scenario text; `origin` names the source in messages.
inline ScenarioConfig parse_scenario_text(const std::string& text) {
  std::map<std::string, detail::Section> sections;
  std::string current;
  std::stringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      current = detail::trim(line.substr(1, line.size() - 2));
      if (current.empty()) throw ParseError(line_no, "empty section name");
      if (sections.contains(current)) throw ParseError(line_no, "duplicate section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    if (current.empty()) throw ParseError(line_no, "key outside of any section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(line_no, "expected 'key = value'");
    auto& section = sections[current];
    if (section.contains(key)) throw ParseError(line_no, "duplicate key '" + key + "'");
    section[key] = {value, line_no};
  }

  auto require = [&](const std::string& sec, const std::string& key) -> const detail::Entry& {
    auto s = sections.find(sec);
    if (s == sections.end()) throw ValidationError("missing section [" + sec + "]");
    auto e = s->second.find(key);
    if (e == s->second.end()) throw ValidationError("missing key '" + key + "' in [" + sec + "]");
    return e->second;
  };
  auto find = [&](const std::string& sec, const std::string& key) -> const detail::Entry* {
    auto s = sections.find(sec);
    if (s == sections.end()) return nullptr;
    auto e = s->second.find(key);
    return e == s->second.end() ? nullptr : &e->second;
  };
  auto matrix = [](const detail::Entry& e) { return detail::parse_matrix(e.value, e.line); };

  ScenarioConfig config;
  config.model.A = matrix(require("model", "A"));
  config.model.Q = matrix(require("model", "Q"));
  if (const auto* e = find("model", "Pi0")) {
    config.model.Pi0 = matrix(*e);
  } else {
    config.model.Pi0 = Matrix::Identity(config.model.A.rows(), config.model.A.rows());
  }

  const auto& gamma_entry = require("topology", "Gamma");
  const Matrix gamma = matrix(gamma_entry);
  if ((gamma.array() != 0.0 && gamma.array() != 1.0).any())
    throw ParseError(gamma_entry.line, "Gamma must be binary");
  try {
    config.topology = Topology(gamma.cast<int>());
  } catch (const ValidationError& e) {
    throw ParseError(gamma_entry.line, e.what());
  }
  const int n = config.topology.size();

  bool any_gain = false;
  for (const auto& [name, section] : sections) {
    if (name.rfind("sensor.", 0) == 0) {
      const std::string id = name.substr(7);
      long long idx = 0;
      try {
        idx = detail::parse_integer(id, 0);
      } catch (const ParseError&) {
        throw ValidationError("bad sensor section [" + name + "]");
      }
      if (idx < 1 || idx > n)
        throw ValidationError("sensor section [" + name + "] outside 1.." + std::to_string(n));
    } else if (name != "model" && name != "topology" && name != "gossip" && name != "run" &&
               name != "budget") {
      throw ValidationError("unknown section [" + name + "]");
    }
  }
  for (int i = 1; i <= n; ++i) {
    const std::string sec = "sensor." + std::to_string(i);
    SensorModel s{matrix(require(sec, "C")), matrix(require(sec, "R"))};
    SensorGain gain;
    if (const auto* e = find(sec, "upsilon")) {
      any_gain = true;
      if (e->value == "random") {
        gain.kind = SensorGain::Kind::kRandom;
      } else {
        gain.kind = SensorGain::Kind::kFixed;
        gain.value = detail::parse_double(e->value, e->line);
        if (!(gain.value > 0.0 && gain.value <= 1.0))
          throw ParseError(e->line, "upsilon must lie in (0, 1]");
      }
    }
    config.sensors.push_back(std::move(s));
    config.gains.push_back(gain);
  }
  if (!any_gain) config.gains.clear();

  if (const auto* e = find("gossip", "P")) config.explicit_plan = matrix(*e);

  if (const auto* e = find("run", "K")) {
    if (e->value == "auto") {
      config.auto_rounds = true;
    } else {
      config.rounds = static_cast<int>(detail::parse_integer(e->value, e->line));
      if (config.rounds < 0) throw ParseError(e->line, "K must be nonnegative");
    }
  } else {
    config.auto_rounds = true;
  }
  if (const auto* e = find("run", "horizon")) {
    config.horizon = static_cast<int>(detail::parse_integer(e->value, e->line));
    if (config.horizon < 1) throw ParseError(e->line, "horizon must be at least 1");
  }
  if (const auto* e = find("run", "runs")) {
    config.runs = static_cast<int>(detail::parse_integer(e->value, e->line));
    if (config.runs < 1) throw ParseError(e->line, "runs must be at least 1");
  }
  if (const auto* e = find("run", "seed")) {
    const long long s = detail::parse_integer(e->value, e->line);
    if (s < 0) throw ParseError(e->line, "seed must be nonnegative");
    config.base_seed = static_cast<std::uint64_t>(s);
  }
  if (const auto* e = find("run", "strategy")) {
    try {
      config.strategy = parse_strategy(e->value);
    } catch (const ValidationError& err) {
      throw ParseError(e->line, err.what());
    }
  }

  if (sections.contains("budget")) {
    PowerBudget budget;
    budget.c = matrix(require("budget", "c"));
    const auto& d = require("budget", "delta");
    const Matrix delta = matrix(d);
    if (delta.rows() != 1 && delta.cols() != 1) throw ParseError(d.line, "delta must be a vector");
    budget.delta = delta.reshaped();
    config.budget = budget;
  }

  finalize_scenario(config);
  return config;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig parse_scenario(const std::string& path) {
  return parse_scenario_text(read_file(path));
}

/// Canonical scenario text; parse_scenario_text(emit_scenario(c)) reproduces c.
inline std::string emit_scenario(const ScenarioConfig& config) {
  using detail::render_matrix;
  std::ostringstream out;
  out << "[model]\n";
  out << "A = " << render_matrix(config.model.A) << "\n";
  out << "Q = " << render_matrix(config.model.Q) << "\n";
  out << "Pi0 = " << render_matrix(config.model.Pi0) << "\n";
  for (std::size_t i = 0; i < config.sensors.size(); ++i) {
    out << "\n[sensor." << i + 1 << "]\n";
    out << "C = " << render_matrix(config.sensors[i].C) << "\n";
    out << "R = " << render_matrix(config.sensors[i].R) << "\n";
    if (!config.gains.empty()) {
      const auto& g = config.gains[i];
      if (g.kind == SensorGain::Kind::kRandom) out << "upsilon = random\n";
      if (g.kind == SensorGain::Kind::kFixed) out << "upsilon = " << detail::exact(g.value) << "\n";
    }
  }
  out << "\n[topology]\n";
  out << "Gamma = " << render_matrix(config.topology.gamma().cast<double>()) << "\n";
  if (config.explicit_plan) {
    out << "\n[gossip]\n";
    out << "P = " << render_matrix(*config.explicit_plan) << "\n";
  }
  out << "\n[run]\n";
  out << "K = " << (config.auto_rounds ? std::string("auto") : std::to_string(config.rounds)) << "\n";
  out << "horizon = " << config.horizon << "\n";
  out << "runs = " << config.runs << "\n";
  out << "seed = " << config.base_seed << "\n";
  out << "strategy = " << to_string(config.strategy) << "\n";
  if (config.budget) {
    out << "\n[budget]\n";
    out << "c = " << render_matrix(config.budget->c) << "\n";
    out << "delta = " << render_matrix(config.budget->delta.transpose()) << "\n";
  }
  return out.str();
}

/// Field-by-field equality of two scenarios.
inline bool equivalent(const ScenarioConfig& a, const ScenarioConfig& b) {
  auto same_budget = [](const std::optional<PowerBudget>& x, const std::optional<PowerBudget>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->c == y->c && x->delta == y->delta);
  };
  if (a.sensors.size() != b.sensors.size()) return false;
  for (std::size_t i = 0; i < a.sensors.size(); ++i)
    if (a.sensors[i].C != b.sensors[i].C || a.sensors[i].R != b.sensors[i].R) return false;
  return a.model.A == b.model.A && a.model.Q == b.model.Q && a.model.Pi0 == b.model.Pi0 &&
         a.gains == b.gains && a.topology == b.topology &&
         a.explicit_plan.has_value() == b.explicit_plan.has_value() &&
         (!a.explicit_plan || *a.explicit_plan == *b.explicit_plan) && a.plan.P == b.plan.P &&
         a.auto_rounds == b.auto_rounds && a.rounds == b.rounds && a.horizon == b.horizon &&
         a.runs == b.runs && a.base_seed == b.base_seed && a.strategy == b.strategy &&
         same_budget(a.budget, b.budget);
}

}  // namespace gossipkf
