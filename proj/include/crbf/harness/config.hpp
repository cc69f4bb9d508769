#pragma once

// Sweep configuration and its key = value file format.
//
//   # sum rate against transmit power
//   base.n_antennas = 6
//   base.n_sus = 3
//   base.n_pus = 3
//   base.power_budget = 20 dB
//   base.interference_cap = 1 dB      # one value is broadcast to every PU
//   base.rate_floor = 0.5 bps         # nats unless suffixed with bps
//   sweep_variable = P_bs_dB
//   sweep_values = 10, 15, 20, 25, 30
//   n_trials = 100
//   seed = 2024
//   designs = JBFAS_improved, JBFAS_relaxed, SPC, PAPC, ZF_PAPC
//   output_dir = out/fig2a
//
// Keys mirror the field names below; unknown keys are errors.
// epsilon_pair values are written eps_s:eps_p, e.g. 0.04:0.

#include "crbf/model.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crbf::harness {

enum class SweepVariable { PowerDb, InterferenceDb, PuCount, EpsilonPair };

inline const char* to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::PowerDb: return "P_bs_dB";
    case SweepVariable::InterferenceDb: return "I_dB";
    case SweepVariable::PuCount: return "M";
    case SweepVariable::EpsilonPair: return "epsilon_pair";
  }
  return "?";
}

inline SweepVariable parse_sweep_variable(const std::string& s) {
  for (auto v : {SweepVariable::PowerDb, SweepVariable::InterferenceDb, SweepVariable::PuCount,
                 SweepVariable::EpsilonPair}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown sweep_variable '" + s + "' (expected P_bs_dB, I_dB, M or epsilon_pair)");
}

enum class DesignId {
  JbfasRelaxed,
  JbfasImproved,
  JbfasFixedAlpha1,
  JbfasRelaxedRounded,
  JbfasImprovedRounded,
  Spc,
  Papc,
  ZfPapc,
  Oracle,
};

inline const std::vector<DesignId>& all_designs() {
  static const std::vector<DesignId> v{DesignId::JbfasRelaxed,        DesignId::JbfasImproved,
                                       DesignId::JbfasFixedAlpha1,    DesignId::JbfasRelaxedRounded,
                                       DesignId::JbfasImprovedRounded, DesignId::Spc,
                                       DesignId::Papc,                DesignId::ZfPapc,
                                       DesignId::Oracle};
  return v;
}

inline const char* to_string(DesignId d) {
  switch (d) {
    case DesignId::JbfasRelaxed: return "JBFAS_relaxed";
    case DesignId::JbfasImproved: return "JBFAS_improved";
    case DesignId::JbfasFixedAlpha1: return "JBFAS_fixed_alpha1";
    case DesignId::JbfasRelaxedRounded: return "JBFAS_relaxed_rounded";
    case DesignId::JbfasImprovedRounded: return "JBFAS_improved_rounded";
    case DesignId::Spc: return "SPC";
    case DesignId::Papc: return "PAPC";
    case DesignId::ZfPapc: return "ZF_PAPC";
    case DesignId::Oracle: return "Oracle";
  }
  return "?";
}

inline DesignId parse_design(const std::string& s) {
  for (DesignId d : all_designs()) {
    if (s == to_string(d)) return d;
  }
  throw std::invalid_argument("unknown design '" + s + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_number(const std::string& key, const std::string& text) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("key '" + key + "': cannot parse number '" + text + "'");
  }
}

// "20 dB" -> 100, "0.5 bps" -> 0.5 ln 2, plain numbers unchanged.
inline double parse_quantity(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  auto ends_with = [&](const std::string& suffix) {
    return t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("dB")) return from_db(parse_number(key, trim(t.substr(0, t.size() - 2))));
  if (ends_with("bps")) return from_bps(parse_number(key, trim(t.substr(0, t.size() - 3))));
  return parse_number(key, t);
}

inline long parse_integer(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (v != static_cast<double>(static_cast<long>(v))) {
    throw std::invalid_argument("key '" + key + "': expected an integer, got '" + text + "'");
  }
  return static_cast<long>(v);
}

}  // namespace detail

struct EpsilonPair {
  double su = 0.0;
  double pu = 0.0;
};

/// "0.04:0" -> {0.04, 0}.
inline EpsilonPair parse_epsilon_pair(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("epsilon pair '" + text + "' must look like eps_s:eps_p");
  }
  EpsilonPair p{detail::parse_number("sweep_values", detail::trim(text.substr(0, colon))),
                detail::parse_number("sweep_values", detail::trim(text.substr(colon + 1)))};
  if (!(p.su >= 0.0 && p.su < 1.0 && p.pu >= 0.0 && p.pu < 1.0)) {
    throw std::invalid_argument("epsilon pair '" + text + "' must lie in [0, 1)");
  }
  return p;
}

struct SweepConfig {
  ProblemConfig base = ProblemConfig::uniform(6, 3, 3, from_db(20.0), from_db(1.0), from_bps(0.5));
  SweepVariable sweep_variable = SweepVariable::PowerDb;
  std::vector<std::string> sweep_values;  // kept as text: epsilon pairs are not scalars
  int n_trials = 10;
  std::uint64_t seed = 1;
  std::vector<DesignId> designs{DesignId::JbfasImproved, DesignId::JbfasRelaxed, DesignId::Spc, DesignId::Papc,
                                DesignId::ZfPapc};
  std::string output_dir = "out";
  int max_outer_iter = 50;
  double rel_tol = 1e-4;

  void validate() const {
    base.validate();
    if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
    if (sweep_values.empty()) throw std::invalid_argument("sweep_values must not be empty");
    if (designs.empty()) throw std::invalid_argument("designs must not be empty");
    for (const auto& v : sweep_values) {
      if (sweep_variable == SweepVariable::EpsilonPair) {
        parse_epsilon_pair(v);
      } else if (sweep_variable == SweepVariable::PuCount) {
        if (detail::parse_integer("sweep_values", v) < 0) throw std::invalid_argument("M must be nonnegative");
      } else {
        detail::parse_number("sweep_values", v);
      }
    }
  }

  /// Base problem with the sweep variable set to sweep_values[index].
  ProblemConfig problem_at(size_t index) const {
    ProblemConfig cfg = base;
    const std::string& v = sweep_values.at(index);
    switch (sweep_variable) {
      case SweepVariable::PowerDb:
        cfg.power_budget = from_db(detail::parse_number("sweep_values", v));
        break;
      case SweepVariable::InterferenceDb:
        std::fill(cfg.interference_caps.begin(), cfg.interference_caps.end(),
                  from_db(detail::parse_number("sweep_values", v)));
        break;
      case SweepVariable::PuCount: {
        const double cap = base.interference_caps.empty() ? from_db(1.0) : base.interference_caps.front();
        cfg.n_pus = detail::parse_integer("sweep_values", v);
        cfg.interference_caps.assign(static_cast<size_t>(cfg.n_pus), cap);
        break;
      }
      case SweepVariable::EpsilonPair:
        break;
    }
    return cfg;
  }
};

/// Parses the key = value format; '#' starts a comment. With sweep_keys
/// false only the base problem is validated, for commands that do not sweep.
inline SweepConfig parse_sweep_config(std::istream& in, bool sweep_keys = true) {
  SweepConfig cfg;
  std::vector<double> caps, floors, noises;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    auto list_of = [&](std::vector<double>& out) {
      out.clear();
      for (const auto& item : detail::split_list(value)) out.push_back(detail::parse_quantity(key, item));
    };
    if (key == "base.n_antennas") {
      cfg.base.n_antennas = detail::parse_integer(key, value);
    } else if (key == "base.n_sus") {
      cfg.base.n_sus = detail::parse_integer(key, value);
    } else if (key == "base.n_pus") {
      cfg.base.n_pus = detail::parse_integer(key, value);
    } else if (key == "base.power_budget") {
      cfg.base.power_budget = detail::parse_quantity(key, value);
    } else if (key == "base.interference_cap" || key == "base.interference_caps") {
      list_of(caps);
    } else if (key == "base.rate_floor" || key == "base.rate_floors") {
      list_of(floors);
    } else if (key == "base.noise_power" || key == "base.noise_powers") {
      list_of(noises);
    } else if (key == "base.omega") {
      cfg.base.omega = detail::parse_number(key, value);
    } else if (key == "sweep_variable") {
      cfg.sweep_variable = parse_sweep_variable(value);
    } else if (key == "sweep_values") {
      cfg.sweep_values = detail::split_list(value);
    } else if (key == "n_trials") {
      cfg.n_trials = static_cast<int>(detail::parse_integer(key, value));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(detail::parse_integer(key, value));
    } else if (key == "designs") {
      cfg.designs.clear();
      for (const auto& d : detail::split_list(value)) cfg.designs.push_back(parse_design(d));
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "max_outer_iter") {
      cfg.max_outer_iter = static_cast<int>(detail::parse_integer(key, value));
    } else if (key == "rel_tol") {
      cfg.rel_tol = detail::parse_number(key, value);
    } else {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  // Single values broadcast to every PU / SU.
  auto expand = [](std::vector<double> given, Index count, double fallback) {
    if (given.empty()) return std::vector<double>(static_cast<size_t>(count), fallback);
    if (given.size() == 1) return std::vector<double>(static_cast<size_t>(count), given.front());
    return given;
  };
  const double default_cap = cfg.base.interference_caps.empty() ? from_db(1.0) : cfg.base.interference_caps.front();
  cfg.base.interference_caps = expand(caps, cfg.base.n_pus, default_cap);
  cfg.base.rate_floors = expand(floors, cfg.base.n_sus, from_bps(0.5));
  cfg.base.noise_powers = expand(noises, cfg.base.n_sus, 1.0);
  if (sweep_keys) {
    cfg.validate();
  } else {
    cfg.base.validate();
  }
  return cfg;
}

inline SweepConfig load_sweep_config(const std::string& path, bool sweep_keys = true) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  try {
    return parse_sweep_config(in, sweep_keys);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

}  // namespace crbf::harness
