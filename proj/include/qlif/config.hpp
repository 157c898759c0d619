#pragma once

// Experiment configuration: a flat "key = value" text format with dotted
// sections, lossless round-tripping, and the named figure presets.
//
// Site indices in configs are 1-based; they are converted to 0-based when a
// config is turned into engine requests.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qlif/analysis.hpp"
#include "qlif/dmrg.hpp"
#include "qlif/errors.hpp"
#include "qlif/qlif.hpp"
#include "qlif/spin_model.hpp"
#include "qlif/tebd.hpp"

namespace qlif::config {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { QlifTrace, QlifHeatmap, Otoc, LateTime, InitialStateSuite };

enum class StateKind { Neel, AllUp, Product, Ground };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::QlifTrace: return "qlif-trace";
    case ExperimentKind::QlifHeatmap: return "qlif-heatmap";
    case ExperimentKind::Otoc: return "otoc";
    case ExperimentKind::LateTime: return "latetime";
    default: return "initial-state-suite";
  }
}

inline std::string to_string(StateKind k) {
  switch (k) {
    case StateKind::Neel: return "neel";
    case StateKind::AllUp: return "all_up";
    case StateKind::Product: return "product";
    default: return "ground";
  }
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::QlifTrace;
  HamiltonianSpec model{12, 1.0, 0.8, 0.5};
  bool compare_integrable = false;

  EngineKind engine = EngineKind::Exact;
  int ed_capacity = ed::kDefaultCapacity;
  mps::TEBDConfig tebd;
  mps::DMRGConfig dmrg;

  StateKind state = StateKind::Neel;
  std::string spins;  // product state, one of 'u'/'d' per site
  double ground_J = 1.0;
  double ground_B = 0.8;
  double ground_hz = 0.0;

  int frozen = 1;          // 1-based
  std::vector<int> obs;    // 1-based
  int w = 1;               // 1-based OTOC operator site

  double t_max = 10.0;
  double step = 0.05;

  std::optional<analysis::FitWindow> fit_window;  // empty: [t_LR(d), t_max(d)]
  double fit_floor = 1e-14;
  double front_threshold = 1e-3;
  double butterfly_threshold = 0.5;

  std::string output_dir = "out";
  std::string notes;

  HamiltonianSpec ground_spec() const { return {model.L, ground_J, ground_B, ground_hz}; }
  int frozen_index() const { return frozen - 1; }
  std::vector<int> obs_indices() const {
    std::vector<int> out;
    for (int o : obs) out.push_back(o - 1);
    return out;
  }
  TimeGrid grid() const { return {t_max, step}; }
  EngineConfig engine_config() const { return {engine, tebd, ed_capacity}; }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string field_error(const std::string& key, const std::string& what) {
  return "config field '" + key + "': " + what;
}

inline double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError(field_error(key, "expected a number, got '" + v + "'"));
  return x;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError(field_error(key, "expected an integer, got '" + v + "'"));
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError(field_error(key, "expected true or false, got '" + v + "'"));
}

/// "5,6,7", "5..10" or a mix such as "2,5..7".
inline std::vector<int> parse_sites(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ValidationError(field_error(key, "empty entry in site list"));
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_int<int>(key, item));
      continue;
    }
    const int a = parse_int<int>(key, trim(item.substr(0, dots)));
    const int b = parse_int<int>(key, trim(item.substr(dots + 2)));
    if (b < a) throw ValidationError(field_error(key, "descending range '" + item + "'"));
    for (int s = a; s <= b; ++s) out.push_back(s);
  }
  return out;
}

inline std::string join_sites(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace detail

inline ExperimentKind parse_experiment(const std::string& v) {
  for (auto k : {ExperimentKind::QlifTrace, ExperimentKind::QlifHeatmap, ExperimentKind::Otoc,
                 ExperimentKind::LateTime, ExperimentKind::InitialStateSuite})
    if (to_string(k) == v) return k;
  throw ValidationError(detail::field_error("experiment", "unknown experiment '" + v + "'"));
}

/// Ordered key/value pairs; serialize() writes exactly these lines.
inline std::vector<std::pair<std::string, std::string>> to_pairs(const ExperimentConfig& c) {
  using detail::format_double;
  std::vector<std::pair<std::string, std::string>> kv = {
      {"experiment", to_string(c.experiment)},
      {"model.L", std::to_string(c.model.L)},
      {"model.J", format_double(c.model.J)},
      {"model.B", format_double(c.model.B)},
      {"model.hz", format_double(c.model.hz)},
      {"model.compare_integrable", c.compare_integrable ? "true" : "false"},
      {"engine.kind", to_string(c.engine)},
      {"engine.ed_capacity", std::to_string(c.ed_capacity)},
      {"engine.dt", format_double(c.tebd.dt)},
      {"engine.chi", std::to_string(c.tebd.chi)},
      {"engine.svd_cutoff", format_double(c.tebd.svd_cutoff)},
      {"engine.measure_stride", std::to_string(c.tebd.measure_stride)},
      {"engine.truncation_alarm", format_double(c.tebd.truncation_alarm)},
      {"state.kind", to_string(c.state)},
      {"state.spins", c.spins},
      {"state.ground.J", format_double(c.ground_J)},
      {"state.ground.B", format_double(c.ground_B)},
      {"state.ground.hz", format_double(c.ground_hz)},
      {"dmrg.chi", std::to_string(c.dmrg.chi)},
      {"dmrg.tolerance", format_double(c.dmrg.tolerance)},
      {"dmrg.max_sweeps", std::to_string(c.dmrg.max_sweeps)},
      {"dmrg.warmup_sweeps", std::to_string(c.dmrg.warmup_sweeps)},
      {"dmrg.warmup_chi", std::to_string(c.dmrg.warmup_chi)},
      {"dmrg.svd_cutoff", format_double(c.dmrg.svd_cutoff)},
      {"dmrg.seed", std::to_string(c.dmrg.seed)},
      {"sites.frozen", std::to_string(c.frozen)},
      {"sites.obs", detail::join_sites(c.obs)},
      {"sites.w", std::to_string(c.w)},
      {"time.t_max", format_double(c.t_max)},
      {"time.step", format_double(c.step)},
      {"analysis.fit_window",
       c.fit_window ? format_double(c.fit_window->lo) + "," + format_double(c.fit_window->hi) : "auto"},
      {"analysis.fit_floor", format_double(c.fit_floor)},
      {"analysis.front_threshold", format_double(c.front_threshold)},
      {"analysis.butterfly_threshold", format_double(c.butterfly_threshold)},
      {"output.dir", c.output_dir},
      {"notes", c.notes},
  };
  return kv;
}

inline std::string serialize(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [k, v] : to_pairs(c)) out += k + " = " + v + "\n";
  return out;
}

/// Parses the text format. Unlisted keys keep their defaults; unknown keys,
/// duplicates and malformed values are errors naming the field.
inline ExperimentConfig parse(const std::string& text) {
  using namespace detail;
  ExperimentConfig c;
  std::map<std::string, std::string> seen;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string v = trim(t.substr(eq + 1));
    if (!seen.emplace(key, v).second) throw ValidationError(field_error(key, "given twice"));

    if (key == "experiment") c.experiment = parse_experiment(v);
    else if (key == "model.L") c.model.L = parse_int<int>(key, v);
    else if (key == "model.J") c.model.J = parse_double(key, v);
    else if (key == "model.B") c.model.B = parse_double(key, v);
    else if (key == "model.hz") c.model.hz = parse_double(key, v);
    else if (key == "model.compare_integrable") c.compare_integrable = parse_bool(key, v);
    else if (key == "engine.kind") {
      if (v == "ed") c.engine = EngineKind::Exact;
      else if (v == "mps") c.engine = EngineKind::Mps;
      else throw ValidationError(field_error(key, "expected ed or mps, got '" + v + "'"));
    }
    else if (key == "engine.ed_capacity") c.ed_capacity = parse_int<int>(key, v);
    else if (key == "engine.dt") c.tebd.dt = parse_double(key, v);
    else if (key == "engine.chi") c.tebd.chi = parse_int<int>(key, v);
    else if (key == "engine.svd_cutoff") c.tebd.svd_cutoff = parse_double(key, v);
    else if (key == "engine.measure_stride") c.tebd.measure_stride = parse_int<int>(key, v);
    else if (key == "engine.truncation_alarm") c.tebd.truncation_alarm = parse_double(key, v);
    else if (key == "state.kind") {
      bool ok = false;
      for (auto k : {StateKind::Neel, StateKind::AllUp, StateKind::Product, StateKind::Ground})
        if (to_string(k) == v) {
          c.state = k;
          ok = true;
        }
      if (!ok) throw ValidationError(field_error(key, "expected neel, all_up, product or ground"));
    }
    else if (key == "state.spins") c.spins = v;
    else if (key == "state.ground.J") c.ground_J = parse_double(key, v);
    else if (key == "state.ground.B") c.ground_B = parse_double(key, v);
    else if (key == "state.ground.hz") c.ground_hz = parse_double(key, v);
    else if (key == "dmrg.chi") c.dmrg.chi = parse_int<int>(key, v);
    else if (key == "dmrg.tolerance") c.dmrg.tolerance = parse_double(key, v);
    else if (key == "dmrg.max_sweeps") c.dmrg.max_sweeps = parse_int<int>(key, v);
    else if (key == "dmrg.warmup_sweeps") c.dmrg.warmup_sweeps = parse_int<int>(key, v);
    else if (key == "dmrg.warmup_chi") c.dmrg.warmup_chi = parse_int<int>(key, v);
    else if (key == "dmrg.svd_cutoff") c.dmrg.svd_cutoff = parse_double(key, v);
    else if (key == "dmrg.seed") c.dmrg.seed = parse_int<std::uint64_t>(key, v);
    else if (key == "sites.frozen") c.frozen = parse_int<int>(key, v);
    else if (key == "sites.obs") c.obs = v.empty() ? std::vector<int>{} : parse_sites(key, v);
    else if (key == "sites.w") c.w = parse_int<int>(key, v);
    else if (key == "time.t_max") c.t_max = parse_double(key, v);
    else if (key == "time.step") c.step = parse_double(key, v);
    else if (key == "analysis.fit_window") {
      if (v == "auto") {
        c.fit_window.reset();
      } else {
        const auto comma = v.find(',');
        if (comma == std::string::npos) throw ValidationError(field_error(key, "expected auto or lo,hi"));
        c.fit_window = analysis::FitWindow{parse_double(key, trim(v.substr(0, comma))),
                                           parse_double(key, trim(v.substr(comma + 1)))};
      }
    }
    else if (key == "analysis.fit_floor") c.fit_floor = parse_double(key, v);
    else if (key == "analysis.front_threshold") c.front_threshold = parse_double(key, v);
    else if (key == "analysis.butterfly_threshold") c.butterfly_threshold = parse_double(key, v);
    else if (key == "output.dir") c.output_dir = v;
    else if (key == "notes") c.notes = v;
    else throw ValidationError(field_error(key, "unknown key"));
  }
  return c;
}

/// Field-level checks, with the offending key in every message.
inline void validate(const ExperimentConfig& c) {
  using detail::field_error;
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ValidationError(field_error(key, what));
  };
  require(c.model.L >= 2, "model.L", "must be >= 2");
  require(std::isfinite(c.model.J) && std::isfinite(c.model.B) && std::isfinite(c.model.hz), "model",
          "couplings must be finite");
  require(c.t_max >= 0.0, "time.t_max", "must be >= 0");
  require(c.step > 0.0, "time.step", "must be > 0");
  require(c.notes.find('\n') == std::string::npos, "notes", "must be a single line");
  try {
    c.tebd.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(field_error("engine", e.what()));
  }
  if (c.engine == EngineKind::Exact && c.model.L > c.ed_capacity)
    throw CapacityError(field_error("model.L", "L=" + std::to_string(c.model.L) +
                                                   " exceeds the exact engine capacity of " +
                                                   std::to_string(c.ed_capacity) +
                                                   "; set engine.kind = mps or raise engine.ed_capacity"));
  if (c.engine == EngineKind::Mps) {
    const double expected = c.tebd.dt * c.tebd.measure_stride;
    require(std::abs(c.step - expected) <= 1e-12 * std::max(1.0, expected), "time.step",
            "must equal engine.dt * engine.measure_stride for the mps engine");
  }
  auto in_range = [&](int s) { return s >= 1 && s <= c.model.L; };

  if (c.experiment == ExperimentKind::Otoc) {
    require(c.engine == EngineKind::Exact, "engine.kind", "otoc runs on the exact engine only");
    require(in_range(c.w), "sites.w", "out of range 1.." + std::to_string(c.model.L));
    require(!c.obs.empty(), "sites.obs", "needs at least one site");
    for (int o : c.obs) {
      require(in_range(o), "sites.obs", "site " + std::to_string(o) + " out of range");
      require(o != c.w, "sites.obs", "must not contain sites.w");
    }
  } else {
    require(in_range(c.frozen), "sites.frozen", "out of range 1.." + std::to_string(c.model.L));
    require(!c.obs.empty(), "sites.obs", "needs at least one site");
    for (int o : c.obs) {
      require(in_range(o), "sites.obs", "site " + std::to_string(o) + " out of range");
      require(o != c.frozen, "sites.obs", "must not contain the frozen site");
    }
  }
  if (c.experiment == ExperimentKind::LateTime || c.experiment == ExperimentKind::InitialStateSuite)
    require(c.obs.size() == 1, "sites.obs", "this experiment takes exactly one observation site");
  if (c.experiment == ExperimentKind::InitialStateSuite || c.experiment == ExperimentKind::LateTime)
    require(c.model.hz != 0.0, "model.hz", "must be nonzero: the model is the chaotic member of the pair");
  if (c.state == StateKind::Product) {
    require(static_cast<int>(c.spins.size()) == c.model.L, "state.spins", "needs one u/d per site");
    require(c.spins.find_first_not_of("ud") == std::string::npos, "state.spins", "only u and d allowed");
  }
  if (c.fit_window) require(c.fit_window->hi > c.fit_window->lo, "analysis.fit_window", "hi must exceed lo");
  require(c.fit_floor >= kNoiseFloor, "analysis.fit_floor", "must be >= 1e-15");
  require(c.front_threshold > 0.0, "analysis.front_threshold", "must be > 0");
  require(c.butterfly_threshold > 0.0 && c.butterfly_threshold < 1.0, "analysis.butterfly_threshold",
          "must lie in (0, 1)");
  require(c.tebd.chi >= 1 && c.dmrg.chi >= 1, "dmrg.chi", "must be >= 1");
  require(!c.output_dir.empty(), "output.dir", "must not be empty");
}

/// 64-bit FNV-1a of the serialized config, as 16 hex digits.
inline std::string manifest_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

enum class Scale { Paper, Desk };

inline Scale parse_scale(const std::string& s) {
  if (s == "paper") return Scale::Paper;
  if (s == "desk") return Scale::Desk;
  throw ValidationError("unknown scale '" + s + "' (expected paper or desk)");
}

inline std::vector<std::string> preset_names() {
  return {"fig1-panel", "fig2-heatmap", "fig3-suite", "fig5-latetime"};
}

/// Paper scale uses the full-size parameters (L=20..30, chi=128). Desk scale
/// keeps the structure on L=12 with the exact engine (fig5: L=20 at chi=64),
/// placing the frozen site at L/3 and keeping the distances.
inline ExperimentConfig preset(const std::string& name, Scale scale) {
  ExperimentConfig c;
  c.model = {12, 1.0, 0.8, 0.5};
  c.state = StateKind::Neel;
  const bool paper = scale == Scale::Paper;
  auto use_mps = [&](int L, int chi, double dt) {
    c.model.L = L;
    c.engine = EngineKind::Mps;
    c.tebd.chi = chi;
    c.tebd.dt = dt;
    c.tebd.measure_stride = 1;
    c.step = dt;
  };
  c.step = 0.05;
  if (name == "fig1-panel") {
    c.experiment = ExperimentKind::QlifTrace;
    c.compare_integrable = true;
    c.t_max = 10.0;
    if (paper) {
      use_mps(30, 128, 0.05);
      c.frozen = 10;
      c.obs = {14};
    } else {
      c.frozen = 4;
      c.obs = {8};
      c.notes = "desk scale: L=12 exact engine, frozen at L/3, d=4 kept";
    }
  } else if (name == "fig2-heatmap") {
    c.experiment = ExperimentKind::QlifHeatmap;
    c.compare_integrable = true;
    c.t_max = 10.0;
    if (paper) {
      use_mps(30, 128, 0.05);
      c.frozen = 10;
      c.obs = {11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    } else {
      c.frozen = 4;
      c.obs = {5, 6, 7, 8, 9, 10};
      c.notes = "desk scale: L=12 exact engine, frozen at L/3, d=1..6";
    }
  } else if (name == "fig3-suite") {
    c.experiment = ExperimentKind::InitialStateSuite;
    c.t_max = 10.0;
    if (paper) {
      use_mps(30, 128, 0.05);
      c.frozen = 10;
      c.obs = {20};
    } else {
      c.frozen = 4;
      c.obs = {7};
      c.notes = "desk scale: L=12 exact engine with dense ground states, frozen at L/3, d=3";
    }
  } else if (name == "fig5-latetime") {
    c.experiment = ExperimentKind::LateTime;
    c.compare_integrable = true;
    c.t_max = 40.0;
    use_mps(20, paper ? 128 : 64, 0.1);
    c.frozen = 8;
    c.obs = {12};
    if (!paper) c.notes = "desk scale: chi reduced to 64";
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  c.output_dir = name + (paper ? "-paper" : "-desk");
  return c;
}

}  // namespace qlif::config
