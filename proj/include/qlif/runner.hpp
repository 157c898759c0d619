#pragma once

// Experiment dispatch and deterministic output: trace/heatmap/OTOC CSVs
// (plot-ready, each headed by the manifest hash), JSON fit records and a run
// manifest.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlif/analysis.hpp"
#include "qlif/config.hpp"
#include "qlif/ed.hpp"
#include "qlif/errors.hpp"
#include "qlif/otoc.hpp"
#include "qlif/qlif.hpp"

namespace qlif::runner {

namespace fs = std::filesystem;
using json = nlohmann::json;
using config::ExperimentConfig;

inline constexpr const char* kOutputRootEnv = "QLIF_OUTPUT_ROOT";

/// config output.dir resolved against $QLIF_OUTPUT_ROOT (default: cwd).
inline fs::path resolve_output_dir(const ExperimentConfig& c) {
  const fs::path dir(c.output_dir);
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv(kOutputRootEnv);
  return (root && *root ? fs::path(root) : fs::current_path()) / dir;
}

// ---------------------------------------------------------------- CSV output

inline std::string num(double v) { return config::detail::format_double(v); }

inline std::string spec_comment(const HamiltonianSpec& s) {
  return "L=" + std::to_string(s.L) + " J=" + num(s.J) + " B=" + num(s.B) + " hz=" + num(s.hz);
}

inline void write_trace_csv(const fs::path& path, const std::string& hash, const HamiltonianSpec& spec,
                            const QLIFTrace& tr) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# manifest_hash=" << hash << "\n";
  f << "# " << spec_comment(spec) << " frozen=" << tr.frozen_site + 1 << " obs=" << tr.obs_site + 1
    << " d=" << tr.distance << " engine=" << tr.meta.engine << "\n";
  f << "time,T_d,S_full,S_frozen,integral,below_floor\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k)
    f << num(tr.times[k]) << ',' << num(tr.t_d[k]) << ',' << num(tr.s_full[k]) << ','
      << num(tr.s_frozen[k]) << ',' << num(tr.integral[k]) << ',' << int(tr.below_floor[k]) << "\n";
}

inline void write_heatmap_csv(const fs::path& path, const std::string& hash, const HamiltonianSpec& spec,
                              int frozen, const Heatmap& h) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# manifest_hash=" << hash << "\n";
  f << "# " << spec_comment(spec) << " frozen=" << frozen + 1 << " values=|T_d|\n";
  f << "d,obs";
  for (double t : h.times) f << ',' << num(t);
  f << "\n";
  for (Eigen::Index r = 0; r < h.values.rows(); ++r) {
    f << h.distances[r] << ',' << h.obs_sites[r] + 1;
    for (Eigen::Index c = 0; c < h.values.cols(); ++c) f << ',' << num(h.values(r, c));
    f << "\n";
  }
}

inline void write_otoc_csv(const fs::path& path, const std::string& hash, const otoc::OTOCTrace& tr) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# manifest_hash=" << hash << "\n";
  f << "# " << spec_comment(tr.spec) << " w=" << tr.w_site + 1 << " beta=0\n";
  f << "time";
  for (std::size_t i = 0; i < tr.v_sites.size(); ++i)
    f << ",C_v" << tr.v_sites[i] + 1 << "_d" << tr.distances[i];
  f << "\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    f << num(tr.times[k]);
    for (const auto& c : tr.c) f << ',' << num(c[k]);
    f << "\n";
  }
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

// ----------------------------------------------------------------- CSV input

/// Comment lines ("# key=value ...") and numeric columns of a CSV file.
struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) {
        std::vector<double> out;
        for (const auto& r : rows) out.push_back(r.at(j));
        return out;
      }
    throw ValidationError("column '" + name + "' not found");
  }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos) t.meta[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(config::detail::parse_double(path.filename().string(), c));
    if (row.size() != t.header.size())
      throw ValidationError(path.string() + ": row width differs from header");
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ValidationError(path.string() + ": no header row");
  return t;
}

inline Heatmap read_heatmap_csv(const fs::path& path) {
  const auto t = read_csv(path);
  if (t.header.size() < 3 || t.header[0] != "d" || t.header[1] != "obs")
    throw ValidationError(path.string() + ": expected a heatmap with columns d,obs,<times>");
  Heatmap h;
  for (std::size_t j = 2; j < t.header.size(); ++j)
    h.times.push_back(config::detail::parse_double("time header", t.header[j]));
  h.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(h.times.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    h.distances.push_back(static_cast<int>(t.rows[r][0]));
    h.obs_sites.push_back(static_cast<int>(t.rows[r][1]) - 1);
    for (std::size_t j = 2; j < t.header.size(); ++j)
      h.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j - 2)) = t.rows[r][j];
  }
  return h;
}

// ---------------------------------------------------------------- JSON bits

inline json fit_json(const analysis::FitResult& f) {
  return {{"alpha", f.alpha},          {"prefactor", f.prefactor},
          {"r_squared", f.r_squared},  {"window", {f.window.lo, f.window.hi}},
          {"n_points", f.n_points},    {"floor_excluded", f.floor_excluded}};
}

inline json velocity_json(const analysis::VelocityFit& v) {
  json arrivals = json::array();
  for (std::size_t i = 0; i < v.distances.size(); ++i)
    arrivals.push_back({{"d", v.distances[i]},
                        {"t", v.arrivals[i] ? json(*v.arrivals[i]) : json(nullptr)}});
  return {{"velocity", v.velocity}, {"r_squared", v.r_squared}, {"threshold", v.threshold},
          {"arrivals", arrivals}};
}

inline json verdict_json(const analysis::ChaosVerdict& v) {
  return {{"verdict", analysis::to_string(v.verdict)},
          {"early_slope", v.early_slope},
          {"late_slope", v.late_slope},
          {"late_slope_ratio", v.late_slope_ratio},
          {"early_window", {v.early_window.lo, v.early_window.hi}},
          {"late_window", {v.late_window.lo, v.late_window.hi}}};
}

// -------------------------------------------------------------------- runner

struct RunManifest {
  std::string config_text;
  std::string hash;
  std::string version = config::kVersion;
  double wall_seconds = 0.0;
  double truncation_error = 0.0;  // largest cumulative discarded weight of any branch
  std::vector<std::string> warnings;
  std::vector<std::string> files;
  json results = json::object();

  json to_json() const {
    return {{"config", config_text}, {"manifest_hash", hash},       {"version", version},
            {"wall_clock_seconds", wall_seconds}, {"truncation_error", truncation_error},
            {"warnings", warnings},  {"files", files},              {"results", results}};
  }
};

namespace detail {

/// Evaluates QLIF traces for one config, sharing exact-engine
/// eigendecompositions between protocols that use the same Hamiltonian.
class TraceSource {
 public:
  explicit TraceSource(const ExperimentConfig& c) : c_(c) {}

  const ed::Propagator& propagator(const HamiltonianSpec& spec, int frozen) {
    const auto key = std::make_tuple(spec.J, spec.B, spec.hz, frozen);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      const OperatorSum h = frozen < 0 ? build_hamiltonian(spec) : build_frozen_hamiltonian(spec, frozen);
      it = cache_.emplace(key, std::make_unique<ed::Propagator>(h, c_.ed_capacity)).first;
    }
    return *it->second;
  }

  std::vector<QLIFTrace> traces(const HamiltonianSpec& evolution, const InitialState& init) {
    const int frozen = c_.frozen_index();
    const auto obs = c_.obs_indices();
    if (c_.engine == EngineKind::Mps) {
      QLIFRequest req;
      req.spec = evolution;
      req.frozen_site = frozen;
      req.obs_sites = obs;
      req.initial = init;
      req.engine = c_.engine_config();
      req.grid = c_.grid();
      return qlif_traces(req);
    }
    ed::StateVector psi0;
    std::optional<double> e0;
    switch (init.kind) {
      case InitialKind::Neel: psi0 = ed::neel_state(evolution.L); break;
      case InitialKind::AllUp: psi0 = ed::all_up_state(evolution.L); break;
      case InitialKind::Product: psi0 = ed::product_state(init.spins); break;
      case InitialKind::Dense: psi0 = init.dense; break;
      case InitialKind::GroundState: {
        const auto& p = propagator(init.ground_spec, -1);
        psi0 = p.eigenvector(0);
        e0 = p.energies()(0);
        break;
      }
    }
    const auto times = c_.grid().points();
    auto out = qlif_traces_exact(propagator(evolution, -1), propagator(evolution, frozen), psi0, frozen,
                                 obs, times);
    for (auto& t : out) t.meta.ground_energy = e0;
    return out;
  }

  InitialState initial_state() const {
    switch (c_.state) {
      case config::StateKind::AllUp: return InitialState::all_up();
      case config::StateKind::Product: {
        std::vector<int> spins;
        for (char ch : c_.spins) spins.push_back(ch == 'u' ? 0 : 1);
        return InitialState::product(std::move(spins));
      }
      case config::StateKind::Ground: return InitialState::ground_state(c_.ground_spec(), c_.dmrg);
      default: return InitialState::neel();
    }
  }

 private:
  const ExperimentConfig& c_;
  std::map<std::tuple<double, double, double, int>, std::unique_ptr<ed::Propagator>> cache_;
};

}  // namespace detail

/// Runs one experiment, writing every output into `out_dir`.
inline RunManifest run(const ExperimentConfig& c, const fs::path& out_dir) {
  config::validate(c);
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.config_text = config::serialize(c);
  m.hash = config::manifest_hash(c);
  fs::create_directories(out_dir);

  auto emit = [&](const std::string& name) { m.files.push_back(name); return out_dir / name; };
  auto absorb = [&](const QLIFTrace& t, const std::string& label) {
    m.truncation_error = std::max({m.truncation_error, t.meta.truncation_error_full,
                                   t.meta.truncation_error_frozen});
    for (const auto& w : t.meta.warnings) m.warnings.push_back(label + ": " + w);
  };
  auto try_fit = [&](const QLIFTrace& t, const HamiltonianSpec& spec) -> json {
    const auto window = c.fit_window.value_or(analysis::default_fit_window(spec, t.distance));
    try {
      return fit_json(analysis::powerlaw_fit(t, window, c.fit_floor));
    } catch (const FitError& e) {
      return {{"error", e.what()}, {"window", {window.lo, window.hi}}};
    }
  };

  detail::TraceSource source(c);
  const HamiltonianSpec chaotic = c.model;
  const HamiltonianSpec integrable = c.model.integrable_counterpart();

  switch (c.experiment) {
    case config::ExperimentKind::QlifTrace: {
      std::vector<std::pair<std::string, HamiltonianSpec>> runs = {{"", c.model}};
      if (c.compare_integrable && !c.model.is_integrable()) runs.push_back({"_integrable", integrable});
      json fits = json::array();
      for (const auto& [suffix, spec] : runs) {
        for (const auto& t : source.traces(spec, source.initial_state())) {
          const std::string name = "trace_obs" + std::to_string(t.obs_site + 1) + suffix + ".csv";
          write_trace_csv(emit(name), m.hash, spec, t);
          absorb(t, name);
          fits.push_back({{"file", name}, {"d", t.distance}, {"hz", spec.hz}, {"fit", try_fit(t, spec)},
                          {"integral_end", t.integral.back()}});
        }
      }
      write_json(emit("fits.json"), fits);
      m.results["fits"] = fits;
      break;
    }
    case config::ExperimentKind::QlifHeatmap: {
      std::vector<std::pair<std::string, HamiltonianSpec>> runs = {{"", c.model}};
      if (c.compare_integrable && !c.model.is_integrable()) runs.push_back({"_integrable", integrable});
      json fronts = json::object();
      for (const auto& [suffix, spec] : runs) {
        auto traces = source.traces(spec, source.initial_state());
        for (const auto& t : traces) absorb(t, "heatmap" + suffix);
        const Heatmap h = heatmap_from_traces(std::move(traces));
        const std::string name = "heatmap" + suffix + ".csv";
        write_heatmap_csv(emit(name), m.hash, spec, c.frozen_index(), h);
        try {
          fronts[name] = velocity_json(analysis::light_cone_velocity(h, c.front_threshold));
        } catch (const FitError& e) {
          fronts[name] = {{"error", e.what()}};
        }
      }
      write_json(emit("velocity.json"), fronts);
      m.results["velocity"] = fronts;
      break;
    }
    case config::ExperimentKind::Otoc: {
      const auto times = c.grid().points();
      const auto tr = otoc::otoc_multidistance(source.propagator(c.model, -1), c.model, c.w - 1,
                                               c.obs_indices(), times);
      write_otoc_csv(emit("otoc.csv"), m.hash, tr);
      json b;
      try {
        const auto fit = otoc::butterfly_velocity(tr, c.butterfly_threshold);
        b = {{"v_b", fit.v_b}, {"threshold", fit.threshold}, {"r_squared", fit.r_squared},
             {"saturation", fit.saturation}, {"warnings", fit.warnings}};
      } catch (const FitError& e) {
        b = {{"error", e.what()}};
      }
      b["max_imag"] = tr.max_imag;
      write_json(emit("butterfly.json"), b);
      m.results["butterfly"] = b;
      break;
    }
    case config::ExperimentKind::LateTime: {
      json out = json::object();
      for (const auto& [label, spec] : {std::pair{"chaotic", chaotic}, std::pair{"integrable", integrable}}) {
        if (std::string(label) == "integrable" && !c.compare_integrable) continue;
        const auto t = source.traces(spec, source.initial_state()).front();
        const std::string name = std::string("trace_") + label + ".csv";
        write_trace_csv(emit(name), m.hash, spec, t);
        absorb(t, name);
        json r = {{"file", name}, {"integral_end", t.integral.back()}};
        const double t_scr = velocity_table(spec).t_scr();
        r["t_scr"] = t_scr;
        try {
          r["chaos_metric"] = verdict_json(analysis::chaos_metric(t, t_scr));
        } catch (const FitError& e) {
          r["chaos_metric"] = {{"error", e.what()}};
        }
        out[label] = r;
      }
      write_json(emit("latetime.json"), out);
      m.results["latetime"] = out;
      break;
    }
    case config::ExperimentKind::InitialStateSuite: {
      // N: Neel -> chaotic; A: integrable GS -> integrable; B: integrable GS ->
      // chaotic; C: chaotic GS -> chaotic.
      const std::vector<std::tuple<std::string, InitialState, HamiltonianSpec>> protocols = {
          {"N", InitialState::neel(), chaotic},
          {"A", InitialState::ground_state(integrable, c.dmrg), integrable},
          {"B", InitialState::ground_state(integrable, c.dmrg), chaotic},
          {"C", InitialState::ground_state(chaotic, c.dmrg), chaotic},
      };
      json out = json::object();
      for (const auto& [label, init, spec] : protocols) {
        const auto t = source.traces(spec, init).front();
        const std::string name = "trace_" + label + ".csv";
        write_trace_csv(emit(name), m.hash, spec, t);
        absorb(t, name);
        const auto a = t.abs_t_d();
        json r = {{"file", name}, {"peak_abs_T_d", *std::max_element(a.begin(), a.end())},
                  {"integral_end", t.integral.back()}};
        if (t.meta.ground_energy) r["ground_energy"] = *t.meta.ground_energy;
        out[label] = r;
      }
      write_json(emit("suite.json"), out);
      m.results["suite"] = out;
      break;
    }
  }

  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(out_dir / "manifest.json", m.to_json());
  return m;
}

}  // namespace qlif::runner
