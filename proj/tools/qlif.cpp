// qlif: experiment runner and post-processing for QLIF / OTOC studies.
//
//   qlif run <config> [--out DIR]
//   qlif preset <name> [--scale paper|desk]
//   qlif fit <trace.csv> --window a,b [--floor x]
//   qlif velocity <heatmap.csv> [--threshold x]
//   qlif verdict <trace.csv> [--t-scr x]
//
// Exit status: 0 ok, 1 error, 2 completed with warnings.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qlif/analysis.hpp"
#include "qlif/config.hpp"
#include "qlif/linalg.hpp"
#include "qlif/runner.hpp"

namespace {

using namespace qlif;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kWarnings = 2;

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

analysis::FitWindow parse_window(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ValidationError("--window expects a,b");
  return {config::detail::parse_double("--window", config::detail::trim(s.substr(0, comma))),
          config::detail::parse_double("--window", config::detail::trim(s.substr(comma + 1)))};
}

/// Scrambling time from a trace CSV's "# L=.. J=.. B=.." comment.
double t_scr_from_meta(const runner::CsvTable& t) {
  for (const char* k : {"L", "J", "B"})
    if (!t.meta.count(k)) throw ValidationError("trace has no model comment; pass --t-scr");
  HamiltonianSpec s;
  s.L = config::detail::parse_int<int>("L", t.meta.at("L"));
  s.J = config::detail::parse_double("J", t.meta.at("J"));
  s.B = config::detail::parse_double("B", t.meta.at("B"));
  return velocity_table(s).t_scr();
}

}  // namespace

int main(int argc, char** argv) {
  linalg::ensure_reliable_blas(argv);

  CLI::App app{"Quantum Liang information flow and OTOC experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment config");
  std::string config_path, out_override;
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_override, "output directory (overrides output.dir)");

  auto* preset = app.add_subcommand("preset", "print a figure preset config");
  std::string preset_name, scale = "desk";
  preset->add_option("name", preset_name, "fig1-panel | fig2-heatmap | fig3-suite | fig5-latetime")
      ->required();
  preset->add_option("--scale", scale, "paper | desk")->check(CLI::IsMember({"paper", "desk"}));

  auto* fit = app.add_subcommand("fit", "power-law fit of |T_d| in a time window");
  std::string trace_path, window;
  double floor = 1e-14;
  fit->add_option("trace", trace_path, "trace CSV")->required();
  fit->add_option("--window", window, "a,b")->required();
  fit->add_option("--floor", floor, "noise floor");

  auto* velocity = app.add_subcommand("velocity", "light-cone velocity from a heatmap");
  std::string heatmap_path;
  double threshold = 1e-3;
  velocity->add_option("heatmap", heatmap_path, "heatmap CSV")->required();
  velocity->add_option("--threshold", threshold, "front threshold on |T_d|");

  auto* verdict = app.add_subcommand("verdict", "late-time chaos verdict from a trace");
  std::string verdict_path;
  double t_scr = 0.0;
  verdict->add_option("trace", verdict_path, "trace CSV")->required();
  verdict->add_option("--t-scr", t_scr, "scrambling time (default: L / v_max from the trace)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto cfg = config::parse(read_file(config_path));
      const auto dir = out_override.empty() ? runner::resolve_output_dir(cfg)
                                            : std::filesystem::path(out_override);
      const auto m = runner::run(cfg, dir);
      std::cout << "wrote " << m.files.size() << " files to " << dir.string() << " (manifest_hash "
                << m.hash << ")\n";
      for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
      return m.warnings.empty() ? kOk : kWarnings;
    }
    if (*preset) {
      std::cout << config::serialize(config::preset(preset_name, config::parse_scale(scale)));
      return kOk;
    }
    if (*fit) {
      const auto t = runner::read_csv(trace_path);
      const auto r = analysis::powerlaw_fit(t.column("time"), t.column("T_d"), parse_window(window), floor);
      std::cout << runner::fit_json(r).dump(2) << "\n";
      return kOk;
    }
    if (*velocity) {
      const auto h = runner::read_heatmap_csv(heatmap_path);
      std::cout << runner::velocity_json(analysis::light_cone_velocity(h, threshold)).dump(2) << "\n";
      return kOk;
    }
    if (*verdict) {
      const auto t = runner::read_csv(verdict_path);
      const double ts = t_scr > 0.0 ? t_scr : t_scr_from_meta(t);
      const auto v = analysis::chaos_metric(t.column("time"), t.column("integral"), ts);
      json j = runner::verdict_json(v);
      j["t_scr"] = ts;
      std::cout << j.dump(2) << "\n";
      return kOk;
    }
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kOk;
}
