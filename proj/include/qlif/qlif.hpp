#pragma once

// Liang information flow between a frozen site B and an observed site A:
//
//   T_d(t) = S(rho_A(t)) - S(rho_A^{B frozen}(t)),   d = |A - B|,
//
// obtained by evolving the same initial state under the full Hamiltonian and
// under the Hamiltonian with every term touching B removed.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlif/dmrg.hpp"
#include "qlif/ed.hpp"
#include "qlif/errors.hpp"
#include "qlif/mps.hpp"
#include "qlif/spin_model.hpp"
#include "qlif/tebd.hpp"

namespace qlif {

/// Entropy differences below this are roundoff; flagged, never altered.
inline constexpr double kNoiseFloor = 1e-15;

enum class EngineKind { Exact, Mps };

inline std::string to_string(EngineKind k) { return k == EngineKind::Exact ? "ed" : "mps"; }

struct EngineConfig {
  EngineKind kind = EngineKind::Exact;
  mps::TEBDConfig tebd;
  int ed_capacity = ed::kDefaultCapacity;

  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

enum class InitialKind { Neel, AllUp, Product, GroundState, Dense };

struct InitialState {
  InitialKind kind = InitialKind::Neel;
  std::vector<int> spins;          // Product: 0 = up, 1 = down
  HamiltonianSpec ground_spec;     // GroundState: whose ground state
  mps::DMRGConfig dmrg;            // GroundState under the MPS engine
  ed::StateVector dense;           // Dense

  static InitialState neel() { return {}; }
  static InitialState all_up() { return {InitialKind::AllUp}; }
  static InitialState product(std::vector<int> spins) {
    InitialState s{InitialKind::Product};
    s.spins = std::move(spins);
    return s;
  }
  static InitialState ground_state(const HamiltonianSpec& spec, const mps::DMRGConfig& dmrg = {}) {
    InitialState s{InitialKind::GroundState};
    s.ground_spec = spec;
    s.dmrg = dmrg;
    return s;
  }
  static InitialState from_dense(ed::StateVector v) {
    InitialState s{InitialKind::Dense};
    s.dense = std::move(v);
    return s;
  }
};

/// Uniform grid 0, step, 2 step, ..., t_end.
struct TimeGrid {
  double t_end = 10.0;
  double step = 0.05;

  long num_steps() const { return std::lround(t_end / step); }

  std::vector<double> points() const {
    std::vector<double> t;
    for (long k = 0; k <= num_steps(); ++k) t.push_back(static_cast<double>(k) * step);
    return t;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

struct QLIFRequest {
  HamiltonianSpec spec;
  int frozen_site = 0;
  std::vector<int> obs_sites;
  InitialState initial;
  EngineConfig engine;
  TimeGrid grid;

  void validate() const {
    spec.validate();
    if (frozen_site < 0 || frozen_site >= spec.L) throw ValidationError("frozen site out of range");
    if (obs_sites.empty()) throw ValidationError("at least one observation site is required");
    for (int s : obs_sites) {
      if (s < 0 || s >= spec.L) throw ValidationError("observation site out of range");
      if (s == frozen_site) throw ValidationError("observation site must differ from frozen site");
    }
    if (!(grid.step > 0.0) || grid.t_end < 0.0) throw ValidationError("invalid time grid");
    if (engine.kind == EngineKind::Exact) {
      ed::check_capacity(spec.L, engine.ed_capacity);
    } else {
      engine.tebd.validate();
      // Both branches and the measurement grid share one Trotter discretization.
      const double expected = engine.tebd.dt * engine.tebd.measure_stride;
      if (std::abs(grid.step - expected) > 1e-12 * std::max(1.0, expected))
        throw ValidationError("time step must equal dt * measure_stride for the MPS engine");
    }
    if (initial.kind == InitialKind::Product && static_cast<int>(initial.spins.size()) != spec.L)
      throw ValidationError("product initial state needs one spin per site");
    if (initial.kind == InitialKind::GroundState && initial.ground_spec.L != spec.L)
      throw ValidationError("ground-state Hamiltonian must have the same chain length");
    if (initial.kind == InitialKind::Dense && initial.dense.L != spec.L)
      throw ValidationError("dense initial state has the wrong size");
  }
};

struct TraceMetadata {
  std::string engine = "ed";
  int chi = 0;
  double dt = 0.0;
  double truncation_error_full = 0.0;
  double truncation_error_frozen = 0.0;
  int max_bond_full = 0;
  int max_bond_frozen = 0;
  std::vector<std::string> warnings;
  std::optional<double> ground_energy;
};

struct QLIFTrace {
  int frozen_site = 0;
  int obs_site = 0;
  int distance = 0;
  std::vector<double> times;
  std::vector<double> t_d;
  std::vector<double> s_full;
  std::vector<double> s_frozen;
  std::vector<double> integral;
  std::vector<char> below_floor;
  TraceMetadata meta;

  std::vector<double> abs_t_d() const {
    std::vector<double> a(t_d.size());
    std::transform(t_d.begin(), t_d.end(), a.begin(), [](double v) { return std::abs(v); });
    return a;
  }
};

/// Running trapezoid integral on the given grid; I(t_0) = 0.
inline std::vector<double> time_integral(std::span<const double> times, std::span<const double> values) {
  if (times.size() != values.size()) throw ValidationError("times and values differ in length");
  if (times.empty()) throw ValidationError("cannot integrate an empty series");
  std::vector<double> out(times.size(), 0.0);
  for (std::size_t k = 1; k < times.size(); ++k)
    out[k] = out[k - 1] + 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
  return out;
}

inline std::vector<double> time_integral(const QLIFTrace& trace) {
  return time_integral(trace.times, trace.t_d);
}

namespace detail {

inline QLIFTrace assemble_trace(int frozen_site, int obs_site, std::vector<double> times,
                                std::vector<double> s_full, std::vector<double> s_frozen) {
  QLIFTrace tr;
  tr.frozen_site = frozen_site;
  tr.obs_site = obs_site;
  tr.distance = std::abs(obs_site - frozen_site);
  tr.times = std::move(times);
  tr.s_full = std::move(s_full);
  tr.s_frozen = std::move(s_frozen);
  tr.t_d.resize(tr.times.size());
  tr.below_floor.resize(tr.times.size());
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    tr.t_d[k] = tr.s_full[k] - tr.s_frozen[k];
    tr.below_floor[k] = std::abs(tr.t_d[k]) < kNoiseFloor;
  }
  tr.integral = time_integral(tr.times, tr.t_d);
  return tr;
}

inline std::vector<std::vector<double>> exact_entropies(const ed::Propagator& prop,
                                                        const ed::StateVector& psi0,
                                                        std::span<const int> sites,
                                                        std::span<const double> times) {
  std::vector<std::vector<double>> s(sites.size(), std::vector<double>(times.size()));
  const auto states = prop.evolve(psi0, times);
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t j = 0; j < sites.size(); ++j)
      s[j][k] = ed::von_neumann_entropy(ed::reduce_single_site(states[k], sites[j]));
  return s;
}

}  // namespace detail

/// Exact-engine traces from precomputed eigendecompositions of the full and
/// frozen Hamiltonians; one trace per observation site.
inline std::vector<QLIFTrace> qlif_traces_exact(const ed::Propagator& full,
                                                const ed::Propagator& frozen,
                                                const ed::StateVector& psi0, int frozen_site,
                                                std::span<const int> obs_sites,
                                                std::span<const double> times) {
  const auto sf = detail::exact_entropies(full, psi0, obs_sites, times);
  const auto sz = detail::exact_entropies(frozen, psi0, obs_sites, times);
  std::vector<QLIFTrace> out;
  for (std::size_t j = 0; j < obs_sites.size(); ++j) {
    out.push_back(detail::assemble_trace(frozen_site, obs_sites[j],
                                         std::vector<double>(times.begin(), times.end()), sf[j], sz[j]));
    out.back().meta.engine = "ed";
  }
  return out;
}

/// Paired full/frozen evolution of one initial state; traces for every
/// observation site come from the same two trajectories.
inline std::vector<QLIFTrace> qlif_traces(const QLIFRequest& req) {
  req.validate();
  const OperatorSum h_full = build_hamiltonian(req.spec);
  const OperatorSum h_frozen = build_frozen_hamiltonian(req.spec, req.frozen_site);
  const InitialState& init = req.initial;

  if (req.engine.kind == EngineKind::Exact) {
    const int cap = req.engine.ed_capacity;
    const ed::Propagator full(h_full, cap);
    const ed::Propagator frozen(h_frozen, cap);
    ed::StateVector psi0;
    std::optional<double> e0;
    switch (init.kind) {
      case InitialKind::Neel: psi0 = ed::neel_state(req.spec.L); break;
      case InitialKind::AllUp: psi0 = ed::all_up_state(req.spec.L); break;
      case InitialKind::Product: psi0 = ed::product_state(init.spins); break;
      case InitialKind::Dense: psi0 = init.dense; break;
      case InitialKind::GroundState:
        if (init.ground_spec == req.spec) {
          psi0 = full.eigenvector(0);
          e0 = full.energies()(0);
        } else {
          auto [e, v] = ed::ground_state_dense(build_hamiltonian(init.ground_spec), cap);
          psi0 = std::move(v);
          e0 = e;
        }
        break;
    }
    auto traces = qlif_traces_exact(full, frozen, psi0, req.frozen_site, req.obs_sites, req.grid.points());
    for (auto& t : traces) t.meta.ground_energy = e0;
    return traces;
  }

  // MPS engine.
  const auto& cfg = req.engine.tebd;
  mps::MPSState psi0;
  TraceMetadata meta;
  meta.engine = "mps";
  meta.chi = cfg.chi;
  meta.dt = cfg.dt;
  switch (init.kind) {
    case InitialKind::Neel: psi0 = mps::neel_mps(req.spec.L); break;
    case InitialKind::AllUp: psi0 = mps::all_up_mps(req.spec.L); break;
    case InitialKind::Product: {
      std::vector<mps::BlochDirection> dirs;
      for (int s : init.spins) dirs.push_back(s == 0 ? mps::BlochDirection::up() : mps::BlochDirection::down());
      psi0 = mps::mps_from_product(dirs);
      break;
    }
    case InitialKind::Dense: psi0 = mps::mps_from_dense(init.dense, {cfg.chi, cfg.svd_cutoff}); break;
    case InitialKind::GroundState: {
      auto gs = mps::dmrg_ground_state(build_hamiltonian(init.ground_spec), init.dmrg);
      if (!gs.converged)
        meta.warnings.push_back("DMRG reached the sweep cap without converging");
      meta.ground_energy = gs.energy;
      psi0 = std::move(gs.state);
      break;
    }
  }

  const auto run_full = mps::tebd_evolve(h_full, psi0, cfg, req.grid.t_end, req.obs_sites);
  const auto run_frozen = mps::tebd_evolve(h_frozen, psi0, cfg, req.grid.t_end, req.obs_sites);
  meta.truncation_error_full = run_full.final_state.truncation_error();
  meta.truncation_error_frozen = run_frozen.final_state.truncation_error();
  for (const auto& r : run_full.records) meta.max_bond_full = std::max(meta.max_bond_full, r.max_bond_dim);
  for (const auto& r : run_frozen.records) meta.max_bond_frozen = std::max(meta.max_bond_frozen, r.max_bond_dim);
  auto note = [&](const char* branch, const std::vector<mps::TruncationWarning>& ws) {
    if (ws.empty()) return;
    meta.warnings.push_back(std::string(branch) + " branch: " + std::to_string(ws.size()) +
                            " steps discarded more than the truncation alarm (first at t=" +
                            std::to_string(ws.front().time) + ")");
  };
  note("full", run_full.warnings);
  note("frozen", run_frozen.warnings);

  std::vector<double> times;
  for (const auto& r : run_full.records) times.push_back(r.time);
  std::vector<QLIFTrace> out;
  for (std::size_t j = 0; j < req.obs_sites.size(); ++j) {
    std::vector<double> sf, sz;
    for (const auto& r : run_full.records) sf.push_back(mps::bloch_entropy(r.bloch[j]));
    for (const auto& r : run_frozen.records) sz.push_back(mps::bloch_entropy(r.bloch[j]));
    out.push_back(detail::assemble_trace(req.frozen_site, req.obs_sites[j], times, sf, sz));
    out.back().meta = meta;
  }
  return out;
}

inline QLIFTrace qlif_trace(const QLIFRequest& req) {
  if (req.obs_sites.size() != 1) throw ValidationError("qlif_trace takes exactly one observation site");
  return std::move(qlif_traces(req).front());
}

/// |T_d(t)| with rows ordered by increasing distance (ties by site index).
struct Heatmap {
  std::vector<int> distances;
  std::vector<int> obs_sites;
  std::vector<double> times;
  Eigen::MatrixXd values;  // rows: distance, cols: time
};

inline Heatmap heatmap_from_traces(std::vector<QLIFTrace> traces) {
  if (traces.empty()) throw ValidationError("heatmap needs at least one trace");
  std::stable_sort(traces.begin(), traces.end(), [](const QLIFTrace& a, const QLIFTrace& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.obs_site < b.obs_site;
  });
  Heatmap h;
  h.times = traces.front().times;
  h.values.resize(static_cast<Eigen::Index>(traces.size()), static_cast<Eigen::Index>(h.times.size()));
  for (std::size_t r = 0; r < traces.size(); ++r) {
    if (traces[r].times.size() != h.times.size()) throw ValidationError("traces use different grids");
    h.distances.push_back(traces[r].distance);
    h.obs_sites.push_back(traces[r].obs_site);
    for (std::size_t c = 0; c < h.times.size(); ++c)
      h.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::abs(traces[r].t_d[c]);
  }
  return h;
}

inline Heatmap qlif_heatmap(const QLIFRequest& req) { return heatmap_from_traces(qlif_traces(req)); }

}  // namespace qlif
