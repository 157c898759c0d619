#pragma once

// Multi-distance infinite-temperature OTOCs and butterfly-velocity fits.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qlif/analysis.hpp"
#include "qlif/ed.hpp"
#include "qlif/errors.hpp"
#include "qlif/spin_model.hpp"

namespace qlif::otoc {

struct OTOCTrace {
  HamiltonianSpec spec;
  int w_site = 0;
  std::vector<int> v_sites;
  std::vector<int> distances;
  std::vector<double> times;
  std::vector<std::vector<double>> c;  // c[distance index][time index]
  double max_imag = 0.0;
};

inline OTOCTrace otoc_multidistance(const ed::Propagator& prop, const HamiltonianSpec& spec,
                                    int w_site, std::vector<int> v_sites,
                                    std::span<const double> times) {
  OTOCTrace out;
  out.spec = spec;
  out.w_site = w_site;
  out.times.assign(times.begin(), times.end());
  auto values = ed::otoc(prop, w_site, v_sites, times);
  out.c = std::move(values.c);
  out.max_imag = values.max_imag;
  for (int v : v_sites) out.distances.push_back(std::abs(v - w_site));
  out.v_sites = std::move(v_sites);
  return out;
}

inline OTOCTrace otoc_multidistance(const HamiltonianSpec& spec, int w_site, std::vector<int> v_sites,
                                    std::span<const double> times,
                                    int capacity = ed::kDefaultCapacity) {
  const ed::Propagator prop(build_hamiltonian(spec), capacity);
  return otoc_multidistance(prop, spec, w_site, std::move(v_sites), times);
}

struct ButterflyFit {
  double v_b = 0.0;
  double threshold = 0.0;
  double r_squared = 0.0;
  std::vector<int> distances;
  std::vector<std::optional<double>> arrivals;
  std::vector<double> saturation;
  std::vector<std::string> warnings;
};

/// Mean of the series over the final 20% of the time window.
inline double saturation_value(std::span<const double> times, std::span<const double> c) {
  const double t0 = times.front(), t1 = times.back();
  const double start = t1 - 0.2 * (t1 - t0);
  double sum = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (times[k] >= start) {
      sum += c[k];
      ++n;
    }
  return n ? sum / n : 0.0;
}

/// Arrival t*(d) where C first reaches threshold * C_sat; v_B = 1 / slope of
/// t* against d.
inline ButterflyFit butterfly_velocity(const OTOCTrace& trace, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
  if (trace.distances.size() < 3) throw FitError("butterfly fit needs at least 3 distances");
  if (trace.times.size() < 2) throw FitError("butterfly fit needs a time series");
  ButterflyFit out;
  out.threshold = threshold;
  std::vector<std::optional<double>> arrivals;
  for (std::size_t i = 0; i < trace.distances.size(); ++i) {
    const double sat = saturation_value(trace.times, trace.c[i]);
    out.saturation.push_back(sat);
    auto t = sat > 0.0 ? analysis::front_arrival(trace.times, trace.c[i], threshold * sat) : std::nullopt;
    if (!t)
      out.warnings.push_back("distance " + std::to_string(trace.distances[i]) +
                             " never crosses the threshold; excluded");
    arrivals.push_back(t);
  }
  const auto fit = analysis::velocity_from_arrivals(trace.distances, std::move(arrivals), threshold);
  out.v_b = fit.velocity;
  out.r_squared = fit.r_squared;
  out.distances = fit.distances;
  out.arrivals = fit.arrivals;
  return out;
}

}  // namespace qlif::otoc
