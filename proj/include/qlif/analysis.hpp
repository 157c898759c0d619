#pragma once

// Power-law growth fits, light-cone front extraction and the late-time
// integral diagnostic.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qlif/errors.hpp"
#include "qlif/qlif.hpp"
#include "qlif/spin_model.hpp"

namespace qlif::analysis {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw FitError("linear fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw FitError("degenerate abscissa");
  LinearFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += r * r;
  }
  f.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return f;
}

struct FitWindow {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const FitWindow&, const FitWindow&) = default;
};

/// [t_LR(d), t_max(d)], the regime between the Lieb-Robinson arrival and the
/// quasiparticle front.
inline FitWindow default_fit_window(const HamiltonianSpec& spec, int distance) {
  const auto v = velocity_table(spec);
  return {v.t_lr(distance), v.t_max(distance)};
}

struct FitResult {
  double alpha = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
  FitWindow window;
  std::size_t n_points = 0;
  std::size_t floor_excluded = 0;
};

inline constexpr std::size_t kMinFitPoints = 5;

/// |values| ~ A t^alpha by least squares on (ln t, ln |value|), using only
/// points inside the window with |value| above the floor.
inline FitResult powerlaw_fit(std::span<const double> times, std::span<const double> values,
                              FitWindow window, double floor = 1e-14) {
  if (times.size() != values.size()) throw ValidationError("times and values differ in length");
  if (!(window.hi > window.lo)) throw ValidationError("fit window is empty");
  if (floor < kNoiseFloor) throw ValidationError("fit floor must be >= 1e-15");
  std::vector<double> lx, ly;
  FitResult out;
  out.window = window;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    if (t < window.lo || t > window.hi || t <= 0.0) continue;
    const double v = std::abs(values[k]);
    if (v <= floor) {
      ++out.floor_excluded;
      continue;
    }
    lx.push_back(std::log(t));
    ly.push_back(std::log(v));
  }
  if (lx.size() < kMinFitPoints)
    throw FitError("power-law fit needs at least 5 points above the floor, got " +
                   std::to_string(lx.size()));
  const auto f = linear_fit(lx, ly);
  out.alpha = f.slope;
  out.prefactor = std::exp(f.intercept);
  out.r_squared = f.r_squared;
  out.n_points = lx.size();
  return out;
}

inline FitResult powerlaw_fit(const QLIFTrace& trace, FitWindow window, double floor = 1e-14) {
  return powerlaw_fit(trace.times, trace.t_d, window, floor);
}

/// First time |values| reaches the threshold, linearly interpolated between
/// grid points; empty when it never does.
inline std::optional<double> front_arrival(std::span<const double> times,
                                           std::span<const double> values, double threshold) {
  if (times.size() != values.size()) throw ValidationError("times and values differ in length");
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double v = std::abs(values[k]);
    if (v < threshold) continue;
    if (k == 0) return times[0];
    const double prev = std::abs(values[k - 1]);
    const double frac = (threshold - prev) / (v - prev);
    return times[k - 1] + frac * (times[k] - times[k - 1]);
  }
  return std::nullopt;
}

struct VelocityFit {
  double velocity = 0.0;
  double r_squared = 0.0;
  double threshold = 0.0;
  std::vector<int> distances;
  std::vector<std::optional<double>> arrivals;
};

/// Fit arrival time against distance; velocity is the inverse slope.
inline VelocityFit velocity_from_arrivals(std::vector<int> distances,
                                          std::vector<std::optional<double>> arrivals,
                                          double threshold) {
  std::vector<double> d, t;
  for (std::size_t i = 0; i < distances.size(); ++i)
    if (arrivals[i]) {
      d.push_back(distances[i]);
      t.push_back(*arrivals[i]);
    }
  if (d.size() < 3)
    throw FitError("velocity fit needs at least 3 distances with a crossing, got " +
                   std::to_string(d.size()));
  const auto f = linear_fit(d, t);
  if (f.slope <= 0.0) throw FitError("arrival times do not increase with distance");
  VelocityFit out;
  out.velocity = 1.0 / f.slope;
  out.r_squared = f.r_squared;
  out.threshold = threshold;
  out.distances = std::move(distances);
  out.arrivals = std::move(arrivals);
  return out;
}

inline VelocityFit light_cone_velocity(const Heatmap& heatmap, double threshold = 1e-3) {
  std::vector<std::optional<double>> arrivals;
  for (Eigen::Index r = 0; r < heatmap.values.rows(); ++r) {
    const Eigen::VectorXd row = heatmap.values.row(r).transpose();
    arrivals.push_back(front_arrival(heatmap.times, std::span<const double>(row.data(), row.size()), threshold));
  }
  return velocity_from_arrivals(heatmap.distances, std::move(arrivals), threshold);
}

enum class Verdict { MonotonicGrowth, Saturating, Indeterminate };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::MonotonicGrowth: return "monotonic-growth";
    case Verdict::Saturating: return "saturating";
    default: return "indeterminate";
  }
}

struct ChaosThresholds {
  double growth_ratio = 0.5;
  double saturation_ratio = 0.2;
  double slope_floor = 1e-4;
};

struct ChaosVerdict {
  double early_slope = 0.0;
  double late_slope = 0.0;
  double late_slope_ratio = 0.0;
  FitWindow early_window;
  FitWindow late_window;
  Verdict verdict = Verdict::Indeterminate;
};

/// Compare the slope of the running integral over [t_scr, 1.5 t_scr] with
/// that over [1.5 t_scr, t_end].
inline ChaosVerdict chaos_metric(std::span<const double> times, std::span<const double> integral,
                                 double t_scr, const ChaosThresholds& th = {}) {
  if (times.size() != integral.size()) throw ValidationError("times and integral differ in length");
  if (!(t_scr > 0.0)) throw ValidationError("scrambling time must be > 0");
  if (times.empty() || times.back() < 2.0 * t_scr)
    throw FitError("integral series must extend to at least 2 t_scr");
  auto slope_over = [&](FitWindow w) {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < times.size(); ++k)
      if (times[k] >= w.lo && times[k] <= w.hi) {
        x.push_back(times[k]);
        y.push_back(integral[k]);
      }
    return linear_fit(x, y).slope;
  };
  ChaosVerdict out;
  out.early_window = {t_scr, 1.5 * t_scr};
  out.late_window = {1.5 * t_scr, times.back()};
  out.early_slope = slope_over(out.early_window);
  out.late_slope = slope_over(out.late_window);
  out.late_slope_ratio = out.late_slope / out.early_slope;
  const bool same_sign = (out.early_slope > 0) == (out.late_slope > 0) && out.early_slope != 0.0;
  if (out.late_slope_ratio > th.growth_ratio && same_sign && std::abs(out.late_slope) > th.slope_floor)
    out.verdict = Verdict::MonotonicGrowth;
  else if (std::abs(out.late_slope) < th.saturation_ratio * std::abs(out.early_slope))
    out.verdict = Verdict::Saturating;
  else
    out.verdict = Verdict::Indeterminate;
  return out;
}

inline ChaosVerdict chaos_metric(const QLIFTrace& trace, double t_scr, const ChaosThresholds& th = {}) {
  return chaos_metric(trace.times, trace.integral, t_scr, th);
}

}  // namespace qlif::analysis
