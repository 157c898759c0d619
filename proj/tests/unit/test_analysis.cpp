#include <cmath>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "qlif/analysis.hpp"
#include "qlif/otoc.hpp"

using namespace qlif;

namespace {

std::vector<double> grid(double t0, double t1, double step) {
  std::vector<double> t;
  for (long k = 0; k <= std::lround((t1 - t0) / step); ++k) t.push_back(t0 + k * step);
  return t;
}

}  // namespace

TEST(LinearFit, RecoversLine) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = analysis::linear_fit(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
}

TEST(PowerLawFit, RecoversExponentAndPrefactor) {
  const auto t = grid(0.0, 3.0, 0.05);
  std::vector<double> v;
  for (double x : t) v.push_back(-2e-6 * std::pow(x, 9.3));
  const auto f = analysis::powerlaw_fit(t, v, {0.7, 2.5});
  EXPECT_NEAR(f.alpha, 9.3, 1e-10);
  EXPECT_NEAR(f.prefactor, 2e-6, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.n_points, 37u);
}

TEST(PowerLawFit, ExcludesPointsAtOrBelowFloor) {
  const auto t = grid(0.0, 2.0, 0.1);
  std::vector<double> v;
  for (double x : t) v.push_back(x < 1.0 ? 1e-16 : x * x);
  const auto f = analysis::powerlaw_fit(t, v, {0.05, 2.0}, 1e-14);
  EXPECT_EQ(f.floor_excluded, 9u);
  EXPECT_NEAR(f.alpha, 2.0, 1e-12);
}

TEST(PowerLawFit, Errors) {
  const auto t = grid(0.0, 1.0, 0.25);
  const std::vector<double> v(t.size(), 1.0);
  EXPECT_THROW(analysis::powerlaw_fit(t, v, {0.1, 1.0}), FitError);
  EXPECT_THROW(analysis::powerlaw_fit(t, v, {1.0, 0.5}), ValidationError);
  EXPECT_THROW(analysis::powerlaw_fit(t, v, {0.1, 1.0}, 1e-16), ValidationError);
}

TEST(DefaultFitWindow, LiebRobinsonToQuasiparticleFront) {
  const auto w = analysis::default_fit_window({12, 1.0, 0.8, 0.5}, 4);
  EXPECT_NEAR(w.lo, 4.0 / (2.0 * std::exp(1.0)), 1e-14);
  EXPECT_NEAR(w.hi, 2.5, 1e-14);
}

TEST(FrontArrival, InterpolatesLinearly) {
  const std::vector<double> t{0, 1, 2, 3}, v{0, 1e-4, -3e-3, 1e-2};
  EXPECT_NEAR(*analysis::front_arrival(t, v, 1e-3), 1.0 + 0.9 / 2.9, 1e-12);
  EXPECT_FALSE(analysis::front_arrival(t, v, 1.0).has_value());
}

TEST(Velocity, RecoversSyntheticLightCone) {
  Heatmap h;
  h.times = grid(0.0, 10.0, 0.01);
  const double v = 1.6;
  h.values.resize(6, static_cast<Eigen::Index>(h.times.size()));
  for (int d = 1; d <= 6; ++d) {
    h.distances.push_back(d);
    h.obs_sites.push_back(d);
    for (std::size_t k = 0; k < h.times.size(); ++k)
      h.values(d - 1, static_cast<Eigen::Index>(k)) = 1e-3 * std::exp(4.0 * (h.times[k] - d / v));
  }
  const auto f = analysis::light_cone_velocity(h, 1e-3);
  EXPECT_NEAR(f.velocity, v, 1e-3);
  EXPECT_GT(f.r_squared, 0.999);
}

TEST(Velocity, NeedsThreeCrossings) {
  EXPECT_THROW(analysis::velocity_from_arrivals({1, 2, 3}, {1.0, std::nullopt, 3.0}, 1e-3), FitError);
  EXPECT_THROW(analysis::velocity_from_arrivals({1, 2, 3}, {3.0, 2.0, 1.0}, 1e-3), FitError);
}

TEST(ChaosMetric, LinearGrowthIsMonotonic) {
  const auto t = grid(0.0, 40.0, 0.1);
  std::vector<double> i;
  for (double x : t) i.push_back(0.05 * x);
  EXPECT_EQ(analysis::chaos_metric(t, i, 12.5).verdict, analysis::Verdict::MonotonicGrowth);
}

TEST(ChaosMetric, ExponentialApproachSaturates) {
  const auto t = grid(0.0, 40.0, 0.1);
  std::vector<double> i;
  for (double x : t) i.push_back(1.0 - std::exp(-x / 4.0));
  EXPECT_EQ(analysis::chaos_metric(t, i, 12.5).verdict, analysis::Verdict::Saturating);
}

TEST(ChaosMetric, SignReversalIsNotGrowth) {
  const auto t = grid(0.0, 40.0, 0.1);
  std::vector<double> i;
  for (double x : t) i.push_back(x < 18.75 ? x : 37.5 - x);
  EXPECT_NE(analysis::chaos_metric(t, i, 12.5).verdict, analysis::Verdict::MonotonicGrowth);
}

TEST(ChaosMetric, NeedsTwoScramblingTimes) {
  const auto t = grid(0.0, 20.0, 0.1);
  const std::vector<double> i(t.size(), 0.0);
  EXPECT_THROW(analysis::chaos_metric(t, i, 12.5), FitError);
}

TEST(Butterfly, RecoversSyntheticFrontVelocity) {
  otoc::OTOCTrace tr;
  tr.times = grid(0.0, 12.0, 0.02);
  const double vb = 1.7;
  for (int d = 1; d <= 5; ++d) {
    tr.distances.push_back(d);
    tr.v_sites.push_back(d);
    std::vector<double> c;
    for (double t : tr.times) c.push_back(2.0 / (1.0 + std::exp(-3.0 * (t - d / vb))));
    tr.c.push_back(c);
  }
  const auto f = otoc::butterfly_velocity(tr, 0.5);
  EXPECT_NEAR(f.v_b, vb, 1e-3);
  for (double s : f.saturation) EXPECT_NEAR(s, 2.0, 1e-4);
}

TEST(Butterfly, SaturationIsMeanOfFinalFifth) {
  const std::vector<double> t{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> c{0, 0, 0, 0, 0, 0, 0, 0, 1, 2, 3};
  EXPECT_NEAR(otoc::saturation_value(t, c), 2.0, 1e-15);
}

TEST(Butterfly, Validation) {
  otoc::OTOCTrace tr;
  tr.times = {0, 1};
  tr.distances = {1, 2};
  tr.c = {{0, 1}, {0, 1}};
  EXPECT_THROW(otoc::butterfly_velocity(tr, 1.5), ValidationError);
  EXPECT_THROW(otoc::butterfly_velocity(tr, 0.5), FitError);
}

TEST(OtocMultidistance, DistancesAndInitialValues) {
  const std::vector<double> times{0.0, 0.5, 1.0};
  const auto tr = otoc::otoc_multidistance({8, 1.0, 0.8, 0.5}, 3, {4, 5, 0}, times);
  EXPECT_EQ(tr.distances, (std::vector<int>{1, 2, 3}));
  for (const auto& c : tr.c) EXPECT_NEAR(c.front(), 0.0, 1e-12);
  EXPECT_GT(tr.c[0][2], tr.c[2][2]);
}
