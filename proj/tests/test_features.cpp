// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

namespace bomi {
namespace {

FeatureLayout layout_for(FeatureKind kind, std::vector<int> ids) { return {kind, std::move(ids), 8, 7}; }

/// Window with per-tick values from a generator f(t, sensor, channel).
template <typename F>
Window make_window(const std::vector<int>& ids, F f, MotionLabel label = 1) {
  Window w;
  w.length = 8;
  w.sensor_ids = ids;
  w.label = label;
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t s = 0; s < ids.size(); ++s) {
      ChannelFrame c;
      c.angles = {f(t, s, 0), f(t, s, 1), f(t, s, 2)};
      c.gyro = {f(t, s, 3), f(t, s, 4), f(t, s, 5)};
      w.data.push_back(c);
    }
  }
  return w;
}

TEST(Windows, CountIsNMinusSizePlusOne) {
  EXPECT_EQ(window_count(60), 53u);
  EXPECT_EQ(window_count(300), 293u);
  EXPECT_EQ(window_count(7), 0u);
  EXPECT_EQ(window_count(8), 1u);
  for (std::size_t n = 8; n < 400; n += 13) EXPECT_EQ(window_count(n), n - 7);
}

TEST(Windows, EnumerationOfOneRepetition) {
  const auto s = test::constant_stream(300, {1}, {1, 2, 3});
  const auto ws = make_windows(s);
  ASSERT_EQ(ws.size(), 293u);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    ASSERT_EQ(ws[i].start_tick, static_cast<std::int64_t>(i));
    ASSERT_EQ(ws[i].length, 8u);
    ASSERT_EQ(ws[i].data.size(), 8u);
  }
}

TEST(Windows, ShortStreamYieldsNothing) {
  EXPECT_TRUE(make_windows(test::constant_stream(5, {1}, {})).empty());
}

TEST(Windows, LabelChangeMakesMixedWindows) {
  auto s = test::constant_stream(30, {1, 2}, {});
  for (std::size_t t = 15; t < 30; ++t) s.labels[t] = 3;
  const auto ws = make_windows(s);
  for (const auto& w : ws) {
    const auto first = static_cast<std::size_t>(w.start_tick), last = first + 7;
    if (last < 15) {
      EXPECT_EQ(w.label, 0);
    } else if (first >= 15) {
      EXPECT_EQ(w.label, 3);
    } else {
      EXPECT_TRUE(w.mixed()) << first;
    }
  }
}

TEST(Windows, BadShapeIsShapeError) {
  EXPECT_THROW(window_count(10, 8, 8), ShapeError);
  EXPECT_THROW(window_count(10, 0, 0), ShapeError);
}

TEST(Dimensions, MatchClosedFormForSensorCounts) {
  for (std::size_t s : {1u, 2u, 3u, 6u}) {
    EXPECT_EQ(feature_dim(FeatureKind::FV1, s), 8 * (3 + 2 * (s - 1)));
    EXPECT_EQ(feature_dim(FeatureKind::FV2, s), 8 * (3 + 2 * (s - 1) + 3 * s));
    EXPECT_EQ(feature_dim(FeatureKind::FV3, s), 2 * 4 * (3 + 2 * (s - 1) + 3 * s));
    std::vector<int> ids;
    for (std::size_t i = 0; i < s; ++i) ids.push_back(static_cast<int>(i + 1));
    const auto w = make_window(ids, [](std::size_t t, std::size_t k, int c) { return t + 10.0 * k + 100.0 * c; });
    for (auto kind : {FeatureKind::FV1, FeatureKind::FV2, FeatureKind::FV3}) {
      const auto L = layout_for(kind, ids);
      EXPECT_EQ(extract_features(w, L).size(), L.dim());
      EXPECT_EQ(L.feature_names().size(), L.dim());
    }
  }
  EXPECT_EQ(feature_dim(FeatureKind::FV1, 3), 56u);
  EXPECT_EQ(feature_dim(FeatureKind::FV1, 1), 24u);
  EXPECT_EQ(feature_dim(FeatureKind::FV2, 3), 128u);
  EXPECT_EQ(feature_dim(FeatureKind::FV2, 2), 88u);
  EXPECT_EQ(feature_dim(FeatureKind::FV3, 3), 128u);
}

TEST(Fv1, OrderIsSampleMajorWithYawOnlyForFirstSensor) {
  const auto w = make_window({1, 2}, [](std::size_t t, std::size_t k, int c) { return 100.0 * t + 10.0 * k + c; });
  const auto v = fv1(w, layout_for(FeatureKind::FV1, {1, 2}));
  ASSERT_EQ(v.size(), 40u);
  const std::vector<double> tick3{300, 301, 302, 310, 311};
  EXPECT_EQ(std::vector<double>(v.begin() + 15, v.begin() + 20), tick3);
}

TEST(Fv1, ConstantWindowRepeatsChannels) {
  const auto w = make_window({1, 2, 3}, [](std::size_t, std::size_t k, int c) { return 1.0 + k + 0.5 * c; });
  const auto v = fv1(w, layout_for(FeatureKind::FV1, {1, 2, 3}));
  for (std::size_t t = 1; t < 8; ++t)
    for (std::size_t i = 0; i < 7; ++i) ASSERT_EQ(v[t * 7 + i], v[i]);
}

TEST(Fv1, LayoutOrderSelectsSensors) {
  const auto w = make_window({1, 2, 3}, [](std::size_t, std::size_t k, int c) { return 10.0 * k + c; });
  const auto v = fv1(w, layout_for(FeatureKind::FV1, {3, 1}));
  EXPECT_EQ(std::vector<double>(v.begin(), v.begin() + 5), (std::vector<double>{20, 21, 22, 0, 1}));
}

TEST(Fv1, MissingSensorIsLayoutError) {
  const auto w = make_window({1, 2}, [](std::size_t, std::size_t, int) { return 0.0; });
  EXPECT_THROW(fv1(w, layout_for(FeatureKind::FV1, {1, 4})), LayoutError);
}

TEST(Fv2, ZeroGyroLeavesAngleBlockUnchanged) {
  const auto w = make_window({1, 2, 3}, [](std::size_t t, std::size_t k, int c) {
    return c >= 3 ? 0.0 : 1.0 + t + 2.0 * k + 0.1 * c;
  });
  const auto a = fv1(w, layout_for(FeatureKind::FV1, {1, 2, 3}));
  const auto b = fv2(w, layout_for(FeatureKind::FV2, {1, 2, 3}));
  ASSERT_EQ(b.size(), 128u);
  for (std::size_t t = 0; t < 8; ++t) {
    for (std::size_t i = 0; i < 7; ++i) ASSERT_EQ(b[t * 16 + i], a[t * 7 + i]);
    for (std::size_t i = 7; i < 16; ++i) ASSERT_EQ(b[t * 16 + i], 0.0);
  }
}

TEST(Fv3, HandArithmeticExample) {
  const double ch[8] = {1, -2, 3, -4, 0, 0, 0, 0};
  const auto w = make_window({1}, [&](std::size_t t, std::size_t, int c) { return c == 0 ? ch[t] : 0.0; });
  const auto v = fv3(w, layout_for(FeatureKind::FV3, {1}));
  ASSERT_EQ(v.size(), 48u);
  // Channel 0 (pitch): sub-window 1 then sub-window 2.
  EXPECT_EQ(std::vector<double>(v.begin(), v.begin() + 8), (std::vector<double>{-4, 3, -0.5, 10, 0, 0, 0, 0}));
}

TEST(Fv3, ConstantChannelGivesConstantStats) {
  const auto w = make_window({1, 2}, [](std::size_t, std::size_t k, int c) { return -3.0 + k - 0.5 * c; });
  const auto L = layout_for(FeatureKind::FV3, {1, 2});
  const auto v = fv3(w, L);
  const auto channels = fv2(w, layout_for(FeatureKind::FV2, {1, 2}));
  for (std::size_t c = 0; c < fv2_channels(2); ++c) {
    const double x = channels[c];
    for (std::size_t sw = 0; sw < 2; ++sw) {
      const auto* p = &v[c * 8 + sw * 4];
      EXPECT_EQ(p[0], x);
      EXPECT_EQ(p[1], x);
      EXPECT_EQ(p[2], x);
      EXPECT_EQ(p[3], 4 * std::abs(x));
    }
  }
}

TEST(Fv3, StatsPropertiesOnRandomWindows) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0, 20);
  for (int rep = 0; rep < 200; ++rep) {
    const auto w = make_window({1, 2, 3}, [&](std::size_t, std::size_t, int) { return g(rng); });
    const auto v = fv3(w, layout_for(FeatureKind::FV3, {1, 2, 3}));
    for (std::size_t i = 0; i < v.size(); i += 4) {
      ASSERT_LE(v[i], v[i + 2] + 1e-12);
      ASSERT_LE(v[i + 2], v[i + 1] + 1e-12);
      ASSERT_GE(v[i + 3], std::abs(4 * v[i + 2]) - 1e-9);
    }
  }
}

TEST(Fv3, MatchesBruteForceOverFv2Channels) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-50, 50);
  const std::vector<int> ids{1, 2, 3};
  const auto w = make_window(ids, [&](std::size_t, std::size_t, int) { return u(rng); });
  const auto flat = fv2(w, layout_for(FeatureKind::FV2, ids));
  const auto v = fv3(w, layout_for(FeatureKind::FV3, ids));
  const std::size_t C = 16;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t sw = 0; sw < 2; ++sw) {
      std::vector<double> xs;
      for (std::size_t t = sw * 4; t < sw * 4 + 4; ++t) xs.push_back(flat[t * C + c]);
      double abs_sum = 0, sum = 0;
      for (double x : xs) abs_sum += std::abs(x), sum += x;
      ASSERT_EQ(v[c * 8 + sw * 4 + 0], *std::min_element(xs.begin(), xs.end()));
      ASSERT_EQ(v[c * 8 + sw * 4 + 1], *std::max_element(xs.begin(), xs.end()));
      ASSERT_NEAR(v[c * 8 + sw * 4 + 2], sum / 4, 1e-12);
      ASSERT_NEAR(v[c * 8 + sw * 4 + 3], abs_sum, 1e-12);
    }
  }
}

TEST(Fv3, WrongLengthIsShapeError) {
  auto w = make_window({1}, [](std::size_t, std::size_t, int) { return 0.0; });
  w.length = 7;
  w.data.pop_back();
  EXPECT_THROW(fv3(w, layout_for(FeatureKind::FV3, {1})), ShapeError);
}

TEST(FeatureKind, ParsesNames) {
  EXPECT_EQ(feature_kind_from_string("fv2"), FeatureKind::FV2);
  EXPECT_EQ(feature_kind_from_string("FV3"), FeatureKind::FV3);
  EXPECT_THROW(feature_kind_from_string("fv4"), ConfigError);
}

TEST(Gamma, ExamplesAndInvariances) {
  EXPECT_EQ(gamma_amp(Euler{0, 0, 0}), 0.0);
  EXPECT_EQ(gamma_amp(Euler{3, 4, 0}), 5.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-90, 90);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    const double g = gamma_amp(Euler{a, b, c});
    ASSERT_DOUBLE_EQ(g, gamma_amp(Euler{-a, b, -c}));
    ASSERT_NEAR(g, gamma_amp(Euler{c, a, b}), 1e-12);
    ASSERT_NEAR(g, gamma_amp(Euler{b, c, a}), 1e-12);
    ASSERT_NEAR(g, std::hypot(a, b, c), 1e-12);
  }
}

TEST(Gamma, WindowMeanOnMappedSensor) {
  const auto w = make_window({1, 2}, [](std::size_t t, std::size_t k, int c) {
    if (k == 0 || c > 2) return 0.0;
    return c == 0 ? 3.0 * (t % 2) : (c == 1 ? 4.0 * (t % 2) : 0.0);
  });
  EXPECT_DOUBLE_EQ(window_gamma(w, 2), 2.5);
  EXPECT_DOUBLE_EQ(window_gamma(w, 1), 0.0);
  EXPECT_THROW(window_gamma(w, 5), LayoutError);
}

TEST(Ranges, MinMaxOfWindowMeans) {
  std::vector<Window> ws;
  for (double g : {15.0, 10.0, 22.0}) {
    ws.push_back(make_window({1}, [&](std::size_t, std::size_t, int c) { return c == 0 ? g : 0.0; }, 2));
  }
  ws.push_back(make_window({1}, [](std::size_t, std::size_t, int c) { return c == 0 ? 99.0 : 0.0; }, 0));
  ClassSensorMap map;
  const auto r = learn_ranges(ws, {0, 2}, map);
  ASSERT_EQ(r.classes.size(), 1u);
  EXPECT_DOUBLE_EQ(r.classes.at(2).min, 10.0);
  EXPECT_DOUBLE_EQ(r.classes.at(2).max, 22.0);
}

TEST(Ranges, PercentileModeMatchesSortOracle) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> xs(100);
  for (auto& x : xs) x = u(rng);
  auto sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  // Linear interpolation at rank p*(n-1).
  const double lo = sorted[4] + 0.95 * (sorted[5] - sorted[4]);
  const double hi = sorted[94] + 0.05 * (sorted[95] - sorted[94]);
  const auto r = learn_ranges_from_values({{1, xs}}, {1}, {}, AmplitudeMode::Percentile);
  EXPECT_NEAR(r.classes.at(1).min, lo, 1e-12);
  EXPECT_NEAR(r.classes.at(1).max, hi, 1e-12);
  EXPECT_NEAR(r.classes.at(1).min, 0.05, 0.05);
  EXPECT_NEAR(r.classes.at(1).max, 0.95, 0.05);
}

TEST(Ranges, MissingClassIsCoverageError) {
  EXPECT_THROW(learn_ranges_from_values({{1, {1.0, 2.0}}}, {1, 2}, {}), CoverageError);
}

TEST(Ranges, FlatClassIsDegenerate) {
  EXPECT_THROW(learn_ranges_from_values({{1, {3.0, 3.0}}}, {1}, {}), DegenerateRangeError);
}

TEST(PropOutput, EndpointsMidpointAndClipping) {
  AmplitudeRange r;
  r.classes[1] = {10.0, 22.0, 1};
  EXPECT_EQ(prop_output(10.0, 1, r), 0.0);
  EXPECT_EQ(prop_output(22.0, 1, r), 1.0);
  EXPECT_DOUBLE_EQ(prop_output(16.0, 1, r), 0.5);
  EXPECT_EQ(prop_output(40.0, 1, r), 1.0);
  EXPECT_THROW(prop_output(5.0, 3, r), CoverageError);
  r.classes[2] = {5.0, 5.0, 1};
  EXPECT_THROW(prop_output(5.0, 2, r), DegenerateRangeError);
}

TEST(PropOutput, MonotoneAndBoundedOnRange) {
  AmplitudeRange r;
  r.classes[4] = {3.0, 17.5, 2};
  double prev = -1;
  for (double g = 3.0; g <= 17.5; g += 0.01) {
    const double nu = prop_output(g, 4, r);
    ASSERT_GE(nu, prev);
    ASSERT_GE(nu, 0.0);
    ASSERT_LE(nu, 1.0);
    prev = nu;
  }
  for (double g = -50; g < 100; g += 0.7) {
    const double nu = prop_output(g, 4, r);
    ASSERT_GE(nu, 0.0);
    ASSERT_LE(nu, 1.0);
  }
}

TEST(Collect, DropsAndCountsMixedWindows) {
  auto s = test::constant_stream(100, {1}, {5, 0, 0});
  for (std::size_t t = 50; t < 100; ++t) s.labels[t] = 1;
  ClassSensorMap map;
  const auto set = collect_windows(s, layout_for(FeatureKind::FV3, {1}), map, 2);
  EXPECT_EQ(set.size() + set.mixed_excluded, window_count(100));
  EXPECT_EQ(set.mixed_excluded, 7u);
  for (auto q : set.sequence_index) EXPECT_EQ(q, 2);
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.labels[i] == 1) {
      EXPECT_DOUBLE_EQ(set.gamma[i], 5.0);
    } else {
      EXPECT_EQ(set.gamma[i], 0.0);
    }
  }
}

}  // namespace
}  // namespace bomi
