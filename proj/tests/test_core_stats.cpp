// Copyright 2026 The dmosum Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <numbers>
#include <random>
#include <vector>

#include "dmosum/core_stats.hpp"

namespace dmosum {
namespace {

std::vector<double> normal_sample(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(mean, sd);
  std::vector<double> out(n);
  for (auto& x : out) x = dist(gen);
  return out;
}

std::vector<double> ar1_sample(std::size_t n, double phi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  double e = dist(gen) / std::sqrt(1.0 - phi * phi);
  for (auto& x : out) {
    e = phi * e + dist(gen);
    x = e;
  }
  return out;
}

// Direct long double evaluation of the kernel long-run variance.
long double naive_lrv(const std::vector<double>& x, Kernel kernel, long l) {
  const auto m = static_cast<long>(x.size());
  long double mean = 0;
  for (double v : x) mean += v;
  mean /= m;
  auto gamma = [&](long j) {
    long double s = 0;
    for (long t = 0; t + j < m; ++t) s += (x[t] - mean) * (x[t + j] - mean);
    return s / (m - j);
  };
  long double total = gamma(0);
  for (long j = 1; j < m; ++j) {
    const double k = kernel_weight(kernel, j, l);
    if (k != 0.0) total += 2 * k * gamma(j);
  }
  return total;
}

TEST(Baseline, SmallHistoryUsesDivisorM) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const Baseline b = estimate_baseline(x);
  EXPECT_DOUBLE_EQ(b.mean(), 2.0);
  EXPECT_NEAR(b.variance(), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(b.kind(), ScaleKind::Plain);
}

TEST(Baseline, ConstantHistoryIsDegenerate) {
  const std::vector<double> x(50, 4.25);
  try {
    estimate_baseline(x);
    FAIL() << "expected DegenerateTraining";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateTraining);
  }
}

TEST(Baseline, RejectsShortAndNonFiniteHistory) {
  const std::vector<double> one{1.0};
  try {
    estimate_baseline(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooShort);
  }
  const std::vector<double> bad{1.0, std::nan(""), 2.0};
  EXPECT_THROW(estimate_baseline(bad), Error);
  EXPECT_THROW(Baseline::plain(0.0, 0.0), Error);
  EXPECT_THROW(Baseline::plain(0.0, -1.0), Error);
}

TEST(Baseline, LargeSampleMatchesIndependentRecomputation) {
  const auto x = normal_sample(100000, 5.0, 2.0, 7);
  long double s = 0, ss = 0;
  for (double v : x) s += v;
  const long double mean = s / x.size();
  for (double v : x) ss += (v - mean) * (v - mean);
  const Baseline b = estimate_baseline(x);
  EXPECT_NEAR(b.mean(), static_cast<double>(mean), 1e-12);
  EXPECT_NEAR(b.variance(), static_cast<double>(ss / x.size()), 1e-11);
  EXPECT_NEAR(b.mean(), 5.0, 0.05);
  EXPECT_NEAR(b.variance(), 4.0, 0.15);
}

TEST(Kernel, BartlettClosedForm) {
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Bartlett, 0, 5), 1.0);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Bartlett, 2, 5), 0.6);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Bartlett, 5, 5), 0.0);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Bartlett, 9, 5), 0.0);
}

TEST(Kernel, UnitAtZeroForEveryVariant) {
  for (Kernel k : {Kernel::Truncated, Kernel::Bartlett, Kernel::Parzen}) {
    for (long l : {1L, 2L, 7L, 100L}) EXPECT_DOUBLE_EQ(kernel_weight(k, 0, l), 1.0);
  }
}

TEST(Kernel, TruncatedAndParzenStandardForms) {
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Truncated, 3, 4), 1.0);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Truncated, 4, 4), 0.0);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Parzen, 1, 4), 1.0 - 6.0 * 0.0625 + 6.0 * 0.015625);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Parzen, 2, 4), 0.25);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Parzen, 3, 4), 2.0 * 0.015625);
  EXPECT_DOUBLE_EQ(kernel_weight(Kernel::Parzen, 4, 4), 0.0);
  for (Kernel k : {Kernel::Truncated, Kernel::Bartlett, Kernel::Parzen}) {
    for (long j = 0; j <= 12; ++j) {
      const double w = kernel_weight(k, j, 10);
      EXPECT_GE(w, 0.0);
      EXPECT_LE(w, 1.0);
    }
  }
}

TEST(Lrv, DefaultBandwidthIsCubeRootCeiling) {
  EXPECT_EQ(default_bandwidth(8), 2);
  EXPECT_EQ(default_bandwidth(9), 3);
  EXPECT_EQ(default_bandwidth(200), 6);
  EXPECT_EQ(default_bandwidth(10000), 22);
  EXPECT_EQ(default_bandwidth(1000000), 100);
}

TEST(Lrv, IidUnitVariance) {
  const auto x = normal_sample(10000, 0.0, 1.0, 11);
  const Baseline b = estimate_lrv(x, Kernel::Bartlett);
  EXPECT_EQ(b.kind(), ScaleKind::LongRun);
  EXPECT_EQ(b.bandwidth(), 22);
  EXPECT_NEAR(b.variance(), 1.0, 0.1);
}

TEST(Lrv, Ar1HalfHasLongRunVarianceFour) {
  const auto x = ar1_sample(100000, 0.5, 12);
  EXPECT_NEAR(estimate_lrv(x, Kernel::Bartlett, 50).variance(), 4.0, 0.4);
}

TEST(Lrv, AlternatingSeriesIsNonPositiveOrShrunk) {
  std::vector<double> x(200);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = t % 2 ? -1.0 : 1.0;
  const double plain = estimate_baseline(x).variance();
  for (Kernel k : {Kernel::Truncated, Kernel::Bartlett, Kernel::Parzen}) {
    for (long l : {2L, 4L, 6L}) {
      try {
        EXPECT_LT(estimate_lrv(x, k, l).variance(), plain);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonPositiveLRV);
      }
    }
  }
  try {
    estimate_lrv(x, Kernel::Truncated, 2);
    FAIL() << "truncated kernel at l = 2 gives a negative estimate";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonPositiveLRV);
  }
}

TEST(Lrv, MatchesDirectEvaluation) {
  const auto x = ar1_sample(500, 0.3, 13);
  for (Kernel k : {Kernel::Truncated, Kernel::Bartlett, Kernel::Parzen}) {
    for (long l : {1L, 4L, 9L}) {
      const double got = estimate_lrv(x, k, l).variance();
      EXPECT_NEAR(got, static_cast<double>(naive_lrv(x, k, l)), 1e-12) << "kernel " << static_cast<int>(k) << " l " << l;
    }
  }
}

TEST(Lrv, TruncatedBandwidthOneIsPlainVariance) {
  const auto x = normal_sample(777, 1.5, 3.0, 14);
  const Baseline plain = estimate_baseline(x);
  const Baseline lrv = estimate_lrv(x, Kernel::Truncated, 1);
  EXPECT_EQ(lrv.variance(), plain.variance());
  EXPECT_EQ(lrv.mean(), plain.mean());
}

TEST(Lrv, FallbackPolicy) {
  std::vector<double> x(100);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = t % 2 ? -1.0 : 1.0;
  ScaleEstimator est{ScaleKind::LongRun, Kernel::Truncated, 2, LrvFallback::Error};
  EXPECT_THROW(estimate_scale(x, est), Error);
  est.fallback = LrvFallback::UsePlain;
  const Baseline b = estimate_scale(x, est);
  EXPECT_TRUE(b.fallback_used());
  EXPECT_EQ(b.kind(), ScaleKind::Plain);
  EXPECT_DOUBLE_EQ(b.variance(), 1.0);
}

TEST(Weight, Examples) {
  const WeightFn wf = WeightFn::log_weight();
  EXPECT_DOUBLE_EQ(weight(wf, 100, 100), 0.1);
  EXPECT_NEAR(wf.rho(std::exp(2.0) - 1.0), 1.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_DOUBLE_EQ(weight(wf, 1, 10000), 0.01);
  EXPECT_DOUBLE_EQ(wf.rho(0.0), 1.0);
}

TEST(Weight, MonotoneAndScaleFree) {
  const WeightFn wf = WeightFn::log_weight();
  for (long h : {1L, 7L, 100L}) {
    double prev = weight(wf, 1, h);
    for (long k = 2; k < 50 * h; k += 1 + k / 50) {
      const double w = weight(wf, k, h);
      EXPECT_LE(w, prev);
      EXPECT_GT(w, 0.0);
      EXPECT_LE(w * std::sqrt(static_cast<double>(h)), 1.0);
      prev = w;
    }
  }
  for (long k : {1L, 3L, 17L, 250L}) {
    EXPECT_NEAR(weight(wf, k, 3) * std::sqrt(3.0), weight(wf, 10 * k, 30) * std::sqrt(30.0), 1e-14);
  }
}

TEST(Weight, ConstantAndCustom) {
  EXPECT_DOUBLE_EQ(weight(WeightFn::constant(), 5000, 4), 0.5);
  const WeightFn half = WeightFn::custom([](double) { return 0.5; }, "half");
  EXPECT_DOUBLE_EQ(weight(half, 3, 100), 0.05);
  EXPECT_EQ(half.name(), "half");
}

TEST(LocalWindow, SmallExample) {
  LocalWindow w(2);
  w.push(0.0);
  w.push(2.0);
  EXPECT_DOUBLE_EQ(local_statistic(w, Baseline::plain(1.0, 1.0)), 2.0);
  LocalWindow z(3);
  for (int i = 0; i < 3; ++i) z.push(0.0);
  EXPECT_DOUBLE_EQ(local_statistic(z, Baseline::plain(1.0, 2.0)), 0.0);
}

TEST(LocalWindow, NotFullIsAnError) {
  LocalWindow w(3);
  w.push(1.0);
  w.push(1.0);
  try {
    local_statistic(w, Baseline::plain(0.0, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::WindowNotFull);
  }
}

TEST(LocalWindow, IncrementalMatchesNaive) {
  std::mt19937_64 gen(99);
  std::normal_distribution<double> dist(3.0, 5.0);
  for (long h : {1L, 7L, 50L, 1000L}) {
    LocalWindow w(h);
    std::deque<double> ref;
    double max_abs = 0.0;
    const Baseline base = Baseline::plain(0.0, 1.7);
    for (long n = 0; n < 100000; ++n) {
      const double x = dist(gen);
      max_abs = std::max(max_abs, std::fabs(x));
      w.push(x);
      ref.push_back(x);
      if (static_cast<long>(ref.size()) > h) ref.pop_front();
      if (!w.full()) continue;
      if (h == 1000 && n % 7 != 0) continue;
      long double s = 0;
      for (double v : ref) s += v;
      const double naive = static_cast<double>(std::fabs(s) / 1.7L);
      ASSERT_NEAR(local_statistic(w, base), naive, 1e-9 * static_cast<double>(h) * max_abs) << "h " << h << " n " << n;
    }
  }
}

TEST(LocalWindow, VisitsOldestToNewest) {
  LocalWindow w(3);
  for (double x : {1.0, 2.0, 3.0, 4.0, 5.0}) w.push(x);
  std::vector<double> seen;
  w.for_each([&](double x) { seen.push_back(x); });
  EXPECT_EQ(seen, (std::vector<double>{3.0, 4.0, 5.0}));
  EXPECT_DOUBLE_EQ(w.sum(), 12.0);
  EXPECT_DOUBLE_EQ(w.exact_sum(), 12.0);
}

TEST(LocalWindow, ScaleEquivariance) {
  auto x = normal_sample(400, 2.0, 1.0, 21);
  const double c = 3.7;
  std::vector<double> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) y[t] = c * x[t];
  const std::span<const double> tx(x.data(), 200), ty(y.data(), 200);
  const Baseline bx = estimate_baseline(tx), by = estimate_baseline(ty);
  LocalWindow wx(50), wy(50);
  for (std::size_t t = 0; t < x.size(); ++t) {
    wx.push(x[t] - bx.mean());
    wy.push(y[t] - by.mean());
    if (!wx.full()) continue;
    const double sx = local_statistic(wx, bx);
    EXPECT_NEAR(local_statistic(wy, by), sx, 1e-9 * std::max(1.0, sx));
  }
}

}  // namespace
}  // namespace dmosum
