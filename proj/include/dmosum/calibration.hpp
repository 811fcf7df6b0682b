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

#pragma once

// Monte Carlo critical values from the limiting null processes
//   Z_i(t) = |W_i(1/beta + t) - W_i(1/beta + t - 1) - beta W_i(1/beta)|,
// with sup over 0 <= t <= T_tilde/beta of
//   rho(t) sqrt(sum_i Z_i(t)^2)                              (centralized)
//   rho(t) sqrt(sum_i Z_i(t)^2 1{rho(t) Z_i(t) > c_local})   (distributed),
// plus finite-sample recalibration by simulating the monitor under a null.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "dmosum/core_stats.hpp"
#include "dmosum/detection.hpp"
#include "dmosum/error.hpp"
#include "dmosum/matrix.hpp"
#include "dmosum/parallel.hpp"
#include "dmosum/rng.hpp"
#include "dmosum/simgen.hpp"

namespace dmosum {

/// Discretisation of the Brownian paths. The paths live on [0, (1 + T_tilde)/beta]
/// with `steps_per_unit` increments per unit of t, chosen so that the total is
/// close to the requested increment count. 1/beta and 1 are snapped to whole
/// grid indices.
class LimitGrid {
 public:
  static constexpr long kDefaultIncrements = 10000;

  static LimitGrid make(double beta, double T_tilde, long increments = kDefaultIncrements) {
    require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
    require(T_tilde > 0.0 && std::isfinite(T_tilde), "T_tilde must be positive");
    require(increments >= 1, "increments must be >= 1");
    const double span = (1.0 + T_tilde) / beta;
    const long q = std::max(1L, std::lround(static_cast<double>(increments) / span));
    return LimitGrid(beta, T_tilde, q);
  }

  double beta() const noexcept { return beta_; }
  double T_tilde() const noexcept { return T_tilde_; }
  long steps_per_unit() const noexcept { return q_; }
  double grid_step() const noexcept { return 1.0 / static_cast<double>(q_); }

  /// Path index of time 1/beta.
  long burn_in_points() const noexcept { return std::lround(static_cast<double>(q_) / beta_); }
  /// Grid points t_j = j * grid_step, j = 0 .. n_points - 1, covering [0, T_tilde/beta].
  long n_points() const noexcept {
    return static_cast<long>(std::floor(static_cast<double>(q_) * T_tilde_ / beta_ + 1e-9)) + 1;
  }
  long path_increments() const noexcept { return burn_in_points() + n_points() - 1; }
  double t_at(long j) const noexcept { return static_cast<double>(j) / static_cast<double>(q_); }

 private:
  LimitGrid(double beta, double T_tilde, long q) : beta_(beta), T_tilde_(T_tilde), q_(q) {}

  double beta_;
  double T_tilde_;
  long q_;
};

namespace detail {

/// Builds W on the grid for one (replication, stream) and writes Z on t-grid.
inline void z_path(const LimitGrid& grid, const NormalStream& normals, std::vector<double>& path,
                   std::span<double> z) {
  const long increments = grid.path_increments();
  path.resize(static_cast<std::size_t>(increments + 1));
  normals.fill(0, std::span<double>(path).subspan(1));
  const double sd = std::sqrt(grid.grid_step());
  path[0] = 0.0;
  for (long j = 1; j <= increments; ++j) {
    path[static_cast<std::size_t>(j)] = path[static_cast<std::size_t>(j - 1)] + sd * path[static_cast<std::size_t>(j)];
  }
  const long a = grid.burn_in_points();
  const long unit = grid.steps_per_unit();
  const double anchor = grid.beta() * path[static_cast<std::size_t>(a)];
  for (long j = 0; j < grid.n_points(); ++j) {
    const double hi = path[static_cast<std::size_t>(a + j)];
    const double lo = path[static_cast<std::size_t>(a + j - unit)];
    z[static_cast<std::size_t>(j)] = std::fabs(hi - lo - anchor);
  }
}

}  // namespace detail

/// Z_i(t_j) for one replication: a d x n_points matrix.
inline DataMatrix simulate_z_paths(long d, const LimitGrid& grid, std::uint64_t seed, std::uint32_t replication = 0) {
  require(d >= 1, "d must be >= 1");
  DataMatrix z(d, grid.n_points());
  std::vector<double> path;
  for (long i = 0; i < d; ++i) {
    const NormalStream normals(seed, replication, static_cast<std::uint32_t>(i), Domain::Brownian);
    detail::z_path(grid, normals, path, z.stream(i));
  }
  return z;
}

struct CalibrationOptions {
  WeightFn weight = WeightFn::log_weight();
  unsigned threads = 0;
};

/// Sup-statistics of several regimes evaluated on shared Brownian paths.
/// values[v][r] is replication r of regime v.
struct SupSampleTable {
  std::vector<Regime> regimes;
  std::vector<std::vector<double>> values;
};

inline SupSampleTable simulate_sup_samples(long d, const LimitGrid& grid, std::span<const Regime> regimes, long reps,
                                           std::uint64_t seed, const CalibrationOptions& options = {}) {
  require(d >= 1, "d must be >= 1");
  require(reps >= 1, "reps must be >= 1");
  require(!regimes.empty(), "at least one regime is required");
  const std::size_t nv = regimes.size();
  const long n = grid.n_points();
  std::vector<double> rho(static_cast<std::size_t>(n));
  for (long j = 0; j < n; ++j) rho[static_cast<std::size_t>(j)] = options.weight.rho(grid.t_at(j));

  // Centralized includes every term; encode it as an unreachable threshold.
  std::vector<double> thresholds(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    require(regimes[v].c_local >= 0.0, "c_local must be >= 0");
    thresholds[v] = regimes[v].kind == RegimeKind::Centralized ? -std::numeric_limits<double>::infinity()
                                                               : regimes[v].c_local;
  }

  SupSampleTable table{std::vector<Regime>(regimes.begin(), regimes.end()),
                       std::vector<std::vector<double>>(nv, std::vector<double>(static_cast<std::size_t>(reps)))};

  parallel_for(static_cast<std::size_t>(reps), options.threads, [&](std::size_t r) {
    std::vector<double> sumsq(nv * static_cast<std::size_t>(n), 0.0);
    std::vector<double> path;
    std::vector<double> z(static_cast<std::size_t>(n));
    for (long i = 0; i < d; ++i) {
      const NormalStream normals(seed, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(i), Domain::Brownian);
      detail::z_path(grid, normals, path, z);
      for (long j = 0; j < n; ++j) {
        const double zj = z[static_cast<std::size_t>(j)];
        const double z2 = zj * zj;
        const double rz = rho[static_cast<std::size_t>(j)] * zj;
        for (std::size_t v = 0; v < nv; ++v) {
          if (rz > thresholds[v]) sumsq[v * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] += z2;
        }
      }
    }
    for (std::size_t v = 0; v < nv; ++v) {
      double sup = 0.0;
      for (long j = 0; j < n; ++j) {
        const double s = rho[static_cast<std::size_t>(j)] *
                         std::sqrt(sumsq[v * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]);
        sup = std::max(sup, s);
      }
      table.values[v][r] = sup;
    }
  });
  return table;
}

/// Upper order statistic with 1-based index ceil((1 - alpha) * n).
inline double empirical_quantile(std::vector<double> samples, double alpha) {
  require(!samples.empty(), "no samples");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  const auto n = static_cast<long>(samples.size());
  long index = static_cast<long>(std::ceil((1.0 - alpha) * static_cast<double>(n) - 1e-9));
  index = std::clamp(index, 1L, n);
  std::nth_element(samples.begin(), samples.begin() + (index - 1), samples.end());
  return samples[static_cast<std::size_t>(index - 1)];
}

namespace detail {

inline void check_calibration_args(double alpha, long reps) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(reps >= 100, "calibration needs reps >= 100");
}

}  // namespace detail

inline double critical_value_centralized(long d, double alpha, const LimitGrid& grid, long reps, std::uint64_t seed,
                                         const CalibrationOptions& options = {}) {
  detail::check_calibration_args(alpha, reps);
  const Regime regime = Regime::centralized();
  auto table = simulate_sup_samples(d, grid, std::span(&regime, 1), reps, seed, options);
  return empirical_quantile(std::move(table.values[0]), alpha);
}

inline double critical_value_distributed(long d, double alpha, double c_local, const LimitGrid& grid, long reps,
                                         std::uint64_t seed, const CalibrationOptions& options = {}) {
  detail::check_calibration_args(alpha, reps);
  const Regime regime = Regime::distributed(c_local);
  auto table = simulate_sup_samples(d, grid, std::span(&regime, 1), reps, seed, options);
  return empirical_quantile(std::move(table.values[0]), alpha);
}

/// Single-stream critical value: quantile of sup_t rho(t) Z_1(t).
inline double critical_value_local(double alpha, const LimitGrid& grid, long reps, std::uint64_t seed,
                                   const CalibrationOptions& options = {}) {
  return critical_value_centralized(1, alpha, grid, reps, seed, options);
}

/// Expected number of transmitting sensors per step at t = k/h,
/// d * P(|Z| > c_local / rho(t)) for standard normal Z.
inline double expected_transmission_fraction(double c_local, double t, long d, const WeightFn& wf) {
  require(c_local >= 0.0, "c_local must be >= 0");
  require(t >= 0.0, "t must be >= 0");
  const double rho = wf.rho(t);
  if (std::isinf(c_local)) return 0.0;
  return static_cast<double>(d) * std::erfc(c_local / rho / std::numbers::sqrt2);
}

/// Per-replication maxima of the weighted global statistic over the full
/// horizon, with the monitor run on null data drawn from `noise`.
inline std::vector<double> simulate_null_maxima(const MonitorConfig& config, const Noise& noise, long reps,
                                                std::uint64_t seed, unsigned threads = 0) {
  require(reps >= 1, "reps must be >= 1");
  MonitorConfig cfg = config;
  cfg.c_global = std::numeric_limits<double>::infinity();
  cfg.record_transmissions = false;
  cfg.record_trace = false;
  cfg.validate();
  Scenario scenario;
  scenario.d = cfg.d;
  scenario.m = cfg.m;
  scenario.noise = noise;
  scenario.total_length = cfg.m + cfg.horizon();
  std::vector<double> maxima(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    ScenarioRowSource source(scenario, seed, static_cast<std::uint32_t>(r));
    maxima[r] = stream_monitor(cfg, source).max_weighted_global;
  });
  return maxima;
}

struct Thresholds {
  double c_local = 0.0;
  double c_global = 0.0;
};

/// Smallest c_global whose empirical false-alarm fraction under the given
/// null is <= alpha, for the c_local already in `config`.
inline Thresholds empirical_null_thresholds(const MonitorConfig& config, const Noise& noise, double alpha, long reps,
                                            std::uint64_t seed, unsigned threads = 0) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  if (static_cast<double>(reps) * alpha < 10.0) {
    throw Error(Errc::InsufficientReps, "reps * alpha must be >= 10 for a stable quantile");
  }
  auto maxima = simulate_null_maxima(config, noise, reps, seed, threads);
  std::sort(maxima.begin(), maxima.end());
  // Alarms are strict exceedances, so c equal to the k-th largest maximum
  // leaves exactly the k - 1 larger ones firing.
  const auto allowed = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(reps) + 1e-9));
  const double c_global = maxima[maxima.size() - allowed - 1];
  return {config.regime.kind == RegimeKind::Centralized ? 0.0 : config.regime.c_local, c_global};
}

}  // namespace dmosum
