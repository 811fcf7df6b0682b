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

// Replicated experiments: detection delay, transmission cost and false-alarm
// metrics, threshold sweeps, window-size recovery, training-size and
// autocorrelation studies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmosum/calibration.hpp"
#include "dmosum/detection.hpp"
#include "dmosum/error.hpp"
#include "dmosum/parallel.hpp"
#include "dmosum/simgen.hpp"
#include "dmosum/table.hpp"

namespace dmosum {

struct ReplicationResult {
  std::optional<long> alarm_time_abs;
  long steps_executed = 0;
  long total_transmissions = 0;
  double trans_avg = 0.0;  // transmissions / (tau-hat - m + 1)
  double max_weighted_global = 0.0;
  // Squared baseline errors averaged over streams (truth: mean 0, scale 1).
  double sq_err_mean = 0.0;
  double sq_err_scale = 0.0;

  bool operator==(const ReplicationResult&) const = default;
};

struct ExperimentReport {
  double add = std::numeric_limits<double>::quiet_NaN();  // E(tau-hat - tau | tau-hat > tau)
  long add_count = 0;
  double add_capped = std::numeric_limits<double>::quiet_NaN();  // misses count as horizon end - tau
  double trans_avg = 0.0;
  double fp_rate = 0.0;
  double detect_rate = 0.0;
  double mean_max_weighted_global = 0.0;
  long reps = 0;
  Scenario scenario{};
  MonitorConfig config{};
  std::vector<ReplicationResult> raw;  // filled when ExperimentOptions::keep_raw
};

struct ExperimentOptions {
  unsigned threads = 0;
  bool keep_raw = false;
};

namespace detail {

inline void check_experiment(const Scenario& scenario, const MonitorConfig& config) {
  config.validate();
  scenario.validate();
  require(scenario.d == config.d, "scenario d differs from monitor d");
  require(scenario.m == config.m, "scenario m differs from monitor m");
  require(scenario.total_length > config.m, "scenario has no monitoring period");
  if (scenario.alternative()) {
    require(scenario.tau <= config.m + config.horizon(), "changepoint lies beyond the monitoring horizon");
  }
}

inline ReplicationResult replicate(const Scenario& scenario, const MonitorConfig& config, std::uint64_t seed,
                                   std::uint32_t replication) {
  ScenarioStream stream(scenario, seed, replication);
  const auto d = static_cast<std::size_t>(config.d);
  std::vector<std::vector<double>> training(d, std::vector<double>(static_cast<std::size_t>(config.m)));
  std::vector<double> column(d);
  for (long t = 0; t < config.m; ++t) {
    stream.next(column);
    for (std::size_t i = 0; i < d; ++i) training[i][static_cast<std::size_t>(t)] = column[i];
  }
  Detector detector(config);
  detector.train([&](long i) { return std::span<const double>(training[static_cast<std::size_t>(i)]); });

  ReplicationResult result;
  for (const auto& monitor : detector.monitors()) {
    const Baseline& b = monitor.baseline();
    result.sq_err_mean += b.mean() * b.mean();
    result.sq_err_scale += (b.scale() - 1.0) * (b.scale() - 1.0);
  }
  result.sq_err_mean /= static_cast<double>(d);
  result.sq_err_scale /= static_cast<double>(d);

  while (!detector.done() && stream.next(column)) detector.observe(column);
  const DetectionOutcome& outcome = detector.outcome();
  result.alarm_time_abs = outcome.alarm_time_abs;
  result.steps_executed = outcome.steps_executed;
  result.total_transmissions = outcome.total_transmissions;
  result.max_weighted_global = outcome.max_weighted_global;
  // Without an alarm tau-hat is taken as the end of the horizon.
  const long tau_hat = outcome.alarm_time_abs.value_or(config.m + config.horizon());
  result.trans_avg = static_cast<double>(outcome.total_transmissions) / static_cast<double>(tau_hat - config.m + 1);
  return result;
}

}  // namespace detail

/// Aggregates replication results. An alarm before tau (any alarm under the
/// null) is a false positive; an alarm at or after tau is a detection.
inline ExperimentReport summarize(const Scenario& scenario, const MonitorConfig& config,
                                  std::vector<ReplicationResult> raw, bool keep_raw) {
  ExperimentReport report;
  report.scenario = scenario;
  report.config = config;
  report.reps = static_cast<long>(raw.size());
  const long horizon_end = config.m + config.horizon();
  long fp = 0, detected = 0, capped_count = 0;
  double delay_sum = 0.0, capped_sum = 0.0, trans_sum = 0.0, max_sum = 0.0;
  for (const auto& r : raw) {
    trans_sum += r.trans_avg;
    max_sum += r.max_weighted_global;
    if (!scenario.alternative()) {
      if (r.alarm_time_abs) ++fp;
      continue;
    }
    if (r.alarm_time_abs && *r.alarm_time_abs < scenario.tau) {
      ++fp;
      continue;
    }
    ++capped_count;
    if (r.alarm_time_abs) {
      ++detected;
      const long delay = *r.alarm_time_abs - scenario.tau;
      capped_sum += static_cast<double>(delay);
      if (delay > 0) {
        delay_sum += static_cast<double>(delay);
        ++report.add_count;
      }
    } else {
      capped_sum += static_cast<double>(horizon_end - scenario.tau);
    }
  }
  const auto n = static_cast<double>(std::max<long>(report.reps, 1));
  report.fp_rate = static_cast<double>(fp) / n;
  report.detect_rate = static_cast<double>(detected) / n;
  report.trans_avg = trans_sum / n;
  report.mean_max_weighted_global = max_sum / n;
  if (report.add_count > 0) report.add = delay_sum / static_cast<double>(report.add_count);
  if (capped_count > 0) report.add_capped = capped_sum / static_cast<double>(capped_count);
  if (keep_raw) report.raw = std::move(raw);
  return report;
}

/// `reps` independent generate -> monitor pipelines; replication r uses
/// random substream r of `seed`, so results do not depend on threading.
inline ExperimentReport run_experiment(const Scenario& scenario, const MonitorConfig& config, long reps,
                                       std::uint64_t seed, const ExperimentOptions& options = {}) {
  require(reps >= 1, "reps must be >= 1");
  detail::check_experiment(scenario, config);
  MonitorConfig cfg = config;
  cfg.record_transmissions = false;
  cfg.record_trace = false;
  std::vector<ReplicationResult> raw(static_cast<std::size_t>(reps));
  parallel_for(raw.size(), options.threads, [&](std::size_t r) {
    try {
      raw[r] = detail::replicate(scenario, cfg, seed, static_cast<std::uint32_t>(r));
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (replication " + std::to_string(r) + ")", e.row());
    }
  });
  return summarize(scenario, config, std::move(raw), options.keep_raw);
}

/// Thresholds paired with a shift size for one sweep cell.
struct SweepRow {
  Thresholds thresholds;
  ShiftKind shift_kind = ShiftKind::Fixed;
  double shift = 0.0;
  ExperimentReport report;
};

inline MonitorConfig with_thresholds(MonitorConfig config, const Thresholds& th) {
  config.regime = Regime::distributed(th.c_local);
  config.c_global = th.c_global;
  return config;
}

/// One experiment per (thresholds, shift) cell, all on the same seeds.
inline std::vector<SweepRow> threshold_sweep(const Scenario& base, std::span<const double> shifts,
                                             std::span<const Thresholds> thresholds, const MonitorConfig& config,
                                             long reps, std::uint64_t seed, const ExperimentOptions& options = {}) {
  require(base.alternative(), "sweep needs a Fixed or RandomGaussian shift family");
  std::vector<SweepRow> rows;
  for (const auto& th : thresholds) {
    for (double shift : shifts) {
      Scenario s = base;
      s.shift.value = shift;
      rows.push_back({th, s.shift.kind, shift, run_experiment(s, with_thresholds(config, th), reps, seed, options)});
    }
  }
  return rows;
}

/// c_global for a given (c_local, window h).
using ThresholdProvider = std::function<double(double c_local, long h)>;

/// Finite-sample calibration under an iid N(0,1) null for each requested
/// (c_local, h); results are cached.
inline ThresholdProvider empirical_threshold_provider(const MonitorConfig& base, double alpha, long reps,
                                                      std::uint64_t seed, unsigned threads = 0) {
  auto cache = std::make_shared<std::map<std::pair<double, long>, double>>();
  return [=](double c_local, long h) {
    const auto key = std::make_pair(c_local, h);
    if (auto it = cache->find(key); it != cache->end()) return it->second;
    MonitorConfig cfg = base;
    cfg.h = h;
    cfg.regime = Regime::distributed(c_local);
    const double c = empirical_null_thresholds(cfg, Noise::iid(), alpha, reps, seed, threads).c_global;
    cache->emplace(key, c);
    return c;
  };
}

struct BandwidthSearch {
  std::optional<double> delta0;     // nullopt: locate the transition automatically
  std::vector<double> delta_grid;   // fixed shifts scanned when delta0 is automatic
  long h0 = 50;
  double c_local = 0.0;
  long stride = 1;
  ThresholdProvider c_global_for;
};

struct BandwidthResult {
  long h_star = 0;
  double delta0 = 0.0;
  double reference_delay = 0.0;  // centralized, window h0
  double delay_at_h_star = 0.0;
  std::vector<std::pair<double, double>> reference_curve;  // (delta, delay), automatic delta0 only
  std::vector<std::pair<long, double>> curve;              // (h, delay) of the distributed monitor
};

/// Midpoint of the narrowest [a, b] with delay(a) >= 80% and delay(b) <= 20%
/// of the largest delay on the curve (curve sorted by delta).
inline double locate_transition(const std::vector<std::pair<double, double>>& curve) {
  double top = 0.0;
  for (const auto& [delta, delay] : curve) top = std::max(top, delay);
  std::optional<std::pair<double, double>> best;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (!(curve[i].second >= 0.8 * top)) continue;
    for (std::size_t j = i + 1; j < curve.size(); ++j) {
      if (curve[j].second <= 0.2 * top) {
        if (!best || curve[j].first - curve[i].first < best->second - best->first) {
          best = std::make_pair(curve[i].first, curve[j].first);
        }
        break;
      }
    }
  }
  if (!best) throw Error(Errc::NoTransition, "delay curve never drops from 80% to 20% of its maximum");
  return 0.5 * (best->first + best->second);
}

/// Smallest window h in [h0, m] (on the stride grid) whose distributed delay
/// is closest to the centralized delay at h0. Delays are the capped averages
/// so that replications without a detection still count.
inline BandwidthResult recover_bandwidth(const BandwidthSearch& search, const Scenario& base,
                                         const MonitorConfig& config, long reps, std::uint64_t seed,
                                         const ExperimentOptions& options = {}) {
  if (search.h0 < 1 || search.h0 > config.m) throw Error(Errc::SearchRangeEmpty, "window search range [h0, m] is empty");
  require(search.stride >= 1, "stride must be >= 1");
  require(static_cast<bool>(search.c_global_for), "a threshold provider is required");
  require(base.alternative(), "window recovery needs a shift scenario");

  auto delay_for = [&](double delta, long h, double c_local) {
    Scenario s = base;
    s.shift.value = delta;
    MonitorConfig cfg = config;
    cfg.h = h;
    const Thresholds th{c_local, search.c_global_for(c_local, h)};
    return run_experiment(s, with_thresholds(cfg, th), reps, seed, options).add_capped;
  };

  BandwidthResult result;
  if (search.delta0) {
    result.delta0 = *search.delta0;
  } else {
    require(!search.delta_grid.empty(), "automatic delta0 needs a delta grid");
    auto grid = search.delta_grid;
    std::sort(grid.begin(), grid.end());
    for (double delta : grid) result.reference_curve.emplace_back(delta, delay_for(delta, search.h0, 0.0));
    result.delta0 = locate_transition(result.reference_curve);
  }
  result.reference_delay = delay_for(result.delta0, search.h0, 0.0);

  double best_gap = std::numeric_limits<double>::infinity();
  for (long h = search.h0; h <= config.m; h += search.stride) {
    const double delay = delay_for(result.delta0, h, search.c_local);
    result.curve.emplace_back(h, delay);
    const double gap = std::fabs(delay - result.reference_delay);
    if (gap < best_gap) {
      best_gap = gap;
      result.h_star = h;
      result.delay_at_h_star = delay;
    }
  }
  return result;
}

struct TrainingRow {
  long m = 0;
  double c_global = 0.0;
  double empirical_size = 0.0;
  double mse_mean = 0.0;
  double mse_sd = 0.0;
};

/// c_global for a training length m at fixed window and total length.
using TrainingThresholdProvider = std::function<double(long m)>;

/// Per training length m: recalibrated c_global, empirical size under iid
/// N(0,1) data of total length T, and MSE of the baseline estimates.
inline std::vector<TrainingRow> training_size_study(std::span<const long> m_values, const MonitorConfig& base,
                                                    long total_length, const TrainingThresholdProvider& c_global_for,
                                                    long reps, std::uint64_t seed,
                                                    const ExperimentOptions& options = {}) {
  std::vector<TrainingRow> rows;
  for (long m : m_values) {
    require(m >= base.h, "every training length must be >= h");
    require(total_length > m, "total length must exceed m");
    MonitorConfig cfg = base;
    cfg.m = m;
    cfg.T_tilde = static_cast<double>(total_length - m) / static_cast<double>(m);
    cfg.c_global = c_global_for(m);
    Scenario s;
    s.d = cfg.d;
    s.m = m;
    s.total_length = total_length;
    ExperimentOptions opts = options;
    opts.keep_raw = true;
    const auto report = run_experiment(s, cfg, reps, seed, opts);
    TrainingRow row;
    row.m = m;
    row.c_global = cfg.c_global;
    row.empirical_size = report.fp_rate;
    for (const auto& r : report.raw) {
      row.mse_mean += r.sq_err_mean;
      row.mse_sd += r.sq_err_scale;
    }
    row.mse_mean /= static_cast<double>(reps);
    row.mse_sd /= static_cast<double>(reps);
    rows.push_back(row);
  }
  return rows;
}

enum class Adjustment { NoAdjust, InflateThresholds, LRV };

inline const char* adjustment_name(Adjustment a) {
  switch (a) {
    case Adjustment::NoAdjust: return "none";
    case Adjustment::InflateThresholds: return "inflate";
    case Adjustment::LRV: return "lrv";
  }
  return "?";
}

struct AutocorrelationPlan {
  std::vector<double> phis;
  std::vector<Adjustment> methods{Adjustment::NoAdjust, Adjustment::InflateThresholds, Adjustment::LRV};
  std::vector<long> ps;
  std::vector<double> deltas;
  Thresholds iid;            // thresholds calibrated for iid noise
  double alpha = 0.05;
  long calibration_reps = 1000;  // null replications for InflateThresholds
  long lrv_bandwidth = 0;        // 0: default bandwidth for m
  // LRV: recalibrate c_global under the iid null with the long-run scale in
  // place (no knowledge of phi needed); false keeps `iid.c_global`.
  bool calibrate_lrv = true;
};

struct AutocorrelationRow {
  double phi = 0.0;
  long p = 0;
  double delta = 0.0;
  Adjustment method = Adjustment::NoAdjust;
  double c_global = 0.0;
  ExperimentReport report;
};

/// NoAdjust: plain scale, iid thresholds. InflateThresholds: plain scale,
/// c_global recalibrated under the AR(1) null. LRV: Bartlett long-run scale
/// (plain fallback when non-positive), thresholds calibrated on iid noise.
inline std::vector<AutocorrelationRow> autocorrelation_study(const AutocorrelationPlan& plan, const Scenario& base,
                                                             const MonitorConfig& config, long reps,
                                                             std::uint64_t seed,
                                                             const ExperimentOptions& options = {}) {
  std::vector<AutocorrelationRow> rows;
  std::optional<double> lrv_c_global;
  for (double phi : plan.phis) {
    require(std::fabs(phi) < 1.0, "AR(1) needs |phi| < 1");
    for (Adjustment method : plan.methods) {
      MonitorConfig cfg = with_thresholds(config, plan.iid);
      cfg.scale = ScaleEstimator{};
      if (method == Adjustment::LRV) {
        cfg.scale.kind = ScaleKind::LongRun;
        cfg.scale.kernel = Kernel::Bartlett;
        cfg.scale.bandwidth = plan.lrv_bandwidth;
        cfg.scale.fallback = LrvFallback::UsePlain;
        if (plan.calibrate_lrv) {
          if (!lrv_c_global) {
            lrv_c_global = empirical_null_thresholds(cfg, Noise::iid(), plan.alpha, plan.calibration_reps,
                                                     derive_seed(seed, 4), options.threads)
                               .c_global;
          }
          cfg.c_global = *lrv_c_global;
        }
      }
      if (method == Adjustment::InflateThresholds) {
        cfg.c_global = empirical_null_thresholds(cfg, Noise::ar1(phi), plan.alpha, plan.calibration_reps,
                                                 derive_seed(seed, 1), options.threads)
                           .c_global;
      }
      for (long p : plan.ps) {
        for (double delta : plan.deltas) {
          Scenario s = base;
          s.noise = Noise::ar1(phi);
          s.p = p;
          s.shift = Shift::fixed(delta);
          rows.push_back({phi, p, delta, method, cfg.c_global, run_experiment(s, cfg, reps, seed, options)});
        }
      }
    }
  }
  return rows;
}

}  // namespace dmosum
