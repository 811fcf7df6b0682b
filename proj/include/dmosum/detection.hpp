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

// Online protocol: per-sensor moving-sum monitors, thresholded message
// passing to a fusion centre, and the closed-end global stopping rule.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dmosum/core_stats.hpp"
#include "dmosum/error.hpp"
#include "dmosum/matrix.hpp"

namespace dmosum {

enum class RegimeKind { Centralized, Distributed };

/// Messaging regime. Centralized sends every statistic; Distributed sends
/// T_i only when w(k,h) * T_i > c_local.
struct Regime {
  RegimeKind kind = RegimeKind::Centralized;
  double c_local = 0.0;

  static Regime centralized() { return {RegimeKind::Centralized, 0.0}; }
  static Regime distributed(double c_local) { return {RegimeKind::Distributed, c_local}; }

  bool operator==(const Regime&) const = default;
};

struct MonitorConfig {
  long d = 1;
  long m = 2;
  long h = 1;
  double T_tilde = 1.0;
  WeightFn weight = WeightFn::log_weight();
  Regime regime = Regime::centralized();
  double c_global = 0.0;
  ScaleEstimator scale{};
  // Diagnostics retained in the outcome.
  bool record_trace = false;
  bool record_transmissions = true;

  /// Number of monitoring steps, floor(m * T_tilde).
  long horizon() const {
    return static_cast<long>(std::floor(static_cast<double>(m) * T_tilde + 1e-9));
  }
  double beta() const { return static_cast<double>(h) / static_cast<double>(m); }

  void validate() const {
    require(d >= 1, "d must be >= 1");
    require(m >= 2, "m must be >= 2");
    require(h >= 1 && h <= m, "h must satisfy 1 <= h <= m");
    require(T_tilde > 0.0 && std::isfinite(T_tilde), "T_tilde must be positive and finite");
    require(horizon() >= 1, "monitoring horizon floor(m * T_tilde) must be >= 1");
    require(c_global >= 0.0, "c_global must be >= 0");
    require(regime.c_local >= 0.0, "c_local must be >= 0");
  }
};

/// Messages received by the centre at time t = m + k. Absent streams sent
/// nothing. Entries are ordered by stream index.
struct MessageBatch {
  long time = 0;
  std::vector<std::pair<long, double>> entries;

  std::size_t transmissions() const noexcept { return entries.size(); }
  bool operator==(const MessageBatch&) const = default;
};

/// Root-sum-square of the received statistics; absent entries count as 0.
inline double global_statistic(const MessageBatch& batch) {
  double sumsq = 0.0;
  for (const auto& [stream, value] : batch.entries) sumsq += value * value;
  return std::sqrt(sumsq);
}

struct DetectionOutcome {
  std::optional<long> stopped_at;      // k-hat; absent means no alarm in the horizon
  std::optional<long> alarm_time_abs;  // m + k-hat
  std::vector<long> transmissions_per_step;
  std::optional<std::vector<double>> global_stat_trace;  // weighted global statistic per step
  long steps_executed = 0;
  long total_transmissions = 0;
  double max_weighted_global = 0.0;

  bool operator==(const DetectionOutcome&) const = default;
};

/// One sensor: frozen baseline plus the moving-sum window of centred data.
class SensorMonitor {
 public:
  explicit SensorMonitor(long h) : window_(h) {}

  /// Estimates the baseline from the training history and preloads the
  /// window with its last h centred values, so statistics exist from k = 1.
  void train(std::span<const double> history, const ScaleEstimator& estimator) {
    require(static_cast<long>(history.size()) >= window_.capacity(), "training history shorter than the window");
    baseline_ = estimate_scale(history, estimator);
    window_ = LocalWindow(window_.capacity());
    for (double x : history.subspan(history.size() - static_cast<std::size_t>(window_.capacity()))) {
      window_.push(x - baseline_->mean());
    }
  }

  void observe(double x) noexcept { window_.push(x - baseline_->mean()); }

  double statistic() const { return local_statistic(window_, baseline()); }

  bool trained() const noexcept { return baseline_.has_value(); }
  const Baseline& baseline() const {
    if (!baseline_) throw Error(Errc::InvalidArgument, "sensor monitor used before training");
    return *baseline_;
  }
  const LocalWindow& window() const noexcept { return window_; }

 private:
  LocalWindow window_;
  std::optional<Baseline> baseline_;
};

struct StepResult {
  MessageBatch batch;
  double global_weighted = 0.0;
  bool alarmed = false;
};

namespace detail {

inline double step_into(std::span<SensorMonitor> monitors, const MonitorConfig& config,
                        std::span<const double> observations, long k, MessageBatch& batch) {
  require(observations.size() == monitors.size(), "observation count differs from monitor count");
  require(k >= 1, "monitoring time k must be >= 1");
  const double w = weight(config.weight, k, config.h);
  const bool centralized = config.regime.kind == RegimeKind::Centralized;
  const double c_local = config.regime.c_local;
  batch.time = config.m + k;
  batch.entries.clear();
  for (std::size_t i = 0; i < monitors.size(); ++i) {
    monitors[i].observe(observations[i]);
    const double stat = monitors[i].statistic();
    if (centralized || w * stat > c_local) batch.entries.emplace_back(static_cast<long>(i), stat);
  }
  return w * global_statistic(batch);
}

}  // namespace detail

/// One time step of the protocol: local update, message filtering and the
/// global test w(k,h) * sqrt(sum M^2) > c_global.
inline StepResult step(std::span<SensorMonitor> monitors, const MonitorConfig& config,
                       std::span<const double> observations, long k) {
  StepResult result;
  result.global_weighted = detail::step_into(monitors, config, observations, k, result.batch);
  result.alarmed = result.global_weighted > config.c_global;
  return result;
}

/// Incremental form of the protocol: train once, then feed one column of d
/// observations per monitoring step until an alarm or the horizon.
class Detector {
 public:
  explicit Detector(MonitorConfig config) : config_(std::move(config)) {
    config_.validate();
    monitors_.assign(static_cast<std::size_t>(config_.d), SensorMonitor(config_.h));
    batch_.entries.reserve(static_cast<std::size_t>(config_.d));
    if (config_.record_trace) outcome_.global_stat_trace.emplace();
  }

  const MonitorConfig& config() const noexcept { return config_; }

  /// `history(i)` must return the m training values of stream i.
  template <typename HistoryFn>
  void train(HistoryFn&& history) {
    for (long i = 0; i < config_.d; ++i) {
      std::span<const double> h = history(i);
      require(static_cast<long>(h.size()) == config_.m, "training history length differs from m");
      monitors_[static_cast<std::size_t>(i)].train(h, config_.scale);
    }
    trained_ = true;
  }

  bool done() const noexcept { return done_; }
  long k() const noexcept { return k_; }

  /// Feeds the observations at time m + k + 1. Returns true on alarm.
  bool observe(std::span<const double> column) {
    if (!trained_) throw Error(Errc::InvalidArgument, "detector used before training");
    if (done_) throw Error(Errc::InvalidArgument, "detector already finished");
    ++k_;
    const double gw = detail::step_into(monitors_, config_, column, k_, batch_);
    const auto sent = static_cast<long>(batch_.transmissions());
    if (config_.record_transmissions) outcome_.transmissions_per_step.push_back(sent);
    if (outcome_.global_stat_trace) outcome_.global_stat_trace->push_back(gw);
    outcome_.total_transmissions += sent;
    outcome_.steps_executed = k_;
    if (gw > outcome_.max_weighted_global) outcome_.max_weighted_global = gw;
    const bool alarmed = gw > config_.c_global;
    if (alarmed) {
      outcome_.stopped_at = k_;
      outcome_.alarm_time_abs = config_.m + k_;
    }
    done_ = alarmed || k_ >= config_.horizon();
    return alarmed;
  }

  const MessageBatch& last_batch() const noexcept { return batch_; }
  const std::vector<SensorMonitor>& monitors() const noexcept { return monitors_; }
  const DetectionOutcome& outcome() const noexcept { return outcome_; }
  DetectionOutcome take_outcome() { return std::move(outcome_); }

 private:
  MonitorConfig config_;
  std::vector<SensorMonitor> monitors_;
  MessageBatch batch_;
  DetectionOutcome outcome_;
  long k_ = 0;
  bool trained_ = false;
  bool done_ = false;
};

/// Runs the protocol over a materialised d x T matrix whose first m columns
/// are training data. Monitoring stops at the first alarm, at the horizon,
/// or when the matrix runs out of columns.
inline DetectionOutcome run_monitor(const MonitorConfig& config, const DataMatrix& data) {
  require(data.streams() == config.d, "data stream count differs from d");
  if (data.length() < config.m) throw Error(Errc::SourceExhausted, "data shorter than the training period");
  Detector detector(config);
  detector.train([&](long i) { return data.stream(i).first(static_cast<std::size_t>(config.m)); });
  std::vector<double> column(static_cast<std::size_t>(config.d));
  for (long t = config.m; t < data.length() && !detector.done(); ++t) {
    data.column(t, column);
    detector.observe(column);
  }
  return detector.take_outcome();
}

/// Row-by-row supplier of d-column records (one row per time step).
class RowSource {
 public:
  virtual ~RowSource() = default;
  /// Fills `row` with the next record; returns false at end of input.
  virtual bool next(std::vector<double>& row) = 0;
  /// 1-based index of the last row returned, for error messages.
  virtual long row_index() const = 0;
};

class MatrixRowSource final : public RowSource {
 public:
  explicit MatrixRowSource(const DataMatrix& data) : data_(data) {}

  bool next(std::vector<double>& row) override {
    if (t_ >= data_.length()) return false;
    row.resize(static_cast<std::size_t>(data_.streams()));
    data_.column(t_++, row);
    return true;
  }
  long row_index() const override { return t_; }

 private:
  const DataMatrix& data_;
  long t_ = 0;
};

/// Online ingestion form of run_monitor. Memory is O(d * m) for training
/// plus O(d * h) afterwards, independent of the number of rows.
inline DetectionOutcome stream_monitor(const MonitorConfig& config, RowSource& source) {
  config.validate();
  const auto d = static_cast<std::size_t>(config.d);
  std::vector<double> row;
  auto fetch = [&]() {
    if (!source.next(row)) return false;
    if (row.size() != d) {
      throw Error(Errc::ParseError,
                  "row has " + std::to_string(row.size()) + " columns, expected " + std::to_string(d),
                  source.row_index());
    }
    return true;
  };

  Detector detector(config);
  {
    std::vector<std::vector<double>> training(d);
    for (auto& h : training) h.reserve(static_cast<std::size_t>(config.m));
    for (long t = 0; t < config.m; ++t) {
      if (!fetch()) {
        throw Error(Errc::SourceExhausted, "source ended after " + std::to_string(t) + " rows; need m = " +
                                               std::to_string(config.m));
      }
      for (std::size_t i = 0; i < d; ++i) training[i].push_back(row[i]);
    }
    detector.train([&](long i) { return std::span<const double>(training[static_cast<std::size_t>(i)]); });
  }
  while (!detector.done() && fetch()) detector.observe(row);
  return detector.take_outcome();
}

}  // namespace dmosum
