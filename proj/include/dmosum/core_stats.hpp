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

// Numerical kernel of the monitor: baseline estimation, long-run variance,
// boundary weights and the per-stream moving-sum window.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmosum/error.hpp"
#include "dmosum/summation.hpp"

namespace dmosum {

enum class Kernel { Truncated, Bartlett, Parzen };

enum class ScaleKind { Plain, LongRun };

/// Pre-change mean and noise scale of one stream. `scale` is a standard
/// deviation (plain or long-run), never a variance.
class Baseline {
 public:
  static Baseline plain(double mean, double scale) { return Baseline(mean, scale, ScaleKind::Plain, Kernel::Bartlett, 0); }

  static Baseline long_run(double mean, double scale, Kernel kernel, long bandwidth) {
    return Baseline(mean, scale, ScaleKind::LongRun, kernel, bandwidth);
  }

  double mean() const noexcept { return mean_; }
  double scale() const noexcept { return scale_; }
  double variance() const noexcept { return scale_ * scale_; }
  ScaleKind kind() const noexcept { return kind_; }
  Kernel kernel() const noexcept { return kernel_; }
  long bandwidth() const noexcept { return bandwidth_; }

  /// True when a long-run estimate was requested but the plain variance was
  /// used because the kernel sum was not positive.
  bool fallback_used() const noexcept { return fallback_used_; }
  Baseline& mark_fallback() noexcept {
    fallback_used_ = true;
    return *this;
  }

 private:
  Baseline(double mean, double scale, ScaleKind kind, Kernel kernel, long bandwidth)
      : mean_(mean), scale_(scale), kind_(kind), kernel_(kernel), bandwidth_(bandwidth) {
    if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(mean)) {
      throw Error(Errc::DegenerateTraining, "baseline scale must be positive and finite");
    }
  }

  double mean_;
  double scale_;
  ScaleKind kind_;
  Kernel kernel_;
  long bandwidth_;
  bool fallback_used_ = false;
};

namespace detail {

inline void check_history(std::span<const double> history) {
  if (history.size() < 2) throw Error(Errc::TooShort, "training history needs at least 2 observations");
  for (double x : history) {
    if (!std::isfinite(x)) throw Error(Errc::InvalidArgument, "training history contains a non-finite value");
  }
  const bool constant =
      std::all_of(history.begin(), history.end(), [first = history.front()](double x) { return x == first; });
  if (constant) throw Error(Errc::DegenerateTraining, "training history is constant");
}

inline double sample_mean(std::span<const double> history) {
  return compensated_sum(history) / static_cast<double>(history.size());
}

// Lag-j autocovariance with divisor (m - j); j = 0 gives the plain variance
// with divisor m.
inline double autocovariance(std::span<const double> history, double mean, std::size_t lag) {
  CompensatedSum acc;
  const std::size_t m = history.size();
  for (std::size_t t = 0; t + lag < m; ++t) acc.add((history[t] - mean) * (history[t + lag] - mean));
  return acc.value() / static_cast<double>(m - lag);
}

}  // namespace detail

/// Plain estimates: sample mean and the population variance (divisor m).
inline Baseline estimate_baseline(std::span<const double> history) {
  detail::check_history(history);
  const double mean = detail::sample_mean(history);
  const double variance = detail::autocovariance(history, mean, 0);
  if (!(variance > 0.0)) throw Error(Errc::DegenerateTraining, "training variance is zero");
  return Baseline::plain(mean, std::sqrt(variance));
}

/// K(j/l). Truncated: 1 for |j| < l. Bartlett: 1 - |j|/l for |j| < l.
/// Parzen: 1 - 6x^2 + 6|x|^3 for |x| <= 1/2, 2(1 - |x|)^3 for |x| <= 1.
/// All three vanish outside their support.
inline double kernel_weight(Kernel kernel, long j, long l) {
  require(l >= 1, "kernel bandwidth must be >= 1");
  const long a = j < 0 ? -j : j;
  const double x = static_cast<double>(a) / static_cast<double>(l);
  switch (kernel) {
    case Kernel::Truncated:
      return a < l ? 1.0 : 0.0;
    case Kernel::Bartlett:
      return a < l ? 1.0 - x : 0.0;
    case Kernel::Parzen:
      if (x <= 0.5) return 1.0 - 6.0 * x * x + 6.0 * x * x * x;
      if (x <= 1.0) return 2.0 * (1.0 - x) * (1.0 - x) * (1.0 - x);
      return 0.0;
  }
  return 0.0;
}

/// Smallest l with l^3 >= m.
inline long default_bandwidth(long m) {
  long l = std::max(1L, static_cast<long>(std::floor(std::cbrt(static_cast<double>(m)))));
  while (l * l * l < m) ++l;
  while (l > 1 && (l - 1) * (l - 1) * (l - 1) >= m) --l;
  return l;
}

/// Kernel long-run variance estimate; bandwidth 0 selects default_bandwidth(m).
/// Throws NonPositiveLRV when the weighted autocovariance sum is <= 0.
inline Baseline estimate_lrv(std::span<const double> history, Kernel kernel, long bandwidth = 0) {
  detail::check_history(history);
  const long m = static_cast<long>(history.size());
  const long l = bandwidth == 0 ? std::min(default_bandwidth(m), m - 1) : bandwidth;
  require(l >= 1 && l <= m - 1, "LRV bandwidth must satisfy 1 <= l <= m - 1");

  const double mean = detail::sample_mean(history);
  double variance = detail::autocovariance(history, mean, 0);
  CompensatedSum tail;
  // Every supported kernel is zero for j > l.
  for (long j = 1; j <= std::min(m - 1, l); ++j) {
    const double k = kernel_weight(kernel, j, l);
    if (k != 0.0) tail.add(k * detail::autocovariance(history, mean, static_cast<std::size_t>(j)));
  }
  variance += 2.0 * tail.value();
  if (!(variance > 0.0)) throw Error(Errc::NonPositiveLRV, "kernel long-run variance is not positive");
  return Baseline::long_run(mean, std::sqrt(variance), kernel, l);
}

enum class LrvFallback { Error, UsePlain };

struct ScaleEstimator {
  ScaleKind kind = ScaleKind::Plain;
  Kernel kernel = Kernel::Bartlett;
  long bandwidth = 0;
  LrvFallback fallback = LrvFallback::Error;
};

inline Baseline estimate_scale(std::span<const double> history, const ScaleEstimator& estimator) {
  if (estimator.kind == ScaleKind::Plain) return estimate_baseline(history);
  try {
    return estimate_lrv(history, estimator.kernel, estimator.bandwidth);
  } catch (const Error& e) {
    if (e.code() != Errc::NonPositiveLRV || estimator.fallback != LrvFallback::UsePlain) throw;
    return estimate_baseline(history).mark_fallback();
  }
}

/// Boundary function rho(t) of the weight w(k, h) = rho(k/h) / sqrt(h).
/// Any continuous rho with a positive infimum is admissible.
class WeightFn {
 public:
  enum class Kind { Log, Constant, Custom };

  /// rho(t) = max(1, log(1 + t))^(-1/2)
  static WeightFn log_weight() { return WeightFn(Kind::Log, "log", nullptr); }
  /// rho(t) = 1
  static WeightFn constant() { return WeightFn(Kind::Constant, "constant", nullptr); }
  static WeightFn custom(std::function<double(double)> rho, std::string name = "custom") {
    require(static_cast<bool>(rho), "custom weight function is empty");
    require(rho(0.0) > 0.0, "custom weight function must be positive");
    return WeightFn(Kind::Custom, std::move(name), std::move(rho));
  }

  double rho(double t) const {
    switch (kind_) {
      case Kind::Log:
        return 1.0 / std::sqrt(std::max(1.0, std::log1p(t)));
      case Kind::Constant:
        return 1.0;
      case Kind::Custom:
        return custom_(t);
    }
    return 1.0;
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }

 private:
  WeightFn(Kind kind, std::string name, std::function<double(double)> custom)
      : kind_(kind), name_(std::move(name)), custom_(std::move(custom)) {}

  Kind kind_;
  std::string name_;
  std::function<double(double)> custom_;
};

inline double weight(const WeightFn& wf, long k, long h) {
  require(k >= 1 && h >= 1, "weight needs k >= 1 and h >= 1");
  return wf.rho(static_cast<double>(k) / static_cast<double>(h)) / std::sqrt(static_cast<double>(h));
}

/// Ring buffer of the last h centred observations with an O(1) running sum.
/// The running sum is recomputed exactly every kRebuildInterval pushes.
class LocalWindow {
 public:
  static constexpr long kRebuildInterval = 4096;

  explicit LocalWindow(long capacity) : buffer_(static_cast<std::size_t>(capacity > 0 ? capacity : 1)) {
    require(capacity >= 1, "window capacity must be >= 1");
  }

  void push(double centered) noexcept {
    const auto cap = buffer_.size();
    if (size_ == cap) {
      running_sum_ -= buffer_[head_];
    } else {
      ++size_;
    }
    buffer_[head_] = centered;
    running_sum_ += centered;
    head_ = head_ + 1 == cap ? 0 : head_ + 1;
    if (++since_rebuild_ >= kRebuildInterval) {
      running_sum_ = exact_sum();
      since_rebuild_ = 0;
    }
  }

  long capacity() const noexcept { return static_cast<long>(buffer_.size()); }
  long size() const noexcept { return static_cast<long>(size_); }
  bool full() const noexcept { return size_ == buffer_.size(); }
  double sum() const noexcept { return running_sum_; }

  double exact_sum() const noexcept {
    CompensatedSum acc;
    for_each([&](double v) { acc.add(v); });
    return acc.value();
  }

  /// Visits the contents from oldest to newest.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    const auto cap = buffer_.size();
    const std::size_t start = size_ == cap ? head_ : 0;
    for (std::size_t i = 0; i < size_; ++i) {
      std::size_t pos = start + i;
      if (pos >= cap) pos -= cap;
      fn(buffer_[pos]);
    }
  }

 private:
  std::vector<double> buffer_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  double running_sum_ = 0.0;
  long since_rebuild_ = 0;
};

/// |sum of centred window| / scale. Throws WindowNotFull until h values
/// have been pushed.
inline double local_statistic(const LocalWindow& window, const Baseline& baseline) {
  if (!window.full()) throw Error(Errc::WindowNotFull, "moving-sum window holds fewer than h observations");
  return std::fabs(window.sum()) / baseline.scale();
}

}  // namespace dmosum
