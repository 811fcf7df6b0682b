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

// Synthetic streams: N(0,1) or stationary AR(1) noise with an optional mean
// shift on the first p streams from time tau onward.
//
// Times are 1-based: column index c of a generated matrix holds time c + 1,
// and the shift is active for every time t >= tau. Noise draw t of stream i
// is NormalStream(seed, rep, i, Noise).at(t); draw 0 is reserved for the
// AR(1) starting value, so iid noise and AR(1) with phi = 0 coincide.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "dmosum/csv.hpp"
#include "dmosum/detection.hpp"
#include "dmosum/error.hpp"
#include "dmosum/matrix.hpp"
#include "dmosum/rng.hpp"

namespace dmosum {

enum class ShiftKind { None, Fixed, RandomGaussian };

struct Shift {
  ShiftKind kind = ShiftKind::None;
  double value = 0.0;  // delta for Fixed, eta for RandomGaussian

  static Shift none() { return {}; }
  static Shift fixed(double delta) { return {ShiftKind::Fixed, delta}; }
  static Shift random_gaussian(double eta) { return {ShiftKind::RandomGaussian, eta}; }
};

enum class NoiseKind { IIDNormal, AR1 };

struct Noise {
  NoiseKind kind = NoiseKind::IIDNormal;
  double phi = 0.0;

  static Noise iid() { return {}; }
  static Noise ar1(double phi) { return {NoiseKind::AR1, phi}; }
};

struct Scenario {
  long d = 1;
  long p = 0;  // affected streams: indices 0 .. p-1
  long tau = 0;
  Shift shift{};
  Noise noise{};
  long total_length = 0;  // T
  long m = 0;             // training length; alternatives need tau > m

  bool alternative() const noexcept { return shift.kind != ShiftKind::None; }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(Errc::InvalidScenario, what); };
    if (d < 1) fail("d must be >= 1");
    if (total_length < 1) fail("total length must be >= 1");
    if (noise.kind == NoiseKind::AR1 && !(std::fabs(noise.phi) < 1.0)) fail("AR(1) needs |phi| < 1");
    if (!alternative()) {
      if (p != 0) fail("p must be 0 when there is no shift");
      return;
    }
    if (p < 1 || p > d) fail("p must satisfy 1 <= p <= d under a shift");
    if (tau <= m) fail("changepoint tau must exceed the training length m");
    if (shift.kind == ShiftKind::RandomGaussian && !(shift.value >= 0.0)) fail("eta must be >= 0");
  }

  /// Same scenario without the change.
  Scenario null_counterpart() const {
    Scenario s = *this;
    s.p = 0;
    s.shift = Shift::none();
    return s;
  }
};

/// Realised shift sizes delta_i for one replication.
inline std::vector<double> realize_shifts(const Scenario& scenario, std::uint64_t seed, std::uint32_t replication) {
  std::vector<double> deltas(static_cast<std::size_t>(scenario.d), 0.0);
  for (long i = 0; i < scenario.p; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (scenario.shift.kind == ShiftKind::Fixed) {
      deltas[idx] = scenario.shift.value;
    } else if (scenario.shift.kind == ShiftKind::RandomGaussian) {
      const NormalStream draw(seed, replication, static_cast<std::uint32_t>(i), Domain::Shift);
      deltas[idx] = scenario.shift.value * draw.at(0);
    }
  }
  return deltas;
}

/// Column-at-a-time generator; memory is O(d).
class ScenarioStream {
 public:
  ScenarioStream(const Scenario& scenario, std::uint64_t seed, std::uint32_t replication = 0)
      : scenario_(validated(scenario)), deltas_(realize_shifts(scenario, seed, replication)) {
    cursors_.reserve(static_cast<std::size_t>(scenario_.d));
    state_.assign(static_cast<std::size_t>(scenario_.d), 0.0);
    const bool ar = scenario_.noise.kind == NoiseKind::AR1;
    const double phi = scenario_.noise.phi;
    for (long i = 0; i < scenario_.d; ++i) {
      const NormalStream noise(seed, replication, static_cast<std::uint32_t>(i), Domain::Noise);
      if (ar) state_[static_cast<std::size_t>(i)] = noise.at(0) / std::sqrt(1.0 - phi * phi);
      cursors_.emplace_back(noise, 1);
    }
  }

  const Scenario& scenario() const noexcept { return scenario_; }
  const std::vector<double>& deltas() const noexcept { return deltas_; }
  long position() const noexcept { return t_; }

  /// Writes the d observations of the next time step.
  bool next(std::span<double> column) {
    if (t_ >= scenario_.total_length) return false;
    ++t_;
    const bool shifted = scenario_.alternative() && t_ >= scenario_.tau;
    const bool ar = scenario_.noise.kind == NoiseKind::AR1;
    const double phi = scenario_.noise.phi;
    for (std::size_t i = 0; i < cursors_.size(); ++i) {
      const double v = cursors_[i].next();
      double eps = v;
      if (ar) {
        eps = phi * state_[i] + v;
        state_[i] = eps;
      }
      column[i] = (shifted && deltas_[i] != 0.0) ? deltas_[i] + eps : eps;
    }
    return true;
  }

 private:
  static const Scenario& validated(const Scenario& s) {
    s.validate();
    return s;
  }

  Scenario scenario_;
  std::vector<double> deltas_;
  std::vector<NormalCursor> cursors_;
  std::vector<double> state_;
  long t_ = 0;
};

class ScenarioRowSource final : public RowSource {
 public:
  ScenarioRowSource(const Scenario& scenario, std::uint64_t seed, std::uint32_t replication = 0)
      : stream_(scenario, seed, replication) {}

  bool next(std::vector<double>& row) override {
    row.resize(static_cast<std::size_t>(stream_.scenario().d));
    return stream_.next(row);
  }
  long row_index() const override { return stream_.position(); }

 private:
  ScenarioStream stream_;
};

struct GeneratedData {
  DataMatrix data;
  std::vector<double> deltas;
};

inline GeneratedData generate(const Scenario& scenario, std::uint64_t seed, std::uint32_t replication = 0) {
  ScenarioStream stream(scenario, seed, replication);
  DataMatrix data(scenario.d, scenario.total_length);
  std::vector<double> column(static_cast<std::size_t>(scenario.d));
  for (long t = 0; stream.next(column); ++t) {
    for (long i = 0; i < scenario.d; ++i) data(i, t) = column[static_cast<std::size_t>(i)];
  }
  return {std::move(data), stream.deltas()};
}

/// Sidecar describing the realised change: tau, then one delta per stream.
inline void write_shift_sidecar(std::ostream& out, const Scenario& scenario, std::span<const double> deltas) {
  out << "key,value\n";
  out << "tau," << (scenario.alternative() ? std::to_string(scenario.tau) : "") << '\n';
  for (std::size_t i = 0; i < deltas.size(); ++i) out << "delta_" << (i + 1) << ',' << format_double(deltas[i]) << '\n';
}

}  // namespace dmosum
