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

// Counter-based random numbers. Every draw is a pure function of
// (seed, replication, stream, domain, index), so results never depend on
// how work is split across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

namespace dmosum {

/// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Purpose tag mixed into the counter so independent uses of one
/// (replication, stream) pair never share draws.
enum class Domain : std::uint32_t {
  Noise = 1,
  Shift = 2,
  Brownian = 3,
};

/// SplitMix64 finaliser; used to derive independent seeds for auxiliary
/// simulations (e.g. a recalibration run inside an experiment).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Maps a 32-bit word to the open interval (0, 1): (x + 1/2) / 2^32.
constexpr double open_unit(std::uint32_t x) noexcept { return (static_cast<double>(x) + 0.5) * 0x1.0p-32; }

/// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16),
/// relative accuracy about 1e-16 on (0, 1).
inline double normal_quantile(double p) noexcept {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
             4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
             2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
             4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
             5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                 7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

/// Standard normal draws for one substream. Block n of the Philox output
/// (four 32-bit words w0..w3) yields z[4n + j] = normal_quantile(open_unit(wj)).
class NormalStream {
 public:
  using Block = std::array<double, 4>;

  NormalStream(std::uint64_t seed, std::uint32_t replication, std::uint32_t stream, Domain domain) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replication_(replication),
        stream_(stream),
        domain_(static_cast<std::uint32_t>(domain)) {}

  Block block(std::uint32_t n) const noexcept {
    const auto w = Philox4x32::generate({n, stream_, replication_, domain_}, key_);
    return {normal_quantile(open_unit(w[0])), normal_quantile(open_unit(w[1])), normal_quantile(open_unit(w[2])),
            normal_quantile(open_unit(w[3]))};
  }

  /// Random access to draw `index`.
  double at(std::uint64_t index) const noexcept {
    const auto w = Philox4x32::generate({static_cast<std::uint32_t>(index >> 2), stream_, replication_, domain_}, key_);
    return normal_quantile(open_unit(w[index & 3u]));
  }

  /// Fills `out` with draws first, first+1, ...; identical to at().
  template <typename Span>
  void fill(std::uint64_t first, Span&& out) const noexcept {
    std::size_t i = 0;
    const std::size_t n = out.size();
    std::uint64_t index = first;
    for (; i < n && (index & 3u); ++i, ++index) out[i] = at(index);
    for (; i + 4 <= n; i += 4, index += 4) {
      const auto w = Philox4x32::generate({static_cast<std::uint32_t>(index >> 2), stream_, replication_, domain_}, key_);
      for (std::size_t j = 0; j < 4; ++j) out[i + j] = normal_quantile(open_unit(w[j]));
    }
    for (; i < n; ++i, ++index) out[i] = at(index);
  }

 private:
  Philox4x32::Key key_;
  std::uint32_t replication_;
  std::uint32_t stream_;
  std::uint32_t domain_;
};

/// Sequential reader over a NormalStream; buffers one block.
class NormalCursor {
 public:
  NormalCursor(NormalStream stream, std::uint64_t first = 0) noexcept : stream_(stream), index_(first) {}

  double next() noexcept {
    const auto blk = static_cast<std::uint32_t>(index_ >> 2);
    if (!loaded_ || blk != loaded_block_) {
      buffer_ = stream_.block(blk);
      loaded_block_ = blk;
      loaded_ = true;
    }
    return buffer_[index_++ & 3u];
  }

  std::uint64_t position() const noexcept { return index_; }

 private:
  NormalStream stream_;
  std::uint64_t index_;
  NormalStream::Block buffer_{};
  std::uint32_t loaded_block_ = 0;
  bool loaded_ = false;
};

}  // namespace dmosum
