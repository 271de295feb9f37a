#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace fglab {

// Deterministic random stream. Two streams built from the same
// (seed, stream_id) produce identical sequences; nothing is shared between
// streams, so draw order across workers never matters.
//
// Only the engine's raw 64-bit output is consumed. Uniform, normal and
// integer draws are derived here rather than through <random> distributions,
// whose algorithms are implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
// FNV-1a of a stage name; stable across platforms.
std::uint64_t stream_tag(std::string_view name) noexcept;
// Order-sensitive combination of stream components, e.g.
// stream_key({stream_tag("train"), round, client_id}).
std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) noexcept;

}  // namespace fglab
