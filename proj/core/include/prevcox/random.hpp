#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace prevcox {

// splitmix64 finalizer. Bijective on 64-bit words; used both as the
// generator step and as a stateless mixer for derived stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Converts a 64-bit word to a double strictly inside (0, 1). The +0.5
// offset keeps log() and quantile transforms away from the endpoints.
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Sequential stream (splitmix64). Cheap to seed, cheap to fork, and the
// output sequence is fully specified, so runs replay bit-for-bit.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on (0, 1), endpoints excluded.
  double uniform() { return to_unit_open(next_u64()); }

  double exponential() { return -std::log(1.0 - uniform()); }

  // Box-Muller; consumes two uniforms per call, nothing cached.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

private:
  std::uint64_t state_;
};

// Counter-addressed stream key. uniform_at(i, j) depends only on
// (key, i, j), so draws are independent of evaluation order and of how
// work is split across threads. child() derives statistically
// independent sub-keys for replications / replicates.
struct StreamKey {
  std::uint64_t value = 0;

  StreamKey child(std::uint64_t tag) const noexcept {
    return StreamKey{mix64(value ^ (kGolden + mix64(tag + kGolden)))};
  }

  double uniform_at(std::uint64_t i, std::uint64_t j) const noexcept {
    std::uint64_t h = mix64(value ^ (i + kGolden));
    h = mix64(h ^ (j + 0xd1b54a32d192ed03ULL));
    return to_unit_open(h);
  }

  RngStream stream() const noexcept { return RngStream(mix64(value ^ kGolden)); }
};

}  // namespace prevcox
