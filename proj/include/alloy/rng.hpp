#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is a pure function of
// (master_seed, stream_index, tag, ...). A realization never depends on how
// many draws other realizations made, so OpenMP workers can evaluate
// realizations in any order and still reproduce the serial result bit-for-bit.

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace alloy::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Maps 64 random bits to the open interval (0, 1) with 53-bit resolution.
constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Purpose tags keep independent uses of one (seed, stream) pair apart.
enum class Tag : std::uint64_t {
  Coupling = 0x11,
  Energy = 0x22,
  Conditional = 0x33,
  Block = 0x44,
  Synthetic = 0x55,
  Polynomial = 0x66,
};

/// Key for coupling variables: one uniform per lattice site.
inline std::uint64_t site_key(std::uint64_t master, std::uint64_t stream,
                              std::span<const int> site) noexcept {
  std::uint64_t h = mix(mix(master, static_cast<std::uint64_t>(Tag::Coupling)), stream);
  for (int c : site) h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
  return h;
}

inline double site_uniform(std::uint64_t master, std::uint64_t stream,
                           std::span<const int> site) noexcept {
  return to_unit_open(splitmix64(site_key(master, stream, site)));
}

/// xoshiro256++ seeded from a splitmix64 chain; models UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t master, std::uint64_t stream_index, Tag tag) noexcept {
    std::uint64_t s = mix(mix(master, static_cast<std::uint64_t>(tag)), stream_index);
    for (auto& w : state_) {
      s += 0x9e3779b97f4a7c15ULL;
      w = splitmix64(s);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() noexcept { return to_unit_open((*this)()); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace alloy::rng
