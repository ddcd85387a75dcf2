#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Simulations must reproduce bit-for-bit across platforms and must support
// cheap, independent substreams indexed by (seed, stream). Standard library
// engines are portable but the <random> distributions are not specified
// bit-exactly, so both the generator and the distribution arithmetic live
// here. The generator passes the published Philox4x32-10 known-answer tests
// (see tests/test_rng.cpp).

#include <array>
#include <cstdint>
#include <vector>

namespace hlcm {

// Raw Philox4x32-10 block function: 128-bit counter + 64-bit key -> 128 bits.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// Stream-oriented wrapper. The 64-bit seed is the Philox key; the 64-bit
// stream id occupies the high counter words, so distinct streams of the same
// seed never overlap.
class PhiloxRng {
 public:
  explicit PhiloxRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); n >= 1. Unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n);
  // Bernoulli draw as 0/1.
  int bernoulli(double p);
  // Index draw from unnormalized non-negative weights.
  int categorical(const std::vector<double>& weights);
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;  // unread words remaining in buffer_
};

}  // namespace hlcm
