#include "hlcm/rng.hpp"

#include <cmath>

#include "hlcm/model.hpp"

namespace hlcm {

namespace {

constexpr std::uint32_t kMult0 = 0xD2511F53u;
constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& ctr, const std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMult0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMult1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> ctr = counter;
  std::array<std::uint32_t, 2> k = key;
  for (int r = 0; r < 10; ++r) {
    round_once(ctr, k);
    if (r < 9) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
  }
  return ctr;
}

PhiloxRng::PhiloxRng(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      buffer_{0, 0, 0, 0},
      buffered_(0) {}

void PhiloxRng::refill() {
  buffer_ = philox4x32(counter_, key_);
  buffered_ = 4;
  if (++counter_[0] == 0) ++counter_[1];  // 64-bit block index in the low words
}

std::uint32_t PhiloxRng::next_u32() {
  if (buffered_ == 0) refill();
  return buffer_[4 - buffered_--];
}

std::uint64_t PhiloxRng::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return lo | (hi << 32);
}

double PhiloxRng::uniform() {
  // 53 random bits scaled into [0,1); never returns 1.
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t PhiloxRng::uniform_int(std::uint64_t n) {
  if (n == 0) throw invalid_input("uniform_int: n must be positive");
  const std::uint64_t limit = n * (~std::uint64_t{0} / n);  // rejection bound, multiple of n
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

int PhiloxRng::bernoulli(double p) { return uniform() < p ? 1 : 0; }

int PhiloxRng::categorical(const std::vector<double>& weights) {
  if (weights.empty()) throw invalid_input("categorical: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw invalid_input("categorical: weights must be finite and non-negative");
    total += w;
  }
  if (total <= 0.0) throw invalid_input("categorical: weights must not all be zero");
  const double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  // Guard against accumulated rounding: fall back to the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return static_cast<int>(i);
  return static_cast<int>(weights.size()) - 1;
}

double PhiloxRng::uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

}  // namespace hlcm
