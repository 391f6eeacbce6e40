#include "prefplan/rng.hpp"

#include <cassert>
#include <numeric>
#include <unordered_set>

namespace prefplan {

Pcg32::Pcg32(std::uint64_t seed, std::uint64_t stream) {
  inc_ = (stream << 1U) | 1U;
  next_u32();
  state_ += seed;
  next_u32();
}

std::uint32_t Pcg32::next_u32() {
  const std::uint64_t old = state_;
  state_ = old * kMultiplier + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
  const auto rot = static_cast<std::uint32_t>(old >> 59U);
  return (xorshifted >> rot) | (xorshifted << ((32U - rot) & 31U));
}

std::uint64_t Pcg32::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32U) | next_u32();
}

double Pcg32::uniform() {
  return static_cast<double>(next_u64() >> 11U) * 0x1.0p-53;
}

std::uint32_t Pcg32::bounded(std::uint32_t bound) {
  assert(bound > 0);
  const std::uint32_t threshold = (0U - bound) % bound;
  for (;;) {
    const std::uint32_t r = next_u32();
    if (r >= threshold) return r % bound;
  }
}

std::uint64_t Pcg32::bounded64(std::uint64_t bound) {
  assert(bound > 0);
  if (bound <= 0xffffffffULL) return bounded(static_cast<std::uint32_t>(bound));
  const std::uint64_t threshold = (0ULL - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t id) {
  return splitmix64(splitmix64(global_seed) ^ (id * 0xd1342543de82ef95ULL + 1));
}

Pcg32 make_stream(std::uint64_t global_seed, std::uint64_t id) {
  const std::uint64_t s = derive_seed(global_seed, id);
  return Pcg32(s, splitmix64(s));
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Pcg32& rng) {
  assert(k <= n);
  std::vector<std::size_t> out;
  out.reserve(k);
  if (k * 4 >= n) {
    // Partial Fisher-Yates over the full index range.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.bounded64(n - i));
      std::swap(idx[i], idx[j]);
      out.push_back(idx[i]);
    }
    return out;
  }
  std::unordered_set<std::size_t> seen;
  while (out.size() < k) {
    const auto j = static_cast<std::size_t>(rng.bounded64(n));
    if (seen.insert(j).second) out.push_back(j);
  }
  return out;
}

}  // namespace prefplan
