#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace prefplan {

// PCG32 (XSH-RR output on a 64-bit LCG state), as published by O'Neill.
// The standard library distributions are implementation-defined, so all
// sampling in this project goes through the helpers below to keep datasets
// reproducible across compilers and platforms.
class Pcg32 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kDefaultStream = 1442695040888963407ULL;

  explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL, std::uint64_t stream = 0xda3e39cb94b95bdbULL);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound); bound must be > 0. Unbiased (rejection).
  std::uint32_t bounded(std::uint32_t bound);
  std::uint64_t bounded64(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

// SplitMix64 finalizer; used to derive independent streams from a global
// seed and an entity id (example id, split index, ...).
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t id);
Pcg32 make_stream(std::uint64_t global_seed, std::uint64_t id);

template <typename T>
void shuffle(std::vector<T>& items, Pcg32& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bounded64(i));
    std::swap(items[i - 1], items[j]);
  }
}

// k distinct indices from [0, n), in draw order. Requires k <= n.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Pcg32& rng);

}  // namespace prefplan
