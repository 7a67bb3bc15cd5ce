#ifndef NTFK_RNG_HPP
#define NTFK_RNG_HPP

#include <cstdint>
#include <random>

namespace ntfk {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic seed derivation for ensemble members: every restart gets an
// independent stream that depends only on (master, streamA, streamB), never
// on scheduling.
inline std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t streamA,
                                std::uint64_t streamB) {
  return splitmix64(splitmix64(splitmix64(master) ^ streamA) ^ streamB);
}

// mt19937_64 is bit-exact per the standard; the uniform draw is hand-rolled
// because std::uniform_real_distribution is not portable across libraries.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : engine_(seed) {}

  // Uniform on (0, 1], never exactly zero.
  double uniform01() {
    const std::uint64_t bits = engine_() >> 11;  // 53 random bits
    return static_cast<double>(bits + 1) * 0x1.0p-53;
  }

  std::uint64_t nextU64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ntfk

#endif  // NTFK_RNG_HPP
