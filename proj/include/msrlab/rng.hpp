#pragma once

#include <cstdint>
#include <string_view>

namespace msrlab {

// SplitMix64 (Steele, Lea, Flood 2014). Small, portable and fully specified,
// so streams are identical on every platform.
class SplitMix64 {
 public:
  static constexpr std::string_view name = "splitmix64";
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t operator()() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }

  // Unbiased integer in [0, n), Lemire's multiply-and-reject method.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n == 0) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform double in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Independent stream for item `counter` of a seeded computation; the result
// does not depend on which thread or in which order items are drawn.
inline SplitMix64 stream_for(std::uint64_t seed, std::uint64_t counter) noexcept {
  SplitMix64 mix(seed ^ (counter * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  return SplitMix64(mix());
}

}  // namespace msrlab
