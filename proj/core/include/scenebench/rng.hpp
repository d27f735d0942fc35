#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace scenebench {

/// SplitMix64. Used instead of <random> distributions so that seeded question
/// choices and samples are byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept;
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Uniform double in [0, 1).
  double uniform() noexcept;

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by `rng`.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

std::uint64_t fnv1a64(std::string_view text) noexcept;

/// Mixes a run seed with a tag (e.g. sample id) and an index into a new seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) noexcept;

}  // namespace scenebench
