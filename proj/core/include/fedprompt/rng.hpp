#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fedprompt/matrix.hpp"

namespace fedprompt {

/// Deterministic random stream backed by xoshiro256++ seeded through
/// splitmix64. The same seed produces the same sequence on every platform:
/// no standard-library distribution objects are involved anywhere, uniform
/// doubles come from the top 53 bits, and gaussians use the Marsaglia polar
/// transform.
///
/// Substreams are keyed off the *constructing* seed plus a name and
/// optional integer keys, never off the evolving generator state, so draws
/// taken from one stream can never shift a sibling stream.
///
/// A stream is single-owner: do not draw from the same instance on two
/// threads.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Unbiased uniform in [0, n); n must be >= 1.
  std::uint64_t uniform_below(std::uint64_t n);
  /// Uniform in [0, 1), 53-bit resolution.
  double next_double();
  /// One draw from the standard normal distribution.
  double next_gaussian();

  SeededRng substream(std::string_view name) const;
  SeededRng substream(std::string_view name, std::uint64_t a, std::uint64_t b = 0) const;

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// rows x cols matrix with entries i.i.d. Normal(0, std_dev^2).
/// std_dev = 0 yields the zero matrix (draws are still consumed so stream
/// positions do not depend on the value of std_dev).
Matrix gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double std_dev);

/// k distinct indices in [0, population), uniform over k-subsets.
/// Throws std::invalid_argument("sample larger than population") when
/// k > population.
std::vector<std::size_t> sample_without_replacement(SeededRng& rng, std::size_t population,
                                                    std::size_t k);

}  // namespace fedprompt
