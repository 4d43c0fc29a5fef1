#include "fedprompt/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace fedprompt {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix_key(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t x = seed ^ (key + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  return splitmix64(x);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t SeededRng::next_u64() {
  // xoshiro256++
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

std::uint64_t SeededRng::uniform_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be >= 1");
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double SeededRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

SeededRng SeededRng::substream(std::string_view name) const {
  return SeededRng(mix_key(seed_, fnv1a64(name)));
}

SeededRng SeededRng::substream(std::string_view name, std::uint64_t a, std::uint64_t b) const {
  std::uint64_t k = mix_key(seed_, fnv1a64(name));
  k = mix_key(k, a);
  k = mix_key(k, b);
  return SeededRng(k);
}

Matrix gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double std_dev) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("gaussian_matrix: empty shape");
  if (std_dev < 0.0) throw std::invalid_argument("gaussian_matrix: negative std");
  Matrix m(rows, cols);
  for (double& x : m.data()) x = std_dev * rng.next_gaussian();
  return m;
}

std::vector<std::size_t> sample_without_replacement(SeededRng& rng, std::size_t population,
                                                    std::size_t k) {
  if (k > population) throw std::invalid_argument("sample larger than population");
  // Partial Fisher-Yates over a sparse index map.
  std::unordered_map<std::size_t, std::size_t> swapped;
  const auto value_at = [&](std::size_t i) {
    const auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(population - i));
    const std::size_t vi = value_at(i);
    const std::size_t vj = value_at(j);
    out.push_back(vj);
    swapped[j] = vi;
  }
  return out;
}

}  // namespace fedprompt
