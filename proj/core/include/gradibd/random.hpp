#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace gradibd {

using Rng = std::mt19937_64;

/// Independent generator for a (seed, stream...) tuple, so per-patient and
/// per-fold streams do not depend on the order in which they are consumed.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Fisher-Yates with an explicit index draw; unlike std::shuffle the
/// permutation is fixed by the generator output alone.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::uint64_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace gradibd
