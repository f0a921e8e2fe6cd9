#pragma once

#include <cstdint>

#include "cliquemr/types.hpp"

namespace cliquemr {

/// SplitMix64. Small, splittable and bit-reproducible across platforms, which
/// matters because both engines must replay identical randomness.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, bound). bound must be positive.
  std::uint64_t uniform(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t x) {
  SplitMix64 g(x);
  return g.next();
}

/// Per-node, per-round stream. Derived only from (seed, node, round) so a
/// reducer can re-create exactly what the clique engine handed the node.
inline SplitMix64 node_stream(std::uint64_t seed, NodeId node, Round round) {
  std::uint64_t s = mix64(seed ^ 0x6A09E667F3BCC909ULL);
  s = mix64(s ^ (static_cast<std::uint64_t>(node) * 0xD1B54A32D192ED03ULL));
  s = mix64(s ^ (static_cast<std::uint64_t>(round) * 0x8CB92BA72F3D8DD7ULL));
  return SplitMix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return mix64(mix64(seed) ^ mix64(tag + 0x243F6A8885A308D3ULL));
}

}  // namespace cliquemr
