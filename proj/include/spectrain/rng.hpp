#pragma once

#include <cstdint>

namespace spectrain {

// splitmix64 finalizer; used to derive independent sub-stream seeds from a
// master seed so that campaign runs stay reproducible regardless of the
// order in which they execute.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream));
}

}  // namespace spectrain
