#pragma once

#include <cstdint>

namespace manppa {

// Counter-based pseudo random generator. Draw k of a stream keyed by `seed`
// is the splitmix64 finalizer applied to seed + (k+1)·golden-ratio constant,
// so the sequence is a pure function of (seed, k): streams can be replayed,
// split per worker and reproduced across platforms without shared state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(seed) {}

  // Derives an independent stream (used to give grid jobs their own state).
  CounterRng derive(std::uint64_t salt) const;

  std::uint64_t next_u64();

  // Uniform on (0,1) with 53 random bits, never returning an exact 0 or 1.
  double next_unit();

  // Standard normal via the Box-Muller transform; each draw consumes two
  // uniform draws (the sine branch is discarded to keep draws stateless).
  double next_normal();

  // Uniform integer in {0, ..., n-1} by rejection from the top bits.
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline constexpr const char* kGeneratorName = "splitmix64-boxmuller";

}  // namespace manppa
