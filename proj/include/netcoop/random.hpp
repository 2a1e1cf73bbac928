#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace netcoop {

/// Mixes a 64-bit value (splitmix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a master seed, a stream label and an index.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0) noexcept;

/// Seeded pseudo-random stream with platform-independent output.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// does its own conversion to doubles and bounded integers so that results do
/// not depend on the standard library's distribution implementations.
/// A stream has a single owner; use fork() to hand streams to other tasks.
class RandomStream
{
public:
  explicit RandomStream(std::uint64_t seed);

  std::uint64_t next_u64() { return m_engine(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

  /// True with probability p; p = 0 never fires, p = 1 always fires.
  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// A new stream whose seed is derived from this stream's seed and a label.
  RandomStream fork(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t seed() const noexcept { return m_seed; }

private:
  std::uint64_t m_seed;
  std::mt19937_64 m_engine;
};

} // namespace netcoop
