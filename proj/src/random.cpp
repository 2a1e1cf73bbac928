#include "netcoop/random.hpp"

#include <stdexcept>

namespace netcoop {

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) noexcept
{
  // FNV-1a over the label, then mixed with the master seed and the index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(master ^ h) + index);
}

RandomStream::RandomStream(std::uint64_t seed)
  : m_seed{seed}
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  m_engine.seed(seq);
}

std::uint64_t RandomStream::uniform_below(std::uint64_t bound)
{
  if (bound == 0) {
    throw std::invalid_argument("uniform_below: bound must be positive");
  }
  // Rejection sampling on the largest multiple of bound.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x = m_engine();
  while (x >= limit) {
    x = m_engine();
  }
  return x % bound;
}

RandomStream RandomStream::fork(std::string_view label, std::uint64_t index) const
{
  return RandomStream{derive_seed(m_seed, label, index)};
}

} // namespace netcoop
