#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "netcoop/random.hpp"

namespace netcoop {

/// Raised when a configuration or argument violates a documented invariant.
class ValidationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a state enumeration would exceed its configured cap.
class EnumerationOverflow : public std::length_error
{
public:
  EnumerationOverflow(std::string what, double required, double allowed);

  double required() const noexcept { return m_required; }
  double allowed() const noexcept { return m_allowed; }

private:
  double m_required;
  double m_allowed;
};

/// Largest destination count for single-set enumeration (2^20 states).
inline constexpr unsigned max_enumerated_destinations = 20;

/// Link success probabilities and arrival rate of the one-source, one-relay,
/// n-destination multicast network.
struct NetworkConfig
{
  unsigned n = 0;
  std::vector<double> f_sd; ///< source -> destination i
  double f_sr = 0.0;        ///< source -> relay
  std::vector<double> f_rd; ///< relay -> destination i
  double lambda = 0.0;      ///< Bernoulli arrivals per slot

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  /// Same link qualities toward every destination.
  static NetworkConfig symmetric(unsigned n, double p, double f_sr, double pr, double lambda = 0.0);

  /// Product of f_sd over all destinations.
  double all_direct_success() const;

  /// Per-slot probability that the relay decodes while some destination misses.
  double relay_handoff_probability() const { return f_sr * (1.0 - all_direct_success()); }
};

/// SINR threshold model parameters; all strictly positive.
struct ChannelPhysics
{
  double beta = 1.0;
  double power = 1.0;
  double noise = 1.0;

  void validate() const;
};

/// Pr[|h|^2 P / N_o > beta] for unit-variance Rayleigh fading.
double success_probability_from_physics(const ChannelPhysics& phys);

/// Subset of destinations {0, .., n-1} stored as a bitmask.
class DestinationSet
{
public:
  using mask_type = std::uint32_t;

  constexpr DestinationSet() = default;
  DestinationSet(mask_type mask, unsigned n);

  static DestinationSet empty(unsigned n) { return DestinationSet{0, n}; }
  static DestinationSet full(unsigned n);

  constexpr mask_type mask() const noexcept { return m_mask; }
  constexpr unsigned universe() const noexcept { return m_n; }
  constexpr bool contains(unsigned i) const noexcept { return i < m_n && ((m_mask >> i) & 1u) != 0; }
  constexpr bool is_empty() const noexcept { return m_mask == 0; }
  int size() const noexcept { return std::popcount(m_mask); }

  DestinationSet complement() const;
  DestinationSet operator|(const DestinationSet& other) const;

  bool operator==(const DestinationSet&) const = default;

  /// Brace-delimited 1-based listing such as "{1,3}".
  std::string to_string() const;

private:
  mask_type m_mask = 0;
  unsigned m_n = 0;
};

/// All 2^n subsets in ascending mask order, from the empty set to the full set.
std::vector<DestinationSet> enumerate_states(unsigned n);

/// One Bernoulli draw of an erasure link.
inline bool sample_link(double prob, RandomStream& rng) { return rng.bernoulli(prob); }

} // namespace netcoop
