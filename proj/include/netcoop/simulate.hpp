#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "netcoop/galois.hpp"
#include "netcoop/model.hpp"

namespace netcoop::sim {

enum class Protocol
{
  prp,            ///< A: per-packet retransmission
  source_rlnc,    ///< B: RLNC over generations at the source
  cooperation,    ///< C: relay forwards in idle slots
  cooperation_nc, ///< D: relay forwards RLNC combinations in idle slots
};

/// How coded protocols decide that a receiver has decoded.
enum class Fidelity
{
  /// Draw the number of needed receptions M once per generation from the
  /// rank-completion distribution; every receiver waits for M receptions.
  formula_faithful,
  /// Transmit real GF(q) combinations and track each receiver's rank,
  /// seeding relay-side receivers with the packets they already hold.
  mechanistic,
};

std::string_view protocol_letter(Protocol p) noexcept;
std::string_view to_string(Fidelity f) noexcept;

struct ProtocolKind
{
  Protocol protocol = Protocol::prp;
  std::optional<NcParams> nc;
  Fidelity fidelity = Fidelity::formula_faithful;

  static ProtocolKind prp() { return {Protocol::prp, std::nullopt, Fidelity::formula_faithful}; }
  static ProtocolKind cooperation() { return {Protocol::cooperation, std::nullopt, Fidelity::formula_faithful}; }
  static ProtocolKind source_rlnc(NcParams nc, Fidelity f = Fidelity::formula_faithful)
  {
    return {Protocol::source_rlnc, nc, f};
  }
  static ProtocolKind cooperation_nc(NcParams nc, Fidelity f = Fidelity::formula_faithful)
  {
    return {Protocol::cooperation_nc, nc, f};
  }

  bool is_coded() const noexcept
  {
    return protocol == Protocol::source_rlnc || protocol == Protocol::cooperation_nc;
  }
  bool uses_relay() const noexcept
  {
    return protocol == Protocol::cooperation || protocol == Protocol::cooperation_nc;
  }
  /// NcParams must be present exactly for the coded protocols.
  void validate() const;
};

/// Welford accumulator.
class RunningStat
{
public:
  void add(double x) noexcept
  {
    ++m_count;
    const double delta = x - m_mean;
    m_mean += delta / static_cast<double>(m_count);
    m_m2 += delta * (x - m_mean);
  }

  std::uint64_t count() const noexcept { return m_count; }
  double mean() const noexcept { return m_mean; }
  double variance() const noexcept { return m_count > 1 ? m_m2 / static_cast<double>(m_count - 1) : 0.0; }
  double std_error() const noexcept { return m_count > 0 ? std::sqrt(variance() / static_cast<double>(m_count)) : 0.0; }

  bool operator==(const RunningStat&) const = default;

private:
  std::uint64_t m_count = 0;
  double m_mean = 0.0;
  double m_m2 = 0.0;
};

struct TraceSample
{
  std::uint64_t slot = 0; ///< 1-based index of the slot just completed
  std::uint64_t source_len = 0;
  std::uint64_t relay_len = 0;
  std::uint64_t arrivals = 0;
  std::uint64_t delivered = 0;

  bool operator==(const TraceSample&) const = default;
};

struct SimReport
{
  std::uint64_t seed = 0;
  std::uint64_t slots_run = 0;
  std::uint64_t arrivals = 0;
  std::uint64_t packets_delivered = 0;
  std::uint64_t source_len = 0; ///< at the end of the run
  std::uint64_t relay_len = 0;  ///< at the end of the run, including a generation in service

  std::vector<TraceSample> trace;

  /// Least-squares slope of each queue length over the trailing half of the run.
  double source_drift = 0.0;
  double relay_drift = 0.0;

  std::uint64_t source_busy_slots = 0;
  std::uint64_t relay_busy_slots = 0;
  /// Packets the source released because the relay decoded them while some
  /// destination still missed them.
  std::uint64_t relay_handoffs = 0;

  /// Slots from first transmission to release, per packet (A, C, D) or generation (B).
  RunningStat source_service;
  /// Relay transmissions spent per packet (C) or generation (D).
  RunningStat relay_service;

  bool unstable(double drift_threshold) const
  {
    return source_drift > drift_threshold || relay_drift > drift_threshold;
  }

  bool operator==(const SimReport&) const = default;
};

struct RunOptions
{
  /// Keep the source backlogged: a packet is injected whenever it would go idle.
  bool saturated_source = false;
  /// Trace decimation keeps every ceil(slots / max_trace_samples)-th slot.
  std::uint64_t max_trace_samples = 10'000;
};

/// Runs the slotted protocol for `slots` slots. Deterministic in (cfg, proto, lambda, slots, seed, options).
SimReport run(const NetworkConfig& cfg, const ProtocolKind& proto, double lambda, std::uint64_t slots,
              std::uint64_t seed, const RunOptions& options = {});

struct BisectionOptions
{
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t slots = 1'000'000;
  unsigned seeds = 5;
  double resolution = 0.005;
  /// A run is unstable when a queue's drift exceeds drift_factor / slots.
  double drift_factor = 10.0;
  /// Each retry doubles the slots per probe.
  unsigned max_retries = 2;
  std::uint64_t seed = 1;
  /// Thread count for the per-probe seeds; 0 selects default_worker_count().
  unsigned workers = 0;

  void validate() const;
};

struct Probe
{
  double lambda = 0.0;
  unsigned unstable_votes = 0;
  unsigned seeds = 0;
  bool unstable = false;
  bool verification = false;
};

struct LambdaEstimate
{
  double lambda_max = 0.0;
  double half_width = 0.0;
  unsigned retries = 0;
  std::uint64_t slots_per_probe = 0;
  std::vector<Probe> probes;

  double lower() const { return lambda_max - half_width; }
  double upper() const { return lambda_max + half_width; }
};

/// Raised when the stability verdicts stay inconsistent after all retries.
class BisectionFailure : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Majority vote of the drift test over opts.seeds independent runs at lambda.
Probe probe_stability(const NetworkConfig& cfg, const ProtocolKind& proto, double lambda, const BisectionOptions& opts,
                      std::uint64_t seed_base);

/// Bisects lambda on the stability verdict, then re-checks both sides of the
/// final bracket with fresh seeds.
LambdaEstimate find_lambda_max(const NetworkConfig& cfg, const ProtocolKind& proto, const BisectionOptions& opts = {});

} // namespace netcoop::sim
