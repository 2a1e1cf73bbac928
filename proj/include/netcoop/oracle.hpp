#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "netcoop/galois.hpp"
#include "netcoop/model.hpp"

// Brute-force Monte Carlo estimators that sample the defining random variables
// directly. They share no code with the analytic module and draw from their
// own labelled random streams.
namespace netcoop::oracle {

struct OracleEstimate
{
  double mean = 0.0;
  double std_error = 0.0; ///< sample standard deviation / sqrt(trials)
  std::uint64_t trials = 0;

  /// |mean - value| <= sigmas * std_error, with zero-variance estimates
  /// required to match exactly up to `abs_slack`.
  bool covers(double value, double sigmas = 3.0, double abs_slack = 0.0) const;
};

/// Mean of max_i N_i, N_i geometric(probs[i]) counted in trials until success.
OracleEstimate mc_expected_max_geometric(std::span<const double> probs, std::uint64_t trials, std::uint64_t seed);

struct RelayStateEstimate
{
  /// Empirical frequency of each failed set, indexed by mask.
  std::vector<double> state_frequency;
  /// Relay slots until every destination of the failed set has the packet.
  OracleEstimate relay_service;
  std::uint64_t trials = 0;
};

/// Draws the slot at which the relay takeover event (probability
/// f_SR(1 - prod f_SD) per slot) first fires, records which destinations still
/// miss the packet after that many source slots, then transmits from the relay
/// slot by slot until they all have it.
RelayStateEstimate mc_relay_state_and_service(const NetworkConfig& cfg, std::uint64_t trials, std::uint64_t seed);

struct RankCompletionEstimate
{
  /// Empirical Pr[M = l] keyed by l.
  std::map<std::size_t, double> pmf;
  OracleEstimate mean;
  std::uint64_t trials = 0;
};

/// Absorbs uniformly random vectors of GF(q)^k until rank k, per trial.
RankCompletionEstimate mc_rank_completion(const galois::FieldSpec& spec, std::size_t k, std::uint64_t trials,
                                          std::uint64_t seed);

/// Slots for every receiver to collect M successes, M from a real rank process.
OracleEstimate mc_rlnc_generation_time(std::span<const double> probs, const galois::FieldSpec& spec, std::size_t k,
                                       std::uint64_t trials, std::uint64_t seed);

/// Relay slots to clear a generation of K packets whose failed sets are drawn
/// by the relay takeover process, the needed reception count coming from a
/// real rank process and every destination in the union of failed sets
/// waiting for that many relay receptions.
OracleEstimate mc_coded_relay_service(const NetworkConfig& cfg, const NcParams& nc, std::uint64_t trials,
                                      std::uint64_t seed);

} // namespace netcoop::oracle
