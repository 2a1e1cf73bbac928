#include "netcoop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace netcoop::oracle {

namespace {

using Mask = DestinationSet::mask_type;

class Accumulator
{
public:
  void add(double x)
  {
    ++m_n;
    const double d = x - m_mean;
    m_mean += d / static_cast<double>(m_n);
    m_m2 += d * (x - m_mean);
  }

  OracleEstimate estimate() const
  {
    OracleEstimate e;
    e.trials = m_n;
    e.mean = m_mean;
    if (m_n > 1) {
      e.std_error = std::sqrt(m_m2 / static_cast<double>(m_n - 1) / static_cast<double>(m_n));
    }
    return e;
  }

private:
  std::uint64_t m_n = 0;
  double m_mean = 0.0;
  double m_m2 = 0.0;
};

void require_trials(std::uint64_t trials)
{
  if (trials < 1) {
    throw ValidationError("oracle needs at least one trial");
  }
}

void require_positive(std::span<const double> probs, const char* what)
{
  for (const double p : probs) {
    if (!(p > 0.0)) {
      throw std::domain_error(std::string{what} + ": a zero success probability never completes");
    }
  }
}

/// Failed set at the relay takeover. The takeover slot m is geometric(a),
/// drawn by inversion so that near-certain direct links stay cheap; a
/// destination still misses the packet after m slots with probability
/// (1 - f_SD)^m.
Mask sample_takeover_state(const NetworkConfig& cfg, double a, RandomStream& rng)
{
  double m = 1.0;
  if (a < 1.0) {
    const double u = 1.0 - rng.uniform(); // (0, 1]
    m = std::max(1.0, std::ceil(std::log(u) / std::log1p(-a)));
  }
  Mask failed = 0;
  for (unsigned i = 0; i < cfg.n; ++i) {
    if (rng.bernoulli(std::pow(1.0 - cfg.f_sd[i], m))) {
      failed |= Mask{1} << i;
    }
  }
  return failed;
}

std::size_t sample_rank_completion(const galois::GaloisField& field, std::size_t k, RandomStream& rng)
{
  galois::DecoderState decoder{field, 0, k};
  std::vector<galois::Element> v(k);
  std::size_t draws = 0;
  while (!decoder.complete()) {
    for (auto& c : v) {
      c = static_cast<galois::Element>(rng.uniform_below(field.order()));
    }
    decoder.absorb(v);
    ++draws;
  }
  return draws;
}

/// Slots until every receiver in `probs` has `needed` successes.
std::uint64_t slots_to_collect(std::span<const double> probs, std::size_t needed, RandomStream& rng)
{
  std::uint64_t worst = 0;
  for (const double p : probs) {
    std::uint64_t slots = 0;
    for (std::size_t got = 0; got < needed;) {
      ++slots;
      if (rng.bernoulli(p)) {
        ++got;
      }
    }
    worst = std::max(worst, slots);
  }
  return worst;
}

} // namespace

bool OracleEstimate::covers(double value, double sigmas, double abs_slack) const
{
  return std::abs(mean - value) <= sigmas * std_error + abs_slack;
}

OracleEstimate mc_expected_max_geometric(std::span<const double> probs, std::uint64_t trials, std::uint64_t seed)
{
  require_trials(trials);
  for (const double p : probs) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw ValidationError("geometric oracle needs probabilities in (0, 1]");
    }
  }
  RandomStream rng{derive_seed(seed, "oracle.max_geometric")};
  Accumulator acc;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::uint64_t worst = 0;
    for (const double p : probs) {
      std::uint64_t n = 1;
      while (!rng.bernoulli(p)) {
        ++n;
      }
      worst = std::max(worst, n);
    }
    acc.add(static_cast<double>(worst));
  }
  return acc.estimate();
}

RelayStateEstimate mc_relay_state_and_service(const NetworkConfig& cfg, std::uint64_t trials, std::uint64_t seed)
{
  cfg.validate();
  require_trials(trials);
  const double a = cfg.relay_handoff_probability();
  if (!(a > 0.0)) {
    throw std::domain_error("relay takeover probability is zero");
  }
  require_positive(cfg.f_rd, "relay oracle");
  RandomStream rng{derive_seed(seed, "oracle.relay_state")};
  std::vector<std::uint64_t> counts(std::size_t{1} << cfg.n, 0);
  Accumulator service;
  for (std::uint64_t t = 0; t < trials; ++t) {
    Mask failed = sample_takeover_state(cfg, a, rng);
    ++counts[failed];
    std::uint64_t slots = 0;
    while (failed != 0) {
      ++slots;
      for (unsigned i = 0; i < cfg.n; ++i) {
        const Mask bit = Mask{1} << i;
        if ((failed & bit) && rng.bernoulli(cfg.f_rd[i])) {
          failed &= ~bit;
        }
      }
    }
    service.add(static_cast<double>(slots));
  }
  RelayStateEstimate out;
  out.trials = trials;
  out.relay_service = service.estimate();
  out.state_frequency.resize(counts.size());
  for (std::size_t m = 0; m < counts.size(); ++m) {
    out.state_frequency[m] = static_cast<double>(counts[m]) / static_cast<double>(trials);
  }
  return out;
}

RankCompletionEstimate mc_rank_completion(const galois::FieldSpec& spec, std::size_t k, std::uint64_t trials,
                                          std::uint64_t seed)
{
  require_trials(trials);
  const galois::GaloisField field{spec};
  RandomStream rng{derive_seed(seed, "oracle.rank_completion")};
  std::map<std::size_t, std::uint64_t> counts;
  Accumulator mean;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto l = sample_rank_completion(field, k, rng);
    ++counts[l];
    mean.add(static_cast<double>(l));
  }
  RankCompletionEstimate out;
  out.trials = trials;
  out.mean = mean.estimate();
  for (const auto& [l, c] : counts) {
    out.pmf[l] = static_cast<double>(c) / static_cast<double>(trials);
  }
  return out;
}

OracleEstimate mc_rlnc_generation_time(std::span<const double> probs, const galois::FieldSpec& spec, std::size_t k,
                                       std::uint64_t trials, std::uint64_t seed)
{
  require_trials(trials);
  require_positive(probs, "generation oracle");
  const galois::GaloisField field{spec};
  RandomStream rng{derive_seed(seed, "oracle.rlnc_generation")};
  Accumulator acc;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto needed = sample_rank_completion(field, k, rng);
    acc.add(static_cast<double>(slots_to_collect(probs, needed, rng)));
  }
  return acc.estimate();
}

OracleEstimate mc_coded_relay_service(const NetworkConfig& cfg, const NcParams& nc, std::uint64_t trials,
                                      std::uint64_t seed)
{
  cfg.validate();
  require_trials(trials);
  const double a = cfg.relay_handoff_probability();
  if (!(a > 0.0)) {
    throw std::domain_error("relay takeover probability is zero");
  }
  require_positive(cfg.f_rd, "coded relay oracle");
  const galois::GaloisField field{nc.field()};
  RandomStream rng{derive_seed(seed, "oracle.coded_relay")};
  Accumulator acc;
  std::vector<double> pending;
  for (std::uint64_t t = 0; t < trials; ++t) {
    Mask uni = 0;
    for (std::size_t j = 0; j < nc.k; ++j) {
      uni |= sample_takeover_state(cfg, a, rng);
    }
    if (uni == 0) {
      acc.add(0.0);
      continue;
    }
    pending.clear();
    for (unsigned i = 0; i < cfg.n; ++i) {
      if ((uni >> i) & 1u) {
        pending.push_back(cfg.f_rd[i]);
      }
    }
    const auto needed = sample_rank_completion(field, nc.k, rng);
    acc.add(static_cast<double>(slots_to_collect(pending, needed, rng)));
  }
  return acc.estimate();
}

} // namespace netcoop::oracle
