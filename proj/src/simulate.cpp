#include "netcoop/simulate.hpp"

#include <bit>
#include <deque>
#include <memory>
#include <sstream>
#include <string>

#include "netcoop/parallel.hpp"

namespace netcoop::sim {

namespace {

using Mask = DestinationSet::mask_type;

/// Online least-squares slope over a known window of slot indices.
class DriftAccumulator
{
public:
  DriftAccumulator(std::uint64_t slots)
    : m_start{slots / 2}
    , m_center{static_cast<double>(m_start) + static_cast<double>(slots - m_start - 1) / 2.0}
  {}

  void add(std::uint64_t slot, double value)
  {
    if (slot < m_start) {
      return;
    }
    const double t = static_cast<double>(slot) - m_center;
    m_stt += t * t;
    m_sty += t * value;
  }

  double slope() const { return m_stt > 0.0 ? m_sty / m_stt : 0.0; }

private:
  std::uint64_t m_start;
  double m_center;
  double m_stt = 0.0;
  double m_sty = 0.0;
};

/// Receivers of one coded generation, in either fidelity mode.
class GenerationReceivers
{
public:
  GenerationReceivers(const galois::GaloisField* field, const galois::RankCompletionSampler* sampler, std::size_t k)
    : m_field{field}
    , m_sampler{sampler}
    , m_k{k}
  {}

  /// `pending` lists receivers that must decode; `known[j]` the receivers
  /// already holding packet j (used only in mechanistic mode).
  void start(Mask pending, std::span<const Mask> known, unsigned n, RandomStream& coding, std::uint64_t gen_id)
  {
    m_pending = pending;
    m_done = 0;
    m_gen.id = gen_id;
    m_gen.payload_ids.resize(m_k);
    for (std::size_t j = 0; j < m_k; ++j) {
      m_gen.payload_ids[j] = j;
    }
    if (m_field == nullptr) {
      m_needed = (*m_sampler)(coding);
      m_counts.assign(n, 0);
      return;
    }
    m_decoders.clear();
    m_decoders.reserve(n);
    for (unsigned i = 0; i < n; ++i) {
      m_decoders.emplace_back(*m_field, gen_id, m_k);
      if ((pending >> i) & 1u) {
        for (std::size_t j = 0; j < known.size(); ++j) {
          if ((known[j] >> i) & 1u) {
            m_decoders.back().add_known_packet(j);
          }
        }
      }
    }
  }

  /// One broadcast slot; returns true once every pending receiver has decoded.
  bool transmit(std::span<const double> success, RandomStream& channel, RandomStream& coding)
  {
    std::optional<galois::CodedPacket> pkt;
    if (m_field != nullptr) {
      pkt = galois::encode(*m_field, m_gen, coding);
    }
    const Mask waiting = m_pending & ~m_done;
    for (unsigned i = 0; i < success.size(); ++i) {
      if (!((waiting >> i) & 1u) || !sample_link(success[i], channel)) {
        continue;
      }
      bool decoded = false;
      if (pkt) {
        m_decoders[i].absorb(*pkt);
        decoded = m_decoders[i].complete();
      } else {
        decoded = ++m_counts[i] >= m_needed;
      }
      if (decoded) {
        m_done |= Mask{1} << i;
      }
    }
    return (m_pending & ~m_done) == 0;
  }

private:
  const galois::GaloisField* m_field;
  const galois::RankCompletionSampler* m_sampler;
  std::size_t m_k;
  galois::Generation m_gen;
  Mask m_pending = 0;
  Mask m_done = 0;
  std::size_t m_needed = 0;
  std::vector<std::size_t> m_counts;
  std::vector<galois::DecoderState> m_decoders;
};

class Simulator
{
public:
  Simulator(const NetworkConfig& cfg, const ProtocolKind& proto, double lambda, std::uint64_t slots,
            std::uint64_t seed, const RunOptions& options)
    : m_cfg{cfg}
    , m_proto{proto}
    , m_lambda{lambda}
    , m_slots{slots}
    , m_options{options}
    , m_full{DestinationSet::full(cfg.n).mask()}
    , m_arrival_rng{derive_seed(seed, "sim.arrivals")}
    , m_channel_rng{derive_seed(seed, "sim.channel")}
    , m_coding_rng{derive_seed(seed, "sim.coding")}
    , m_source_drift{slots}
    , m_relay_drift{slots}
  {
    m_report.seed = seed;
    if (proto.is_coded()) {
      const auto spec = proto.nc->field();
      m_k = proto.nc->k;
      if (proto.fidelity == Fidelity::mechanistic) {
        m_field = std::make_unique<galois::GaloisField>(spec);
      } else {
        m_sampler = std::make_unique<galois::RankCompletionSampler>(spec, m_k);
      }
      m_receivers = std::make_unique<GenerationReceivers>(m_field.get(), m_sampler.get(), m_k);
    }
    const std::uint64_t samples = std::max<std::uint64_t>(1, options.max_trace_samples);
    m_stride = std::max<std::uint64_t>(1, (slots + samples - 1) / samples);
  }

  SimReport run()
  {
    for (std::uint64_t slot = 0; slot < m_slots; ++slot) {
      step(slot);
    }
    m_report.slots_run = m_slots;
    m_report.source_len = m_source_len;
    m_report.relay_len = m_relay_len;
    m_report.source_drift = m_source_drift.slope();
    m_report.relay_drift = m_relay_drift.slope();
    return std::move(m_report);
  }

private:
  void step(std::uint64_t slot)
  {
    if (m_options.saturated_source) {
      const std::uint64_t backlog = m_proto.protocol == Protocol::source_rlnc ? m_k : 1;
      while (m_source_len < backlog) {
        ++m_source_len;
        ++m_report.arrivals;
      }
    }

    if (source_ready()) {
      ++m_report.source_busy_slots;
      switch (m_proto.protocol) {
        case Protocol::prp:
          source_step_prp();
          break;
        case Protocol::source_rlnc:
          source_step_rlnc();
          break;
        case Protocol::cooperation:
        case Protocol::cooperation_nc:
          source_step_coop();
          break;
      }
    } else if (m_proto.protocol == Protocol::cooperation) {
      relay_step_plain();
    } else if (m_proto.protocol == Protocol::cooperation_nc) {
      relay_step_coded();
    }

    // Arrivals land at the end of the slot and are servable from the next one.
    if (!m_options.saturated_source && m_arrival_rng.bernoulli(m_lambda)) {
      ++m_source_len;
      ++m_report.arrivals;
    }

    m_source_drift.add(slot, static_cast<double>(m_source_len));
    m_relay_drift.add(slot, static_cast<double>(m_relay_len));
    if ((slot + 1) % m_stride == 0 || slot + 1 == m_slots) {
      m_report.trace.push_back(
        {slot + 1, m_source_len, m_relay_len, m_report.arrivals, m_report.packets_delivered});
    }
  }

  bool source_ready() const
  {
    if (m_proto.protocol == Protocol::source_rlnc) {
      return m_source_gen_active || m_source_len >= m_k;
    }
    return m_source_len > 0;
  }

  void receive_direct()
  {
    for (unsigned i = 0; i < m_cfg.n; ++i) {
      const Mask bit = Mask{1} << i;
      if (!(m_head & bit) && sample_link(m_cfg.f_sd[i], m_channel_rng)) {
        m_head |= bit;
      }
    }
  }

  void release_head()
  {
    --m_source_len;
    m_report.source_service.add(static_cast<double>(m_head_age));
    m_head = 0;
    m_head_age = 0;
  }

  void source_step_prp()
  {
    ++m_head_age;
    receive_direct();
    if (m_head == m_full) {
      ++m_report.packets_delivered;
      release_head();
    }
  }

  void source_step_coop()
  {
    ++m_head_age;
    const bool relay_got = sample_link(m_cfg.f_sr, m_channel_rng);
    receive_direct();
    if (m_head == m_full) {
      // Also covers the relay decoding in the same slot: nothing is left to forward.
      ++m_report.packets_delivered;
      release_head();
    } else if (relay_got) {
      m_relay_queue.push_back(m_full & ~m_head);
      ++m_relay_len;
      ++m_report.relay_handoffs;
      release_head();
    }
  }

  void source_step_rlnc()
  {
    if (!m_source_gen_active) {
      m_receivers->start(m_full, {}, m_cfg.n, m_coding_rng, m_next_generation++);
      m_source_gen_active = true;
      m_head_age = 0;
    }
    ++m_head_age;
    if (m_receivers->transmit(m_cfg.f_sd, m_channel_rng, m_coding_rng)) {
      m_source_len -= m_k;
      m_report.packets_delivered += m_k;
      m_report.source_service.add(static_cast<double>(m_head_age));
      m_source_gen_active = false;
    }
  }

  void relay_step_plain()
  {
    if (m_relay_queue.empty()) {
      return;
    }
    ++m_report.relay_busy_slots;
    ++m_relay_age;
    Mask& residual = m_relay_queue.front();
    for (unsigned i = 0; i < m_cfg.n; ++i) {
      const Mask bit = Mask{1} << i;
      if ((residual & bit) && sample_link(m_cfg.f_rd[i], m_channel_rng)) {
        residual &= ~bit;
      }
    }
    if (residual == 0) {
      m_relay_queue.pop_front();
      --m_relay_len;
      ++m_report.packets_delivered;
      m_report.relay_service.add(static_cast<double>(m_relay_age));
      m_relay_age = 0;
    }
  }

  /// Forms the next full generation; generations nobody needs are released at once.
  bool start_relay_generation()
  {
    while (m_relay_queue.size() >= m_k) {
      std::vector<Mask> failed(m_relay_queue.begin(), m_relay_queue.begin() + static_cast<std::ptrdiff_t>(m_k));
      m_relay_queue.erase(m_relay_queue.begin(), m_relay_queue.begin() + static_cast<std::ptrdiff_t>(m_k));
      Mask pending = 0;
      for (const Mask f : failed) {
        pending |= f;
      }
      if (pending == 0) {
        m_relay_len -= m_k;
        m_report.packets_delivered += m_k;
        m_report.relay_service.add(0.0);
        continue;
      }
      std::vector<Mask> known(failed.size());
      for (std::size_t j = 0; j < failed.size(); ++j) {
        known[j] = m_full & ~failed[j];
      }
      m_receivers->start(pending, known, m_cfg.n, m_coding_rng, m_next_generation++);
      m_relay_gen_active = true;
      m_relay_age = 0;
      return true;
    }
    return false;
  }

  void relay_step_coded()
  {
    if (!m_relay_gen_active && !start_relay_generation()) {
      return;
    }
    ++m_report.relay_busy_slots;
    ++m_relay_age;
    if (m_receivers->transmit(m_cfg.f_rd, m_channel_rng, m_coding_rng)) {
      m_relay_len -= m_k;
      m_report.packets_delivered += m_k;
      m_report.relay_service.add(static_cast<double>(m_relay_age));
      m_relay_gen_active = false;
      m_relay_age = 0;
    }
  }

  const NetworkConfig& m_cfg;
  const ProtocolKind& m_proto;
  double m_lambda;
  std::uint64_t m_slots;
  RunOptions m_options;
  Mask m_full;

  RandomStream m_arrival_rng;
  RandomStream m_channel_rng;
  RandomStream m_coding_rng;

  std::size_t m_k = 1;
  std::unique_ptr<galois::GaloisField> m_field;
  std::unique_ptr<galois::RankCompletionSampler> m_sampler;
  std::unique_ptr<GenerationReceivers> m_receivers;
  std::uint64_t m_next_generation = 0;

  std::uint64_t m_source_len = 0;
  Mask m_head = 0; // destinations holding the head packet
  std::uint64_t m_head_age = 0;
  bool m_source_gen_active = false;

  std::deque<Mask> m_relay_queue; // residual failed sets, waiting packets only
  std::uint64_t m_relay_len = 0;
  std::uint64_t m_relay_age = 0;
  bool m_relay_gen_active = false;

  DriftAccumulator m_source_drift;
  DriftAccumulator m_relay_drift;
  std::uint64_t m_stride = 1;
  SimReport m_report;
};

} // namespace

std::string_view protocol_letter(Protocol p) noexcept
{
  switch (p) {
    case Protocol::prp:
      return "A";
    case Protocol::source_rlnc:
      return "B";
    case Protocol::cooperation:
      return "C";
    case Protocol::cooperation_nc:
      return "D";
  }
  return "?";
}

std::string_view to_string(Fidelity f) noexcept
{
  return f == Fidelity::mechanistic ? "mechanistic" : "faithful";
}

void ProtocolKind::validate() const
{
  if (is_coded() != nc.has_value()) {
    throw ValidationError(is_coded() ? "coded protocol requires q and K" : "uncoded protocol takes no q or K");
  }
  if (nc) {
    nc->validate();
  }
}

SimReport run(const NetworkConfig& cfg, const ProtocolKind& proto, double lambda, std::uint64_t slots,
              std::uint64_t seed, const RunOptions& options)
{
  cfg.validate();
  proto.validate();
  if (slots < 1) {
    throw ValidationError("slots must be at least 1");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("lambda must lie in [0, 1]");
  }
  return Simulator{cfg, proto, lambda, slots, seed, options}.run();
}

void BisectionOptions::validate() const
{
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) {
    throw ValidationError("bisection bounds must satisfy 0 <= lo < hi <= 1");
  }
  if (slots < 1 || seeds < 1) {
    throw ValidationError("bisection needs at least one slot and one seed per probe");
  }
  if (!(resolution > 0.0) || !(drift_factor > 0.0)) {
    throw ValidationError("resolution and drift factor must be positive");
  }
}

Probe probe_stability(const NetworkConfig& cfg, const ProtocolKind& proto, double lambda, const BisectionOptions& opts,
                      std::uint64_t seed_base)
{
  std::vector<char> unstable(opts.seeds, 0);
  const double threshold = opts.drift_factor / static_cast<double>(opts.slots);
  RunOptions run_opts;
  run_opts.max_trace_samples = 1;
  parallel_for(
    opts.seeds,
    [&](std::size_t i) {
      const auto report = run(cfg, proto, lambda, opts.slots, derive_seed(seed_base, "probe", i), run_opts);
      unstable[i] = report.unstable(threshold) ? 1 : 0;
    },
    opts.workers);
  Probe p;
  p.lambda = lambda;
  p.seeds = opts.seeds;
  for (const char u : unstable) {
    p.unstable_votes += static_cast<unsigned>(u);
  }
  p.unstable = 2 * p.unstable_votes > p.seeds;
  return p;
}

LambdaEstimate find_lambda_max(const NetworkConfig& cfg, const ProtocolKind& proto, const BisectionOptions& opts)
{
  cfg.validate();
  proto.validate();
  opts.validate();

  LambdaEstimate est;
  BisectionOptions attempt_opts = opts;
  for (unsigned attempt = 0; attempt <= opts.max_retries; ++attempt) {
    est.retries = attempt;
    est.slots_per_probe = attempt_opts.slots;
    // The same seed set at every lambda couples the probes of one attempt.
    const std::uint64_t seeds = derive_seed(opts.seed, "bisection", attempt);
    const std::uint64_t check_seeds = derive_seed(opts.seed, "verification", attempt);

    double lo = opts.lo;
    double hi = opts.hi;
    auto top = probe_stability(cfg, proto, hi, attempt_opts, seeds);
    est.probes.push_back(top);
    if (!top.unstable) {
      est.lambda_max = hi;
      est.half_width = 0.0;
      return est;
    }
    while ((hi - lo) / 2.0 > opts.resolution) {
      const double mid = (lo + hi) / 2.0;
      const auto p = probe_stability(cfg, proto, mid, attempt_opts, seeds);
      est.probes.push_back(p);
      (p.unstable ? hi : lo) = mid;
    }

    const double margin = 4.0 * opts.resolution;
    bool consistent = true;
    if (lo - margin > opts.lo) {
      auto p = probe_stability(cfg, proto, lo - margin, attempt_opts, check_seeds);
      p.verification = true;
      est.probes.push_back(p);
      consistent = consistent && !p.unstable;
    }
    if (hi + margin < opts.hi) {
      auto p = probe_stability(cfg, proto, hi + margin, attempt_opts, check_seeds);
      p.verification = true;
      est.probes.push_back(p);
      consistent = consistent && p.unstable;
    }
    if (consistent) {
      est.lambda_max = (lo + hi) / 2.0;
      est.half_width = (hi - lo) / 2.0;
      return est;
    }
    attempt_opts.slots *= 2;
  }
  std::ostringstream os;
  os << "stability verdicts stayed non-monotone after " << opts.max_retries << " retries (protocol "
     << protocol_letter(proto.protocol) << ")";
  throw BisectionFailure(os.str());
}

} // namespace netcoop::sim
