#include "netcoop/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace netcoop {

namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

void check_probabilities(const std::vector<double>& probs, const char* name, unsigned n)
{
  if (probs.size() != n) {
    std::ostringstream os;
    os << name << " must have exactly n=" << n << " entries, got " << probs.size();
    throw ValidationError(os.str());
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!is_probability(probs[i])) {
      std::ostringstream os;
      os << name << "[" << i + 1 << "] = " << probs[i] << " is not a probability in [0, 1]";
      throw ValidationError(os.str());
    }
  }
}

std::string count_string(double count)
{
  std::ostringstream os;
  os << std::fixed << std::setprecision(0) << count;
  return os.str();
}

} // namespace

EnumerationOverflow::EnumerationOverflow(std::string what, double required, double allowed)
  : std::length_error(what + ": requires " + count_string(required) + " states, allowed " +
                      count_string(allowed))
  , m_required{required}
  , m_allowed{allowed}
{}

void NetworkConfig::validate() const
{
  if (n < 1) {
    throw ValidationError("n must be at least 1");
  }
  if (n > 32) {
    throw ValidationError("n must not exceed 32 destinations");
  }
  check_probabilities(f_sd, "f_sd", n);
  check_probabilities(f_rd, "f_rd", n);
  if (!is_probability(f_sr)) {
    throw ValidationError("f_sr is not a probability in [0, 1]");
  }
  if (!is_probability(lambda)) {
    throw ValidationError("lambda is not a probability in [0, 1]");
  }
}

NetworkConfig NetworkConfig::symmetric(unsigned n, double p, double f_sr, double pr, double lambda)
{
  NetworkConfig cfg;
  cfg.n = n;
  cfg.f_sd.assign(n, p);
  cfg.f_sr = f_sr;
  cfg.f_rd.assign(n, pr);
  cfg.lambda = lambda;
  return cfg;
}

double NetworkConfig::all_direct_success() const
{
  double prod = 1.0;
  for (const double f : f_sd) {
    prod *= f;
  }
  return prod;
}

void ChannelPhysics::validate() const
{
  if (!(beta > 0.0) || !(power > 0.0) || !(noise > 0.0)) {
    throw ValidationError("channel physics requires beta > 0, power > 0 and noise > 0");
  }
}

double success_probability_from_physics(const ChannelPhysics& phys)
{
  phys.validate();
  // |h|^2 is unit-mean exponential.
  return std::clamp(std::exp(-phys.beta * phys.noise / phys.power), 0.0, 1.0);
}

DestinationSet::DestinationSet(mask_type mask, unsigned n)
  : m_mask{mask}
  , m_n{n}
{
  if (n > 32) {
    throw ValidationError("destination sets support at most 32 destinations");
  }
  if (n < 32 && (mask >> n) != 0) {
    throw ValidationError("destination mask has bits set beyond n");
  }
}

DestinationSet DestinationSet::full(unsigned n)
{
  const mask_type all = n >= 32 ? ~mask_type{0} : ((mask_type{1} << n) - 1);
  return DestinationSet{all, n};
}

DestinationSet DestinationSet::complement() const
{
  return DestinationSet{full(m_n).mask() & ~m_mask, m_n};
}

DestinationSet DestinationSet::operator|(const DestinationSet& other) const
{
  if (other.m_n != m_n) {
    throw ValidationError("union of destination sets over different universes");
  }
  return DestinationSet{m_mask | other.m_mask, m_n};
}

std::string DestinationSet::to_string() const
{
  std::string out = "{";
  bool first = true;
  for (unsigned i = 0; i < m_n; ++i) {
    if (contains(i)) {
      if (!first) {
        out += ',';
      }
      out += std::to_string(i + 1);
      first = false;
    }
  }
  return out + "}";
}

std::vector<DestinationSet> enumerate_states(unsigned n)
{
  if (n > max_enumerated_destinations) {
    throw EnumerationOverflow("destination state enumeration", std::ldexp(1.0, static_cast<int>(n)),
                              std::ldexp(1.0, static_cast<int>(max_enumerated_destinations)));
  }
  const std::uint32_t count = std::uint32_t{1} << n;
  std::vector<DestinationSet> states;
  states.reserve(count);
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    states.emplace_back(mask, n);
  }
  return states;
}

} // namespace netcoop
