#include "netcoop/analytic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace netcoop::analytic {

namespace {

constexpr unsigned closed_form_max_n = max_enumerated_destinations;

bool any_zero(std::span<const double> probs)
{
  return std::any_of(probs.begin(), probs.end(), [](double p) { return p == 0.0; });
}

void check_probabilities(std::span<const double> probs)
{
  for (const double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("link success probability outside [0, 1]");
    }
  }
}

bool use_closed_form(Method method, std::size_t n)
{
  switch (method) {
    case Method::closed_form:
      if (n > closed_form_max_n) {
        throw EnumerationOverflow("inclusion-exclusion over destination subsets", std::ldexp(1.0, static_cast<int>(n)),
                                  std::ldexp(1.0, closed_form_max_n));
      }
      return true;
    case Method::series:
      return false;
    case Method::automatic:
    default:
      return n <= closed_form_max_n;
  }
}

/// prod_{i in mask} values[i] for every mask, built one bit at a time.
std::vector<double> subset_products(std::span<const double> values)
{
  const std::size_t count = std::size_t{1} << values.size();
  std::vector<double> prod(count, 1.0);
  for (std::size_t mask = 1; mask < count; ++mask) {
    const auto low = static_cast<std::size_t>(std::countr_zero(mask));
    prod[mask] = prod[mask & (mask - 1)] * values[low];
  }
  return prod;
}

std::vector<double> complements(std::span<const double> probs)
{
  std::vector<double> out(probs.size());
  std::transform(probs.begin(), probs.end(), out.begin(), [](double p) { return 1.0 - p; });
  return out;
}

double sign_for(std::size_t mask) { return (std::popcount(mask) % 2 == 1) ? 1.0 : -1.0; }

/// 1 - prod_i (1 - s_i), accurate when every s_i is small.
double one_minus_product_of_complements(std::span<const double> s)
{
  double log_all = 0.0;
  for (const double v : s) {
    if (v >= 1.0) {
      return 1.0;
    }
    log_all += std::log1p(-v);
  }
  return -std::expm1(log_all);
}

/// a c / (1 - (1 - a) c) = sum_{m>=1} a (1-a)^{m-1} c^m.
double geometric_state_sum(double a, double c) { return a * c / (1.0 - (1.0 - a) * c); }

void check_relay_reachable(double a)
{
  if (!(a > 0.0)) {
    throw std::domain_error("relay takeover probability f_SR(1 - prod f_SD) is zero; reception states are undefined");
  }
}

/// sum over non-empty A of F of (-1)^{|A|+1} / (1 - prod_{i in A} r_i), for every F.
/// Entries whose mask touches a zero-probability link are left meaningless;
/// callers treat those sets as infinite.
std::vector<double> expected_max_geometric_table(std::span<const double> probs)
{
  const auto miss = complements(probs);
  auto table = subset_products(miss);
  table[0] = 0.0;
  for (std::size_t mask = 1; mask < table.size(); ++mask) {
    const double denom = 1.0 - table[mask];
    table[mask] = denom > 0.0 ? sign_for(mask) / denom : 0.0;
  }
  // Zeta transform over subsets.
  for (std::size_t bit = 0; bit < probs.size(); ++bit) {
    const std::size_t b = std::size_t{1} << bit;
    for (std::size_t mask = 0; mask < table.size(); ++mask) {
      if (mask & b) {
        table[mask] += table[mask ^ b];
      }
    }
  }
  return table;
}

std::vector<double> select(std::span<const double> values, DestinationSet::mask_type mask)
{
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if ((mask >> i) & 1u) {
      out.push_back(values[i]);
    }
  }
  return out;
}

void check_enumerable(const NetworkConfig& cfg)
{
  if (cfg.n > max_enumerated_destinations) {
    throw EnumerationOverflow("destination state enumeration", std::ldexp(1.0, static_cast<int>(cfg.n)),
                              std::ldexp(1.0, static_cast<int>(max_enumerated_destinations)));
  }
}

StabilityResult relay_limited(double mu, double a, double etr, double c)
{
  StabilityResult out;
  out.source_mu = mu;
  out.relay_etr = etr;
  if (is_infinite(etr)) {
    out.lambda_max = 0.0;
    out.binding = BindingConstraint::relay_queue;
    return out;
  }
  const auto q = relay_stability_root(a, etr, c);
  out.relay_root = q.root;
  out.discriminant_clamped = q.clamped;
  if (q.root && *q.root < 1.0) {
    out.lambda_max = mu * *q.root;
    out.binding = BindingConstraint::relay_queue;
  } else {
    out.lambda_max = mu;
    out.binding = BindingConstraint::source_queue;
  }
  return out;
}

} // namespace

void SeriesPolicy::validate() const
{
  if (!(rel_tol > 0.0) || max_terms < 1) {
    throw ValidationError("series policy requires rel_tol > 0 and max_terms >= 1");
  }
}

double sum_series(const std::function<double(std::size_t)>& term, std::size_t first, const SeriesPolicy& policy)
{
  double sum = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < policy.max_terms; ++i) {
    const double t = term(first + i);
    if (std::isnan(t) || t < 0.0) {
      throw std::logic_error("series term is negative or NaN");
    }
    sum += t;
    if (t == 0.0) {
      return sum;
    }
    if (i > 0 && prev > 0.0) {
      const double r = t / prev;
      if (r < 1.0 && t * r / (1.0 - r) <= policy.rel_tol * sum) {
        return sum;
      }
    }
    prev = t;
  }
  std::ostringstream os;
  os << "series did not reach rel_tol=" << policy.rel_tol << " within " << policy.max_terms << " terms";
  throw SeriesTruncationError(os.str());
}

double expected_max_geometric(std::span<const double> probs, const SeriesPolicy& policy, Method method)
{
  check_probabilities(probs);
  if (probs.empty()) {
    return 0.0;
  }
  if (any_zero(probs)) {
    return infinite_expectation;
  }
  const auto miss = complements(probs);
  if (use_closed_form(method, probs.size())) {
    const auto prod = subset_products(miss);
    double sum = 0.0;
    for (std::size_t mask = 1; mask < prod.size(); ++mask) {
      sum += sign_for(mask) / (1.0 - prod[mask]);
    }
    return sum;
  }
  std::vector<double> powers(miss.size());
  return sum_series(
    [&](std::size_t t) {
      for (std::size_t i = 0; i < miss.size(); ++i) {
        powers[i] = std::pow(miss[i], static_cast<double>(t));
      }
      return one_minus_product_of_complements(powers);
    },
    0, policy);
}

double expected_max_negative_binomial(std::span<const double> probs, std::size_t successes, const SeriesPolicy& policy)
{
  check_probabilities(probs);
  if (probs.empty() || successes == 0) {
    return 0.0;
  }
  if (any_zero(probs)) {
    return infinite_expectation;
  }
  const std::size_t l = successes;
  // binom[i][j] = Pr[Binomial(t, p_i) = j] for j < l, advanced one slot at a time
  // with the Pascal recurrence; the sum over j is Pr[N_i > t].
  std::vector<std::vector<double>> binom(probs.size(), std::vector<double>(l, 0.0));
  for (auto& b : binom) {
    b[0] = 1.0;
  }
  auto advance = [&]() {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      auto& b = binom[i];
      const double p = probs[i];
      for (std::size_t j = l - 1; j > 0; --j) {
        b[j] = (1.0 - p) * b[j] + p * b[j - 1];
      }
      b[0] *= (1.0 - p);
    }
  };
  for (std::size_t t = 0; t < l; ++t) {
    advance();
  }
  std::vector<double> survival(probs.size());
  const double tail = sum_series(
    [&](std::size_t) {
      for (std::size_t i = 0; i < probs.size(); ++i) {
        double s = 0.0;
        for (const double v : binom[i]) {
          s += v;
        }
        survival[i] = std::min(s, 1.0);
      }
      advance();
      return one_minus_product_of_complements(survival);
    },
    l, policy);
  return static_cast<double>(l) + tail;
}

double rlnc_expected_completion_time(std::span<const double> probs, const galois::FieldSpec& field, std::size_t k,
                                     const SeriesPolicy& policy)
{
  check_probabilities(probs);
  if (probs.empty()) {
    return 0.0;
  }
  if (any_zero(probs)) {
    return infinite_expectation;
  }
  return sum_series(
    [&](std::size_t l) {
      const double weight = galois::decode_count_pmf(field, k, l);
      return weight == 0.0 ? 0.0 : weight * expected_max_negative_binomial(probs, l, policy);
    },
    k, policy);
}

std::string_view to_string(BindingConstraint b) noexcept
{
  return b == BindingConstraint::relay_queue ? "relay-queue" : "source-queue";
}

double prp_max_stable(const NetworkConfig& cfg, const SeriesPolicy& policy)
{
  cfg.validate();
  policy.validate();
  const double e = expected_max_geometric(cfg.f_sd, policy);
  return is_infinite(e) ? 0.0 : 1.0 / e;
}

double rlnc_source_max_stable(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy)
{
  cfg.validate();
  policy.validate();
  const auto field = nc.field();
  const double e = rlnc_expected_completion_time(cfg.f_sd, field, nc.k, policy);
  return is_infinite(e) ? 0.0 : static_cast<double>(nc.k) / e;
}

double coop_source_service_rate(const NetworkConfig& cfg, const SeriesPolicy& policy, Method method)
{
  cfg.validate();
  policy.validate();
  const double y = 1.0 - cfg.f_sr;
  const auto miss = complements(cfg.f_sd);
  double e = 1.0;
  if (use_closed_form(method, cfg.n)) {
    // sum_t y^t (1 - prod_i (1 - x_i^t)) expanded over subsets into geometric series.
    const auto prod = subset_products(miss);
    for (std::size_t mask = 1; mask < prod.size(); ++mask) {
      const double yc = y * prod[mask];
      if (yc >= 1.0) {
        return 0.0;
      }
      e += sign_for(mask) * yc / (1.0 - yc);
    }
  } else {
    if (y == 1.0 && any_zero(cfg.f_sd)) {
      return 0.0;
    }
    std::vector<double> powers(miss.size());
    e += sum_series(
      [&](std::size_t t) {
        const auto td = static_cast<double>(t);
        for (std::size_t i = 0; i < miss.size(); ++i) {
          powers[i] = std::pow(miss[i], td);
        }
        return std::pow(y, td) * one_minus_product_of_complements(powers);
      },
      1, policy);
  }
  return 1.0 / e;
}

double relay_arrival_rate(const NetworkConfig& cfg, double rho)
{
  cfg.validate();
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw ValidationError("load ratio rho must lie in [0, 1]");
  }
  return rho * cfg.relay_handoff_probability();
}

double state_probability(const NetworkConfig& cfg, const DestinationSet& failed, const SeriesPolicy& policy,
                         Method method)
{
  cfg.validate();
  policy.validate();
  if (failed.universe() != cfg.n) {
    throw ValidationError("destination set universe does not match n");
  }
  const double a = cfg.relay_handoff_probability();
  check_relay_reachable(a);
  const auto miss = complements(cfg.f_sd);
  const auto fail_mask = failed.mask();
  const auto succ_mask = failed.complement().mask();

  double c_failed = 1.0;
  for (unsigned i = 0; i < cfg.n; ++i) {
    if ((fail_mask >> i) & 1u) {
      c_failed *= miss[i];
    }
  }

  if (use_closed_form(method, static_cast<std::size_t>(std::popcount(succ_mask)))) {
    // Expand prod_{j in S} (1 - x_j^m) over subsets B of S.
    double sum = 0.0;
    for (std::uint32_t b = succ_mask;; b = (b - 1) & succ_mask) {
      double c = c_failed;
      for (unsigned j = 0; j < cfg.n; ++j) {
        if ((b >> j) & 1u) {
          c *= miss[j];
        }
      }
      sum += (std::popcount(b) % 2 == 0 ? 1.0 : -1.0) * geometric_state_sum(a, c);
      if (b == 0) {
        break;
      }
    }
    return std::max(sum, 0.0);
  }

  double weight = 1.0; // (1-a)^{m-1}
  return sum_series(
    [&](std::size_t m) {
      const auto md = static_cast<double>(m);
      double term = a * weight * std::pow(c_failed, md);
      for (unsigned j = 0; j < cfg.n; ++j) {
        if ((succ_mask >> j) & 1u) {
          term *= -std::expm1(md * std::log(miss[j]));
        }
      }
      weight *= (1.0 - a);
      return term;
    },
    1, policy);
}

std::vector<double> state_probability_table(const NetworkConfig& cfg)
{
  cfg.validate();
  check_enumerable(cfg);
  const double a = cfg.relay_handoff_probability();
  check_relay_reachable(a);
  auto table = subset_products(complements(cfg.f_sd));
  for (auto& v : table) {
    v = geometric_state_sum(a, v);
  }
  // Signed sum over supersets: pi(F) = sum_{T >= F} (-1)^{|T \ F|} G(T).
  for (unsigned bit = 0; bit < cfg.n; ++bit) {
    const std::size_t b = std::size_t{1} << bit;
    for (std::size_t mask = 0; mask < table.size(); ++mask) {
      if (!(mask & b)) {
        table[mask] -= table[mask | b];
      }
    }
  }
  for (auto& v : table) {
    v = std::max(v, 0.0);
  }
  return table;
}

double relay_expected_service_saturated(const NetworkConfig& cfg, const SeriesPolicy& policy)
{
  policy.validate();
  const auto pi = state_probability_table(cfg);
  const auto emax = expected_max_geometric_table(cfg.f_rd);
  DestinationSet::mask_type dead = 0;
  for (unsigned i = 0; i < cfg.n; ++i) {
    if (cfg.f_rd[i] == 0.0) {
      dead |= 1u << i;
    }
  }
  double sum = 0.0;
  for (std::size_t mask = 1; mask < pi.size(); ++mask) {
    if (pi[mask] == 0.0) {
      continue;
    }
    if (mask & dead) {
      return infinite_expectation;
    }
    sum += pi[mask] * emax[mask];
  }
  return sum;
}

QuadraticRoot relay_stability_root(double a, double etr, double c)
{
  if (!(a > 0.0)) {
    return {};
  }
  const double b = c + a * etr;
  double disc = b * b - 4.0 * a * c;
  QuadraticRoot out;
  if (disc < 0.0) {
    if (disc < -1e-12) {
      return out;
    }
    disc = 0.0;
    out.clamped = true;
  }
  // Product of the roots is c/a, so the smaller one is 2c / (b + sqrt(disc)).
  out.root = 2.0 * c / (b + std::sqrt(disc));
  return out;
}

StabilityResult prp_stability(const NetworkConfig& cfg, const SeriesPolicy& policy)
{
  StabilityResult out;
  out.source_mu = prp_max_stable(cfg, policy);
  out.lambda_max = out.source_mu;
  return out;
}

StabilityResult rlnc_source_stability(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy)
{
  StabilityResult out;
  out.source_mu = rlnc_source_max_stable(cfg, nc, policy);
  out.lambda_max = out.source_mu;
  return out;
}

StabilityResult coop_max_stable(const NetworkConfig& cfg, const SeriesPolicy& policy)
{
  const double mu = coop_source_service_rate(cfg, policy);
  const double a = cfg.relay_handoff_probability();
  if (a == 0.0) {
    StabilityResult out;
    out.source_mu = mu;
    out.lambda_max = mu;
    return out;
  }
  return relay_limited(mu, a, relay_expected_service_saturated(cfg, policy), 1.0);
}

double joint_state_probability(const NetworkConfig& cfg, std::span<const DestinationSet> failed_sets,
                               const SeriesPolicy& policy)
{
  if (failed_sets.empty()) {
    throw ValidationError("joint state needs at least one packet");
  }
  double prod = 1.0;
  for (const auto& f : failed_sets) {
    prod *= state_probability(cfg, f, policy);
  }
  return prod;
}

double coop_nc_relay_service(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy,
                             double joint_state_cap)
{
  cfg.validate();
  policy.validate();
  const auto field = nc.field();
  const double required = std::pow(2.0, static_cast<double>(cfg.n) * static_cast<double>(nc.k));
  if (required > joint_state_cap) {
    throw EnumerationOverflow("joint relay state enumeration (2^n)^K", required, joint_state_cap);
  }
  const auto pi = state_probability_table(cfg);

  // Probability mass of each union of failed sets, accumulated over all K-tuples.
  std::vector<double> union_mass(pi.size(), 0.0);
  const std::function<void(std::size_t, double, std::size_t)> walk = [&](std::size_t depth, double prob,
                                                                         std::size_t uni) {
    if (depth == nc.k) {
      union_mass[uni] += prob;
      return;
    }
    for (std::size_t mask = 0; mask < pi.size(); ++mask) {
      if (pi[mask] > 0.0) {
        walk(depth + 1, prob * pi[mask], uni | mask);
      }
    }
  };
  walk(0, 1.0, 0);

  double sum = 0.0;
  for (std::size_t u = 1; u < union_mass.size(); ++u) {
    if (union_mass[u] == 0.0) {
      continue;
    }
    const auto probs = select(cfg.f_rd, static_cast<DestinationSet::mask_type>(u));
    const double cond = rlnc_expected_completion_time(probs, field, nc.k, policy);
    if (is_infinite(cond)) {
      return infinite_expectation;
    }
    sum += union_mass[u] * cond;
  }
  return sum;
}

StabilityResult coop_nc_max_stable(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy,
                                   double joint_state_cap)
{
  const double mu = coop_source_service_rate(cfg, policy);
  const double a = cfg.relay_handoff_probability();
  if (a == 0.0) {
    nc.validate();
    StabilityResult out;
    out.source_mu = mu;
    out.lambda_max = mu;
    return out;
  }
  const double etr = coop_nc_relay_service(cfg, nc, policy, joint_state_cap);
  return relay_limited(mu, a, etr, static_cast<double>(nc.k));
}

} // namespace netcoop::analytic
