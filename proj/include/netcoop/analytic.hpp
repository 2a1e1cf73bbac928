#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "netcoop/galois.hpp"
#include "netcoop/model.hpp"

namespace netcoop::analytic {

/// Truncation rule for the infinite sums.
///
/// Every series here has positive, eventually geometrically decaying terms.
/// Summation stops once the geometric tail estimated from the last term ratio
/// drops below rel_tol times the partial sum.
struct SeriesPolicy
{
  double rel_tol = 1e-12;
  std::size_t max_terms = 1'000'000;

  void validate() const;
};

/// Raised when a series has not met its tolerance within max_terms.
class SeriesTruncationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Distinguished value for an expectation that diverges (a link that never succeeds).
inline constexpr double infinite_expectation = std::numeric_limits<double>::infinity();

inline bool is_infinite(double x) noexcept { return x == infinite_expectation; }

/// Evaluation route for quantities with both a closed form and a series form.
enum class Method
{
  automatic,
  closed_form,
  series,
};

/// Sums term(first), term(first + 1), ... under the policy. Terms are requested
/// strictly in order, so term may carry state between calls.
double sum_series(const std::function<double(std::size_t)>& term, std::size_t first, const SeriesPolicy& policy);

/// E[max_i N_i] for independent geometric N_i with success probabilities probs.
/// Empty input gives 0; any zero probability gives infinite_expectation.
double expected_max_geometric(std::span<const double> probs, const SeriesPolicy& policy = {},
                              Method method = Method::automatic);

/// E[max_i N_i] where N_i counts the slots until the l-th success at probs[i].
double expected_max_negative_binomial(std::span<const double> probs, std::size_t successes,
                                      const SeriesPolicy& policy = {});

/// Expected slots until every receiver collects M successful receptions, M
/// following the rank-completion distribution for GF(q)^K.
double rlnc_expected_completion_time(std::span<const double> probs, const galois::FieldSpec& field, std::size_t k,
                                     const SeriesPolicy& policy = {});

enum class BindingConstraint
{
  source_queue,
  relay_queue,
};

std::string_view to_string(BindingConstraint b) noexcept;

struct StabilityResult
{
  double lambda_max = 0.0;
  double source_mu = 0.0;
  /// Saturated relay service time, absent when the relay never gets traffic.
  std::optional<double> relay_etr;
  BindingConstraint binding = BindingConstraint::source_queue;
  /// Smaller root in rho of the relay stability quadratic, when it is real.
  std::optional<double> relay_root;
  /// Set when a slightly negative discriminant was rounded up to zero.
  bool discriminant_clamped = false;

  double rho_max() const { return source_mu > 0.0 ? lambda_max / source_mu : 0.0; }
};

/// Plain retransmission: one over the expected slots for every destination to decode.
double prp_max_stable(const NetworkConfig& cfg, const SeriesPolicy& policy = {});

/// Source-side RLNC: K over the expected slots to deliver a generation of K.
double rlnc_source_max_stable(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy = {});

/// Source service rate with the relay as an alternative sink: 1 / E[min(T_L, T_D)].
double coop_source_service_rate(const NetworkConfig& cfg, const SeriesPolicy& policy = {},
                                Method method = Method::automatic);

/// Upper bound on the relay arrival rate, rho * f_SR * (1 - prod f_SD).
double relay_arrival_rate(const NetworkConfig& cfg, double rho);

/// Probability that the destinations in `failed` still miss a packet when the
/// relay takes it over. Throws std::domain_error when the relay can never
/// take a packet over.
double state_probability(const NetworkConfig& cfg, const DestinationSet& failed, const SeriesPolicy& policy = {},
                         Method method = Method::automatic);

/// state_probability for every failed set, indexed by mask.
std::vector<double> state_probability_table(const NetworkConfig& cfg);

/// Expected relay slots to clear one packet if it could transmit every slot.
double relay_expected_service_saturated(const NetworkConfig& cfg, const SeriesPolicy& policy = {});

/// Smaller root of a*rho^2 - (c + a*etr)*rho + c = 0. Empty when the roots are
/// complex, in which case the relay condition holds for every rho.
struct QuadraticRoot
{
  std::optional<double> root;
  bool clamped = false;
};
QuadraticRoot relay_stability_root(double a, double etr, double c);

StabilityResult prp_stability(const NetworkConfig& cfg, const SeriesPolicy& policy = {});
StabilityResult rlnc_source_stability(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy = {});

/// Cooperative relaying without coding: both queues stable.
StabilityResult coop_max_stable(const NetworkConfig& cfg, const SeriesPolicy& policy = {});

/// Product of state probabilities over the K packets of a relay generation.
double joint_state_probability(const NetworkConfig& cfg, std::span<const DestinationSet> failed_sets,
                               const SeriesPolicy& policy = {});

/// Default cap on (2^n)^K joint states.
inline constexpr double default_joint_state_cap = 1048576.0;

/// Expected saturated relay slots to clear a generation of K coded packets.
double coop_nc_relay_service(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy = {},
                             double joint_state_cap = default_joint_state_cap);

/// Cooperative relaying with RLNC at the relay.
StabilityResult coop_nc_max_stable(const NetworkConfig& cfg, const NcParams& nc, const SeriesPolicy& policy = {},
                                   double joint_state_cap = default_joint_state_cap);

} // namespace netcoop::analytic
