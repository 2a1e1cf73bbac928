#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netcoop/analytic.hpp"
#include "netcoop/galois.hpp"
#include "netcoop/model.hpp"
#include "netcoop/simulate.hpp"

namespace netcoop::cli {

/// A config problem, prefixed with "<source>:<line>: " when a line is known.
class ConfigError : public ValidationError
{
public:
  ConfigError(std::string_view source, std::size_t line, const std::string& message);
  explicit ConfigError(const std::string& message);
};

enum class OutputFormat
{
  csv,
  records,
};

std::string_view to_string(OutputFormat f) noexcept;
OutputFormat parse_output_format(std::string_view s);
sim::Protocol parse_protocol(std::string_view s);
sim::Fidelity parse_fidelity(std::string_view s);

struct SimulationSettings
{
  std::uint64_t slots = 1'000'000;
  unsigned seeds = 5;
  std::uint64_t seed = 1;
  double resolution = 0.005;
  double drift_factor = 10.0;
  unsigned max_retries = 2;
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t trace_samples = 10'000;

  sim::BisectionOptions bisection() const;
};

/// Cross-product of symmetric configurations, one row per point and protocol.
struct GridSpec
{
  std::string name; ///< preset name, or "grid" for an explicit grid
  std::vector<unsigned> n;
  std::vector<double> p;    ///< every source-destination link
  std::vector<double> pr;   ///< every relay-destination link
  std::vector<double> f_sr; ///< source-relay link
  std::vector<std::uint32_t> q;
  std::vector<std::size_t> k;
  std::vector<sim::Protocol> protocols;
  bool simulate = false;

  /// Throws ConfigError naming the offending axis.
  void validate() const;
};

/// The figure presets: "fig2" (A, B, C over p), "fig3" (C, D over q) and
/// "fig4" (C, D over K).
GridSpec preset_grid(std::string_view name);

/// Everything one command needs, after config file and flag overrides.
struct ExperimentConfig
{
  std::optional<NetworkConfig> network;
  std::optional<double> lambda;
  std::optional<NcParams> nc;
  std::optional<sim::Protocol> protocol;
  sim::Fidelity fidelity = sim::Fidelity::formula_faithful;
  analytic::SeriesPolicy series;
  double joint_state_cap = analytic::default_joint_state_cap;
  SimulationSettings simulation;
  std::optional<std::string> output_path;
  OutputFormat format = OutputFormat::csv;
  std::optional<GridSpec> grid;

  /// Stable text rendering of every effective setting, used for hashing.
  std::string canonical() const;
};

/// Parses the INI-style schema documented in the README. Throws ConfigError
/// with the offending line for syntax errors, unknown sections or keys,
/// duplicates and out-of-range values.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");

/// Reads and parses a config file; a missing file is a ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

} // namespace netcoop::cli
