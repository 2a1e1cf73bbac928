#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "netcoop/cli/config.hpp"
#include "netcoop/cli/output.hpp"

namespace netcoop::cli {

/// Stability result of one protocol, dispatching to the matching formula.
analytic::StabilityResult evaluate(const NetworkConfig& net, sim::Protocol protocol, const std::optional<NcParams>& nc,
                                   const analytic::SeriesPolicy& series = {},
                                   double joint_state_cap = analytic::default_joint_state_cap);

/// Rows for the chosen protocol, or for every protocol the config supports.
Table analytic_table(const ExperimentConfig& cfg);

/// One row per seed of a fixed-lambda run. With a trace stream, the decimated
/// queue trace of every seed is written there as CSV.
Table simulate_table(const ExperimentConfig& cfg, std::ostream* trace = nullptr);

/// One row holding the simulated lambda bracket next to the analytic value.
Table lambda_table(const ExperimentConfig& cfg);

/// Rows in grid order: n, p, pr, f_sr, protocol, then the coding axes.
Table sweep_table(const ExperimentConfig& cfg);

/// Points of a grid in output order; uncoded protocols carry no NcParams.
struct GridPoint
{
  unsigned n = 0;
  double p = 0.0;
  double pr = 0.0;
  double f_sr = 0.0;
  sim::Protocol protocol = sim::Protocol::prp;
  std::optional<NcParams> nc;
};
std::vector<GridPoint> expand_grid(const GridSpec& grid);

} // namespace netcoop::cli
