#include "netcoop/cli/commands.hpp"

#include <ostream>

#include "netcoop/parallel.hpp"
#include "netcoop/random.hpp"

namespace netcoop::cli {

namespace {

bool is_coded(sim::Protocol p)
{
  return p == sim::Protocol::source_rlnc || p == sim::Protocol::cooperation_nc;
}

std::string letter(sim::Protocol p) { return std::string(sim::protocol_letter(p)); }

Cell optional_cell(const std::optional<double>& v)
{
  if (v) {
    return *v;
  }
  return std::monostate{};
}

std::int64_t as_int(std::uint64_t v) { return static_cast<std::int64_t>(v); }

const NetworkConfig& require_network(const ExperimentConfig& cfg)
{
  if (!cfg.network) {
    throw ConfigError("no network given; a config with a [network] section is required");
  }
  cfg.network->validate();
  return *cfg.network;
}

sim::Protocol require_protocol(const ExperimentConfig& cfg)
{
  if (!cfg.protocol) {
    throw ConfigError("no protocol given; use --protocol or [protocol] name");
  }
  if (is_coded(*cfg.protocol) && !cfg.nc) {
    throw ConfigError("protocol " + letter(*cfg.protocol) + " needs a [coding] section with q and k");
  }
  return *cfg.protocol;
}

sim::ProtocolKind kind_of(sim::Protocol p, const std::optional<NcParams>& nc, sim::Fidelity f)
{
  sim::ProtocolKind kind{p, is_coded(p) ? nc : std::nullopt, f};
  kind.validate();
  return kind;
}

void push_coding(std::vector<Cell>& cells, sim::Protocol p, const std::optional<NcParams>& nc)
{
  if (is_coded(p) && nc) {
    cells.emplace_back(static_cast<std::int64_t>(nc->q));
    cells.emplace_back(static_cast<std::int64_t>(nc->k));
  } else {
    cells.emplace_back(std::monostate{});
    cells.emplace_back(std::monostate{});
  }
}

void push_stability(std::vector<Cell>& cells, const analytic::StabilityResult& r)
{
  cells.emplace_back(r.lambda_max);
  cells.emplace_back(r.source_mu);
  cells.emplace_back(optional_cell(r.relay_etr));
  cells.emplace_back(std::string(analytic::to_string(r.binding)));
}

} // namespace

analytic::StabilityResult evaluate(const NetworkConfig& net, sim::Protocol protocol, const std::optional<NcParams>& nc,
                                   const analytic::SeriesPolicy& series, double joint_state_cap)
{
  switch (protocol) {
  case sim::Protocol::prp:
    return analytic::prp_stability(net, series);
  case sim::Protocol::cooperation:
    return analytic::coop_max_stable(net, series);
  case sim::Protocol::source_rlnc:
  case sim::Protocol::cooperation_nc:
    if (!nc) {
      throw ConfigError("protocol " + letter(protocol) + " needs q and k");
    }
    return protocol == sim::Protocol::source_rlnc ? analytic::rlnc_source_stability(net, *nc, series)
                                                  : analytic::coop_nc_max_stable(net, *nc, series, joint_state_cap);
  }
  throw ConfigError("unknown protocol");
}

Table analytic_table(const ExperimentConfig& cfg)
{
  const auto& net = require_network(cfg);
  std::vector<sim::Protocol> protocols;
  if (cfg.protocol) {
    protocols.push_back(require_protocol(cfg));
  } else {
    protocols = {sim::Protocol::prp, sim::Protocol::cooperation};
    if (cfg.nc) {
      protocols = {sim::Protocol::prp, sim::Protocol::source_rlnc, sim::Protocol::cooperation,
                   sim::Protocol::cooperation_nc};
    }
  }
  if (cfg.nc) {
    cfg.nc->validate();
  }

  Table table{"analytic",
              {"protocol", "n", "f_sd", "f_sr", "f_rd", "q", "k", "lambda_max", "source_mu", "relay_etr", "binding"},
              {}};
  for (const auto p : protocols) {
    const auto r = evaluate(net, p, cfg.nc, cfg.series, cfg.joint_state_cap);
    Row row;
    row.cells = {letter(p), static_cast<std::int64_t>(net.n), format_list(net.f_sd), net.f_sr, format_list(net.f_rd)};
    push_coding(row.cells, p, cfg.nc);
    push_stability(row.cells, r);
    row.extra["relay_root"] = r.relay_root ? nlohmann::json(*r.relay_root) : nlohmann::json(nullptr);
    row.extra["discriminant_clamped"] = r.discriminant_clamped;
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table simulate_table(const ExperimentConfig& cfg, std::ostream* trace)
{
  const auto& net = require_network(cfg);
  const auto protocol = require_protocol(cfg);
  if (!cfg.lambda) {
    throw ConfigError("no arrival rate given; use --lambda or [network] lambda");
  }
  const auto kind = kind_of(protocol, cfg.nc, cfg.fidelity);
  const auto& s = cfg.simulation;

  std::vector<sim::SimReport> reports(s.seeds);
  sim::RunOptions options;
  options.max_trace_samples = s.trace_samples;
  parallel_for(s.seeds, [&](std::size_t i) {
    reports[i] = sim::run(net, kind, *cfg.lambda, s.slots, derive_seed(s.seed, "cli.run", i), options);
  });

  Table table{"simulate",
              {"protocol", "mode", "lambda", "seed", "slots", "arrivals", "delivered", "source_len", "relay_len",
               "source_drift", "relay_drift", "unstable", "source_service_mean", "relay_service_mean", "handoffs"},
              {}};
  const double threshold = s.drift_factor / static_cast<double>(s.slots);
  for (const auto& r : reports) {
    Row row;
    row.cells = {letter(protocol),
                 std::string(sim::to_string(cfg.fidelity)),
                 *cfg.lambda,
                 std::to_string(r.seed),
                 as_int(r.slots_run),
                 as_int(r.arrivals),
                 as_int(r.packets_delivered),
                 as_int(r.source_len),
                 as_int(r.relay_len),
                 r.source_drift,
                 r.relay_drift,
                 std::int64_t{r.unstable(threshold) ? 1 : 0},
                 r.source_service.count() ? Cell{r.source_service.mean()} : Cell{},
                 r.relay_service.count() ? Cell{r.relay_service.mean()} : Cell{},
                 as_int(r.relay_handoffs)};
    table.rows.push_back(std::move(row));
  }

  if (trace != nullptr) {
    *trace << "seed,slot,source_len,relay_len,arrivals,delivered\n";
    for (const auto& r : reports) {
      for (const auto& t : r.trace) {
        *trace << r.seed << ',' << t.slot << ',' << t.source_len << ',' << t.relay_len << ',' << t.arrivals << ','
               << t.delivered << '\n';
      }
    }
  }
  return table;
}

Table lambda_table(const ExperimentConfig& cfg)
{
  const auto& net = require_network(cfg);
  const auto protocol = require_protocol(cfg);
  const auto kind = kind_of(protocol, cfg.nc, cfg.fidelity);
  const auto opts = cfg.simulation.bisection();
  opts.validate();

  const auto est = sim::find_lambda_max(net, kind, opts);
  std::optional<double> analytic_value;
  try {
    analytic_value = evaluate(net, protocol, cfg.nc, cfg.series, cfg.joint_state_cap).lambda_max;
  } catch (const EnumerationOverflow&) {
  }

  Table table{"find-lambda-max",
              {"protocol", "mode", "n", "f_sd", "f_sr", "f_rd", "q", "k", "lambda_max", "half_width", "lower", "upper",
               "retries", "slots_per_probe", "analytic_lambda_max"},
              {}};
  Row row;
  row.cells = {letter(protocol), std::string(sim::to_string(cfg.fidelity)), static_cast<std::int64_t>(net.n),
               format_list(net.f_sd), net.f_sr, format_list(net.f_rd)};
  push_coding(row.cells, protocol, cfg.nc);
  row.cells.insert(row.cells.end(), {est.lambda_max, est.half_width, est.lower(), est.upper(),
                                     static_cast<std::int64_t>(est.retries), as_int(est.slots_per_probe),
                                     optional_cell(analytic_value)});
  auto probes = nlohmann::json::array();
  for (const auto& p : est.probes) {
    probes.push_back({{"lambda", p.lambda},
                      {"unstable_votes", p.unstable_votes},
                      {"seeds", p.seeds},
                      {"unstable", p.unstable},
                      {"verification", p.verification}});
  }
  row.extra["probes"] = std::move(probes);
  table.rows.push_back(std::move(row));
  return table;
}

std::vector<GridPoint> expand_grid(const GridSpec& grid)
{
  grid.validate();
  const bool k_innermost = grid.name == "fig4";
  std::vector<GridPoint> points;
  for (const auto n : grid.n) {
    for (const auto p : grid.p) {
      for (const auto pr : grid.pr) {
        for (const auto f_sr : grid.f_sr) {
          for (const auto protocol : grid.protocols) {
            GridPoint base{n, p, pr, f_sr, protocol, std::nullopt};
            if (!is_coded(protocol)) {
              points.push_back(base);
              continue;
            }
            const std::size_t outer = k_innermost ? grid.q.size() : grid.k.size();
            const std::size_t inner = k_innermost ? grid.k.size() : grid.q.size();
            for (std::size_t i = 0; i < outer; ++i) {
              for (std::size_t j = 0; j < inner; ++j) {
                const auto q = grid.q[k_innermost ? i : j];
                const auto k = grid.k[k_innermost ? j : i];
                base.nc = NcParams{q, k};
                points.push_back(base);
              }
            }
          }
        }
      }
    }
  }
  return points;
}

Table sweep_table(const ExperimentConfig& cfg)
{
  if (!cfg.grid) {
    throw ConfigError("no grid given; use --preset or a [grid] section");
  }
  const auto& grid = *cfg.grid;
  const auto points = expand_grid(grid);
  auto opts = cfg.simulation.bisection();
  if (grid.simulate) {
    opts.validate();
  }
  // Points already run in parallel; keep each bisection on its own thread.
  opts.workers = 1;

  struct Outcome
  {
    analytic::StabilityResult analytic;
    std::optional<sim::LambdaEstimate> simulated;
  };
  std::vector<Outcome> outcomes(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    const auto& pt = points[i];
    const auto net = NetworkConfig::symmetric(pt.n, pt.p, pt.f_sr, pt.pr);
    outcomes[i].analytic = evaluate(net, pt.protocol, pt.nc, cfg.series, cfg.joint_state_cap);
    if (grid.simulate) {
      outcomes[i].simulated = sim::find_lambda_max(net, kind_of(pt.protocol, pt.nc, cfg.fidelity), opts);
    }
  });

  Table table{"sweep",
              {"protocol", "n", "p", "f_sr", "pr", "q", "k", "lambda_max", "source_mu", "relay_etr", "binding",
               "sim_lambda_max", "sim_half_width"},
              {}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    Row row;
    row.cells = {letter(pt.protocol), static_cast<std::int64_t>(pt.n), pt.p, pt.f_sr, pt.pr};
    push_coding(row.cells, pt.protocol, pt.nc);
    push_stability(row.cells, outcomes[i].analytic);
    if (const auto& est = outcomes[i].simulated) {
      row.cells.emplace_back(est->lambda_max);
      row.cells.emplace_back(est->half_width);
    } else {
      row.cells.emplace_back(std::monostate{});
      row.cells.emplace_back(std::monostate{});
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

} // namespace netcoop::cli
