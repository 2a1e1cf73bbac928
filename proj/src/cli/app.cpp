#include "netcoop/cli/app.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "netcoop/cli/commands.hpp"

namespace netcoop::cli {

namespace {

struct Flags
{
  std::string config;
  std::string protocol;
  std::optional<double> lambda;
  std::optional<std::uint64_t> slots;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> seeds;
  std::optional<double> resolution;
  std::string mode;
  std::string preset;
  std::string out;
  std::string format;
  std::string trace;
  bool simulate = false;
};

void check_output_path(const std::string& path)
{
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw ConfigError("output directory '" + parent.string() + "' does not exist");
  }
}

ExperimentConfig assemble(const Flags& f)
{
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.protocol.empty()) {
    cfg.protocol = parse_protocol(f.protocol);
  }
  if (f.lambda) {
    if (!(*f.lambda >= 0.0 && *f.lambda <= 1.0)) {
      throw ConfigError("--lambda must lie in [0, 1]");
    }
    cfg.lambda = *f.lambda;
  }
  auto& s = cfg.simulation;
  if (f.slots) {
    s.slots = *f.slots;
  }
  if (f.seed) {
    s.seed = *f.seed;
  }
  if (f.seeds) {
    s.seeds = *f.seeds;
  }
  if (f.resolution) {
    s.resolution = *f.resolution;
  }
  if (s.slots < 1) {
    throw ConfigError("slots must be at least 1");
  }
  if (s.seeds < 1) {
    throw ConfigError("seeds must be at least 1");
  }
  if (!(s.resolution > 0.0)) {
    throw ConfigError("resolution must be positive");
  }
  if (!f.mode.empty()) {
    cfg.fidelity = parse_fidelity(f.mode);
  }
  if (!f.preset.empty()) {
    cfg.grid = preset_grid(f.preset);
  }
  if (f.simulate && cfg.grid) {
    cfg.grid->simulate = true;
  }
  if (!f.out.empty()) {
    cfg.output_path = f.out;
  }
  if (!f.format.empty()) {
    cfg.format = parse_output_format(f.format);
  }
  if (cfg.output_path) {
    check_output_path(*cfg.output_path);
  }
  if (!f.trace.empty()) {
    check_output_path(f.trace);
  }
  return cfg;
}

void emit(const ExperimentConfig& cfg, const Table& table, const std::string& command, std::ostream& out)
{
  const Provenance prov{fnv1a_hex(cfg.canonical()), cfg.simulation.seed, std::string(version_string()), command};
  std::ostringstream buf;
  write_table(buf, table, cfg.format, prov);
  if (!cfg.output_path) {
    out << buf.str();
    return;
  }
  std::ofstream file{*cfg.output_path, std::ios::binary | std::ios::trunc};
  if (!file || !(file << buf.str())) {
    throw std::runtime_error("cannot write '" + *cfg.output_path + "'");
  }
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Stable-throughput analysis and simulation of relay-assisted multicast"};
  app.name("netcoop");
  app.set_version_flag("--version", std::string(version_string()));
  app.require_subcommand(1);

  Flags f;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "write results here instead of stdout");
    sub->add_option("--format", f.format, "csv or records");
    sub->add_option("--mode", f.mode, "faithful or mechanistic");
  };
  const auto add_simulation = [&](CLI::App* sub) {
    sub->add_option("--slots", f.slots, "slots per run");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--seeds", f.seeds, "independent runs per probe");
  };

  auto* analytic = app.add_subcommand("analytic", "closed-form maximum stable throughput");
  add_common(analytic);
  analytic->add_option("--protocol", f.protocol, "A, B, C or D; all applicable when omitted");

  auto* simulate = app.add_subcommand("simulate", "run the slotted simulator at a fixed arrival rate");
  add_common(simulate);
  add_simulation(simulate);
  simulate->add_option("--protocol", f.protocol, "A, B, C or D");
  simulate->add_option("--lambda", f.lambda, "arrival rate per slot");
  simulate->add_option("--trace", f.trace, "write the decimated queue trace as CSV");

  auto* bisect = app.add_subcommand("find-lambda-max", "bisect the arrival rate on the drift test");
  add_common(bisect);
  add_simulation(bisect);
  bisect->add_option("--protocol", f.protocol, "A, B, C or D");
  bisect->add_option("--resolution", f.resolution, "bracket half-width");

  auto* sweep = app.add_subcommand("sweep", "evaluate a preset or [grid] over its cross-product");
  add_common(sweep);
  add_simulation(sweep);
  sweep->add_option("--preset", f.preset, "fig2, fig3 or fig4");
  sweep->add_option("--resolution", f.resolution, "bracket half-width of simulated points");
  sweep->add_flag("--simulate", f.simulate, "also bisect every point by simulation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    const auto cfg = assemble(f);
    if (analytic->parsed()) {
      emit(cfg, analytic_table(cfg), "analytic", out);
    } else if (simulate->parsed()) {
      std::ostringstream trace;
      const auto table = simulate_table(cfg, f.trace.empty() ? nullptr : &trace);
      emit(cfg, table, "simulate", out);
      if (!f.trace.empty()) {
        std::ofstream file{f.trace, std::ios::binary | std::ios::trunc};
        if (!file || !(file << trace.str())) {
          throw std::runtime_error("cannot write '" + f.trace + "'");
        }
      }
    } else if (bisect->parsed()) {
      emit(cfg, lambda_table(cfg), "find-lambda-max", out);
    } else {
      emit(cfg, sweep_table(cfg), "sweep", out);
    }
  } catch (const ValidationError& e) {
    err << "netcoop: error: " << e.what() << '\n';
    return exit_validation;
  } catch (const EnumerationOverflow& e) {
    err << "netcoop: error: " << e.what() << '\n';
    return exit_enumeration_overflow;
  } catch (const sim::BisectionFailure& e) {
    err << "netcoop: error: " << e.what() << '\n';
    return exit_bisection_failure;
  } catch (const std::exception& e) {
    err << "netcoop: error: " << e.what() << '\n';
    return exit_failure;
  }
  return exit_ok;
}

} // namespace netcoop::cli
