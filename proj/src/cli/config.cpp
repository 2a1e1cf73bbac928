#include "netcoop/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "netcoop/cli/output.hpp"

namespace netcoop::cli {

namespace {

std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s)
{
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct Entry
{
  std::string value;
  std::size_t line = 0;
};

struct Section
{
  std::size_t line = 0;
  std::map<std::string, Entry> entries;
};

const std::map<std::string, std::set<std::string>>& schema()
{
  static const std::map<std::string, std::set<std::string>> s = {
    {"network", {"n", "f_sd", "f_sr", "f_rd", "lambda"}},
    {"coding", {"q", "k"}},
    {"protocol", {"name", "mode"}},
    {"series", {"rel_tol", "max_terms", "joint_state_cap"}},
    {"simulation", {"slots", "seeds", "seed", "resolution", "drift_factor", "max_retries", "lo", "hi", "trace_samples"}},
    {"output", {"path", "format"}},
    {"grid", {"preset", "n", "p", "pr", "f_sr", "q", "k", "protocols", "simulate"}},
  };
  return s;
}

/// Reads values of one section with line-numbered errors.
class SectionReader
{
public:
  SectionReader(std::string_view source, std::string name, const Section& section)
    : m_source{source}
    , m_name{std::move(name)}
    , m_section{section}
  {}

  bool has(const std::string& key) const { return m_section.entries.count(key) != 0; }

  std::size_t line_of(const std::string& key) const
  {
    const auto it = m_section.entries.find(key);
    return it == m_section.entries.end() ? m_section.line : it->second.line;
  }

  const Entry& require(const std::string& key) const
  {
    const auto it = m_section.entries.find(key);
    if (it == m_section.entries.end()) {
      throw ConfigError(m_source, m_section.line, "[" + m_name + "] is missing required key '" + key + "'");
    }
    return it->second;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const
  {
    throw ConfigError(m_source, line_of(key), "[" + m_name + "] " + key + ": " + message);
  }

  [[noreturn]] void section_error(const std::string& message) const
  {
    throw ConfigError(m_source, m_section.line, "[" + m_name + "] " + message);
  }

  double number(const std::string& key) const { return parse_double(key, require(key).value); }

  double probability(const std::string& key) const
  {
    const double v = number(key);
    check_probability(key, v);
    return v;
  }

  template <typename Int>
  Int integer(const std::string& key) const
  {
    return parse_int<Int>(key, require(key).value);
  }

  std::string text(const std::string& key) const { return std::string(trim(require(key).value)); }

  std::vector<std::string> list(const std::string& key) const
  {
    std::vector<std::string> out;
    std::string_view rest = require(key).value;
    while (true) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      if (item.empty()) {
        fail(key, "empty list element");
      }
      out.emplace_back(item);
      if (comma == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    return out;
  }

  std::vector<double> number_list(const std::string& key) const
  {
    std::vector<double> out;
    for (const auto& item : list(key)) {
      out.push_back(parse_double(key, item));
    }
    return out;
  }

  std::vector<double> probability_list(const std::string& key) const
  {
    auto out = number_list(key);
    for (const double v : out) {
      check_probability(key, v);
    }
    return out;
  }

  template <typename Int>
  std::vector<Int> integer_list(const std::string& key) const
  {
    std::vector<Int> out;
    for (const auto& item : list(key)) {
      out.push_back(parse_int<Int>(key, item));
    }
    return out;
  }

  bool boolean(const std::string& key) const
  {
    const auto v = lower(text(key));
    if (v == "true" || v == "yes" || v == "1") {
      return true;
    }
    if (v == "false" || v == "no" || v == "0") {
      return false;
    }
    fail(key, "expected true or false, got '" + v + "'");
  }

private:
  double parse_double(const std::string& key, std::string_view raw) const
  {
    const auto s = trim(raw);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail(key, "'" + std::string(s) + "' is not a finite number");
    }
    return v;
  }

  template <typename Int>
  Int parse_int(const std::string& key, std::string_view raw) const
  {
    const auto s = trim(raw);
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      fail(key, "'" + std::string(s) + "' is not a non-negative integer");
    }
    return v;
  }

  void check_probability(const std::string& key, double v) const
  {
    if (!(v >= 0.0 && v <= 1.0)) {
      fail(key, format_number(v) + " is not a probability in [0, 1]");
    }
  }

  std::string_view m_source;
  std::string m_name;
  const Section& m_section;
};

std::map<std::string, Section> tokenize(std::string_view text, std::string_view source)
{
  std::map<std::string, Section> sections;
  Section* current = nullptr;
  std::string current_name;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(source, line_no, "unterminated section header");
      }
      current_name = lower(trim(line.substr(1, line.size() - 2)));
      if (schema().count(current_name) == 0) {
        throw ConfigError(source, line_no, "unknown section [" + current_name + "]");
      }
      if (sections.count(current_name) != 0) {
        throw ConfigError(source, line_no, "duplicate section [" + current_name + "]");
      }
      current = &sections[current_name];
      current->line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source, line_no, "expected 'key = value'");
    }
    if (current == nullptr) {
      throw ConfigError(source, line_no, "key outside of any section");
    }
    const auto key = lower(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(source, line_no, "empty key");
    }
    if (schema().at(current_name).count(key) == 0) {
      throw ConfigError(source, line_no, "unknown key '" + key + "' in [" + current_name + "]");
    }
    if (value.empty()) {
      throw ConfigError(source, line_no, "key '" + key + "' has no value");
    }
    if (!current->entries.emplace(key, Entry{std::string(value), line_no}).second) {
      throw ConfigError(source, line_no, "duplicate key '" + key + "' in [" + current_name + "]");
    }
  }
  return sections;
}

/// A list of one value stands for every destination.
std::vector<double> per_destination(const SectionReader& r, const std::string& key, unsigned n)
{
  auto values = r.probability_list(key);
  if (values.size() == 1) {
    values.assign(n, values.front());
  }
  if (values.size() != n) {
    r.fail(key, "expected 1 or n=" + std::to_string(n) + " values, got " + std::to_string(values.size()));
  }
  return values;
}

NetworkConfig read_network(const SectionReader& r)
{
  NetworkConfig cfg;
  cfg.n = r.integer<unsigned>("n");
  if (cfg.n < 1 || cfg.n > max_enumerated_destinations) {
    r.fail("n", "must lie in [1, " + std::to_string(max_enumerated_destinations) + "]");
  }
  cfg.f_sd = per_destination(r, "f_sd", cfg.n);
  cfg.f_sr = r.probability("f_sr");
  cfg.f_rd = per_destination(r, "f_rd", cfg.n);
  return cfg;
}

GridSpec read_grid(const SectionReader& r)
{
  if (r.has("preset")) {
    for (const char* key : {"n", "p", "pr", "f_sr", "q", "k", "protocols"}) {
      if (r.has(key)) {
        r.fail(key, "cannot be combined with a preset");
      }
    }
    GridSpec g;
    try {
      g = preset_grid(r.text("preset"));
    } catch (const ValidationError& e) {
      r.fail("preset", e.what());
    }
    if (r.has("simulate")) {
      g.simulate = r.boolean("simulate");
    }
    return g;
  }
  GridSpec g;
  g.name = "grid";
  g.n = r.integer_list<unsigned>("n");
  g.p = r.probability_list("p");
  g.pr = r.probability_list("pr");
  g.f_sr = r.probability_list("f_sr");
  for (const auto& name : r.list("protocols")) {
    try {
      g.protocols.push_back(parse_protocol(name));
    } catch (const ValidationError& e) {
      r.fail("protocols", e.what());
    }
  }
  const bool coded = std::any_of(g.protocols.begin(), g.protocols.end(), [](sim::Protocol p) {
    return p == sim::Protocol::source_rlnc || p == sim::Protocol::cooperation_nc;
  });
  if (coded || r.has("q") || r.has("k")) {
    g.q = r.integer_list<std::uint32_t>("q");
    g.k = r.integer_list<std::size_t>("k");
  }
  if (r.has("simulate")) {
    g.simulate = r.boolean("simulate");
  }
  try {
    g.validate();
  } catch (const ConfigError& e) {
    r.section_error(e.what());
  }
  return g;
}

} // namespace

ConfigError::ConfigError(std::string_view source, std::size_t line, const std::string& message)
  : ValidationError(std::string(source) + ":" + std::to_string(line) + ": " + message)
{}

ConfigError::ConfigError(const std::string& message)
  : ValidationError(message)
{}

std::string_view to_string(OutputFormat f) noexcept { return f == OutputFormat::records ? "records" : "csv"; }

OutputFormat parse_output_format(std::string_view s)
{
  const auto v = lower(s);
  if (v == "csv") {
    return OutputFormat::csv;
  }
  if (v == "records") {
    return OutputFormat::records;
  }
  throw ConfigError("unknown output format '" + std::string(s) + "' (expected csv or records)");
}

sim::Protocol parse_protocol(std::string_view s)
{
  const auto v = lower(s);
  if (v == "a") {
    return sim::Protocol::prp;
  }
  if (v == "b") {
    return sim::Protocol::source_rlnc;
  }
  if (v == "c") {
    return sim::Protocol::cooperation;
  }
  if (v == "d") {
    return sim::Protocol::cooperation_nc;
  }
  throw ConfigError("unknown protocol '" + std::string(s) + "' (expected A, B, C or D)");
}

sim::Fidelity parse_fidelity(std::string_view s)
{
  const auto v = lower(s);
  if (v == "faithful") {
    return sim::Fidelity::formula_faithful;
  }
  if (v == "mechanistic") {
    return sim::Fidelity::mechanistic;
  }
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected faithful or mechanistic)");
}

sim::BisectionOptions SimulationSettings::bisection() const
{
  sim::BisectionOptions o;
  o.lo = lo;
  o.hi = hi;
  o.slots = slots;
  o.seeds = seeds;
  o.resolution = resolution;
  o.drift_factor = drift_factor;
  o.max_retries = max_retries;
  o.seed = seed;
  return o;
}

void GridSpec::validate() const
{
  const auto fail = [](const std::string& axis, const std::string& why) {
    throw ConfigError("grid axis '" + axis + "': " + why);
  };
  const auto probabilities = [&](const std::string& axis, const std::vector<double>& v) {
    if (v.empty()) {
      fail(axis, "is empty");
    }
    for (const double x : v) {
      if (!(x >= 0.0 && x <= 1.0)) {
        fail(axis, format_number(x) + " is not a probability in [0, 1]");
      }
    }
  };
  if (n.empty()) {
    fail("n", "is empty");
  }
  for (const unsigned v : n) {
    if (v < 1 || v > max_enumerated_destinations) {
      fail("n", std::to_string(v) + " is outside [1, " + std::to_string(max_enumerated_destinations) + "]");
    }
  }
  probabilities("p", p);
  probabilities("pr", pr);
  probabilities("f_sr", f_sr);
  if (protocols.empty()) {
    fail("protocols", "is empty");
  }
  const bool coded = std::any_of(protocols.begin(), protocols.end(), [](sim::Protocol pr) {
    return pr == sim::Protocol::source_rlnc || pr == sim::Protocol::cooperation_nc;
  });
  if (coded) {
    if (q.empty()) {
      fail("q", "is required by coded protocols");
    }
    if (k.empty()) {
      fail("k", "is required by coded protocols");
    }
    for (const auto v : q) {
      try {
        galois::FieldSpec{v};
      } catch (const ValidationError& e) {
        fail("q", e.what());
      }
    }
    for (const auto v : k) {
      if (v < 1) {
        fail("k", "generation size must be at least 1");
      }
    }
  }
}

GridSpec preset_grid(std::string_view name)
{
  using sim::Protocol;
  GridSpec g;
  g.name = lower(name);
  if (g.name == "fig2") {
    g.n = {2, 4};
    g.p = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    g.pr = {0.9};
    g.f_sr = {0.8};
    g.q = {16};
    g.k = {3};
    g.protocols = {Protocol::prp, Protocol::source_rlnc, Protocol::cooperation};
  } else if (g.name == "fig3" || g.name == "fig4") {
    g.n = {2, 4};
    g.p = {0.3};
    g.pr = {0.8};
    g.f_sr = {0.8};
    g.q = {2, 4, 16};
    g.k = {1, 2, 3};
    g.protocols = {Protocol::cooperation, Protocol::cooperation_nc};
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected fig2, fig3 or fig4)");
  }
  return g;
}

std::string ExperimentConfig::canonical() const
{
  std::ostringstream os;
  if (network) {
    os << "network.n=" << network->n << '\n'
       << "network.f_sd=" << format_list(network->f_sd) << '\n'
       << "network.f_sr=" << format_number(network->f_sr) << '\n'
       << "network.f_rd=" << format_list(network->f_rd) << '\n';
  }
  if (lambda) {
    os << "network.lambda=" << format_number(*lambda) << '\n';
  }
  if (nc) {
    os << "coding.q=" << nc->q << "\ncoding.k=" << nc->k << '\n';
  }
  if (protocol) {
    os << "protocol.name=" << sim::protocol_letter(*protocol) << '\n';
  }
  os << "protocol.mode=" << sim::to_string(fidelity) << '\n'
     << "series.rel_tol=" << format_number(series.rel_tol) << '\n'
     << "series.max_terms=" << series.max_terms << '\n'
     << "series.joint_state_cap=" << format_number(joint_state_cap) << '\n'
     << "simulation.slots=" << simulation.slots << '\n'
     << "simulation.seeds=" << simulation.seeds << '\n'
     << "simulation.seed=" << simulation.seed << '\n'
     << "simulation.resolution=" << format_number(simulation.resolution) << '\n'
     << "simulation.drift_factor=" << format_number(simulation.drift_factor) << '\n'
     << "simulation.max_retries=" << simulation.max_retries << '\n'
     << "simulation.lo=" << format_number(simulation.lo) << '\n'
     << "simulation.hi=" << format_number(simulation.hi) << '\n'
     << "simulation.trace_samples=" << simulation.trace_samples << '\n';
  if (grid) {
    const auto join = [&](const auto& v, auto fmt) {
      std::string out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i ? ";" : "") + fmt(v[i]);
      }
      return out;
    };
    const auto num = [](double x) { return format_number(x); };
    const auto integer = [](auto x) { return std::to_string(x); };
    os << "grid.name=" << grid->name << '\n'
       << "grid.n=" << join(grid->n, integer) << '\n'
       << "grid.p=" << join(grid->p, num) << '\n'
       << "grid.pr=" << join(grid->pr, num) << '\n'
       << "grid.f_sr=" << join(grid->f_sr, num) << '\n'
       << "grid.q=" << join(grid->q, integer) << '\n'
       << "grid.k=" << join(grid->k, integer) << '\n'
       << "grid.protocols="
       << join(grid->protocols, [](sim::Protocol p) { return std::string(sim::protocol_letter(p)); }) << '\n'
       << "grid.simulate=" << (grid->simulate ? "true" : "false") << '\n';
  }
  return os.str();
}

ExperimentConfig parse_config(std::string_view text, std::string_view source)
{
  const auto sections = tokenize(text, source);
  const auto reader = [&](const std::string& name) -> std::optional<SectionReader> {
    const auto it = sections.find(name);
    if (it == sections.end()) {
      return std::nullopt;
    }
    return SectionReader{source, name, it->second};
  };

  ExperimentConfig cfg;
  if (const auto r = reader("network")) {
    cfg.network = read_network(*r);
    if (r->has("lambda")) {
      cfg.lambda = r->probability("lambda");
    }
  }
  if (const auto r = reader("coding")) {
    NcParams nc;
    nc.q = r->integer<std::uint32_t>("q");
    nc.k = r->integer<std::size_t>("k");
    try {
      nc.validate();
    } catch (const ValidationError& e) {
      r->fail(nc.k < 1 ? "k" : "q", e.what());
    }
    cfg.nc = nc;
  }
  if (const auto r = reader("protocol")) {
    if (r->has("name")) {
      try {
        cfg.protocol = parse_protocol(r->text("name"));
      } catch (const ValidationError& e) {
        r->fail("name", e.what());
      }
    }
    if (r->has("mode")) {
      try {
        cfg.fidelity = parse_fidelity(r->text("mode"));
      } catch (const ValidationError& e) {
        r->fail("mode", e.what());
      }
    }
  }
  if (const auto r = reader("series")) {
    if (r->has("rel_tol")) {
      cfg.series.rel_tol = r->number("rel_tol");
      if (!(cfg.series.rel_tol > 0.0)) {
        r->fail("rel_tol", "must be positive");
      }
    }
    if (r->has("max_terms")) {
      cfg.series.max_terms = r->integer<std::size_t>("max_terms");
      if (cfg.series.max_terms < 1) {
        r->fail("max_terms", "must be at least 1");
      }
    }
    if (r->has("joint_state_cap")) {
      cfg.joint_state_cap = r->number("joint_state_cap");
      if (!(cfg.joint_state_cap >= 1.0)) {
        r->fail("joint_state_cap", "must be at least 1");
      }
    }
  }
  if (const auto r = reader("simulation")) {
    auto& s = cfg.simulation;
    if (r->has("slots")) {
      s.slots = r->integer<std::uint64_t>("slots");
      if (s.slots < 1) {
        r->fail("slots", "must be at least 1");
      }
    }
    if (r->has("seeds")) {
      s.seeds = r->integer<unsigned>("seeds");
      if (s.seeds < 1) {
        r->fail("seeds", "must be at least 1");
      }
    }
    if (r->has("seed")) {
      s.seed = r->integer<std::uint64_t>("seed");
    }
    if (r->has("resolution")) {
      s.resolution = r->number("resolution");
      if (!(s.resolution > 0.0)) {
        r->fail("resolution", "must be positive");
      }
    }
    if (r->has("drift_factor")) {
      s.drift_factor = r->number("drift_factor");
      if (!(s.drift_factor > 0.0)) {
        r->fail("drift_factor", "must be positive");
      }
    }
    if (r->has("max_retries")) {
      s.max_retries = r->integer<unsigned>("max_retries");
    }
    if (r->has("lo")) {
      s.lo = r->probability("lo");
    }
    if (r->has("hi")) {
      s.hi = r->probability("hi");
    }
    if (!(s.lo < s.hi)) {
      r->fail(r->has("hi") ? "hi" : "lo", "bisection bounds need lo < hi");
    }
    if (r->has("trace_samples")) {
      s.trace_samples = r->integer<std::uint64_t>("trace_samples");
      if (s.trace_samples < 1) {
        r->fail("trace_samples", "must be at least 1");
      }
    }
  }
  if (const auto r = reader("output")) {
    if (r->has("path")) {
      cfg.output_path = r->text("path");
    }
    if (r->has("format")) {
      try {
        cfg.format = parse_output_format(r->text("format"));
      } catch (const ValidationError& e) {
        r->fail("format", e.what());
      }
    }
  }
  if (const auto r = reader("grid")) {
    cfg.grid = read_grid(*r);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string fnv1a_hex(std::string_view text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

} // namespace netcoop::cli
