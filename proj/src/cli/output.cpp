#include "netcoop/cli/output.hpp"

#include <array>
#include <charconv>
#include <cmath>

#ifndef NETCOOP_VERSION_STRING
#define NETCOOP_VERSION_STRING "unknown"
#endif

namespace netcoop::cli {

namespace {

std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + "\"";
}

std::string render(const Cell& cell)
{
  struct Visitor
  {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(double x) const { return format_number(x); }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, cell);
}

nlohmann::json to_json(const Cell& cell)
{
  struct Visitor
  {
    nlohmann::json operator()(std::monostate) const { return nullptr; }
    nlohmann::json operator()(double x) const
    {
      // JSON has no infinity; keep the shortest text for finite values.
      if (!std::isfinite(x)) {
        return format_number(x);
      }
      return x;
    }
    nlohmann::json operator()(std::int64_t x) const { return x; }
    nlohmann::json operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, cell);
}

} // namespace

std::string format_number(double x)
{
  if (std::isnan(x)) {
    return "nan";
  }
  if (std::isinf(x)) {
    return x > 0 ? "inf" : "-inf";
  }
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::string format_list(const std::vector<double>& values)
{
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      out += ';';
    }
    out += format_number(values[i]);
  }
  return out;
}

void write_csv(std::ostream& os, const Table& table)
{
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    os << (i ? "," : "") << csv_field(table.header[i]);
  }
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.cells.size(); ++i) {
      os << (i ? "," : "") << csv_field(render(row.cells[i]));
    }
    os << '\n';
  }
}

void write_records(std::ostream& os, const Table& table, const Provenance& prov)
{
  const nlohmann::json provenance = {
    {"config_hash", prov.config_hash},
    {"seed", prov.seed},
    {"version", prov.version},
    {"command", prov.command},
  };
  for (const auto& row : table.rows) {
    nlohmann::json result = nlohmann::json::object();
    for (std::size_t i = 0; i < table.header.size() && i < row.cells.size(); ++i) {
      result[table.header[i]] = to_json(row.cells[i]);
    }
    for (const auto& [key, value] : row.extra.items()) {
      result[key] = value;
    }
    const nlohmann::json record = {{"kind", table.kind}, {"provenance", provenance}, {"result", result}};
    os << record.dump() << '\n';
  }
}

void write_table(std::ostream& os, const Table& table, OutputFormat format, const Provenance& prov)
{
  if (format == OutputFormat::records) {
    write_records(os, table, prov);
  } else {
    write_csv(os, table);
  }
}

std::string_view version_string() noexcept { return NETCOOP_VERSION_STRING; }

} // namespace netcoop::cli
