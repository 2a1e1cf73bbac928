#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "netcoop/cli/config.hpp"

namespace netcoop::cli {

/// Shortest decimal text that reads back to the same double.
std::string format_number(double x);

/// Values joined with ';' so that a list fits in one CSV field.
std::string format_list(const std::vector<double>& values);

/// One table cell; monostate renders as an empty CSV field or JSON null.
using Cell = std::variant<std::monostate, double, std::int64_t, std::string>;

struct Row
{
  std::vector<Cell> cells;
  /// Extra structured data carried only by the records format.
  nlohmann::json extra = nlohmann::json::object();
};

struct Table
{
  std::string kind; ///< record type, e.g. "analytic"
  std::vector<std::string> header;
  std::vector<Row> rows;
};

struct Provenance
{
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::string command;
};

/// Header line then one line per row, fields quoted only when needed.
void write_csv(std::ostream& os, const Table& table);

/// One JSON object per line: {"kind", "provenance", "result"}.
void write_records(std::ostream& os, const Table& table, const Provenance& prov);

void write_table(std::ostream& os, const Table& table, OutputFormat format, const Provenance& prov);

/// The build's version string.
std::string_view version_string() noexcept;

} // namespace netcoop::cli
