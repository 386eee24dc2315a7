#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cellomaps::csv {

using Row = std::vector<std::string>;

/// RFC 4180 quoting only where a field needs it.
std::string format_row(const Row& fields);
Row parse_line(std::string_view line);

struct Table {
  Row header;
  std::vector<Row> rows;

  /// Column index by name; throws MalformedInput if absent.
  std::size_t column(std::string_view name) const;
};

/// First line is the header. Blank lines are skipped.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text);
void write(const std::filesystem::path& path, const Table& table);
std::string to_string(const Table& table);

double to_double(const std::string& field);
long long to_int(const std::string& field);

}  // namespace cellomaps::csv
