#include "cellomaps/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cellomaps/error.hpp"

namespace cellomaps::csv {

std::string format_row(const Row& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      out += f;
      continue;
    }
    out += '"';
    for (char ch : f) {
      if (ch == '"') out += '"';
      out += ch;
    }
    out += '"';
  }
  return out;
}

Row parse_line(std::string_view line) {
  Row fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (quoted) throw Error(ErrorCode::MalformedInput, "unterminated quote in CSV line");
  fields.push_back(std::move(cur));
  return fields;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error(ErrorCode::MalformedInput, "CSV is missing column '" + std::string(name) + "'");
}

Table parse(std::string_view text) {
  Table t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty() || line == "\r") continue;
    auto row = parse_line(line);
    if (first) {
      t.header = std::move(row);
      first = false;
    } else {
      if (row.size() != t.header.size()) {
        throw Error(ErrorCode::MalformedInput, "CSV row has " + std::to_string(row.size()) + " fields, header has " +
                                                   std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(row));
    }
  }
  if (first) throw Error(ErrorCode::MalformedInput, "CSV has no header");
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string to_string(const Table& table) {
  std::string out = format_row(table.header) + '\n';
  for (const auto& r : table.rows) out += format_row(r) + '\n';
  return out;
}

void write(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_string(table);
}

double to_double(const std::string& field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::MalformedInput, "not a number: '" + field + "'");
  }
}

long long to_int(const std::string& field) {
  long long v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(ErrorCode::MalformedInput, "not an integer: '" + field + "'");
  return v;
}

}  // namespace cellomaps::csv
