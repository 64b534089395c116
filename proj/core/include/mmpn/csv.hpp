#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mmpn::csv {

// Minimal RFC-4180-ish CSV. Fields containing commas, quotes or newlines are
// quoted on write; quoted fields are unescaped on read. Row numbers are
// 1-based and include the header, so diagnostics match what an editor shows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; ValidationError when the column is absent.
  std::size_t col(const std::string& name) const;
};

Table read_file(const std::string& path);
Table parse(const std::string& text, const std::string& origin = "<memory>");
void write_file(const std::string& path, const Table& table);
std::string to_string(const Table& table);

// Field parsers with row-numbered diagnostics. `where` should read like
// "manifest.csv:17, column sphere_d".
double to_double(const std::string& field, const std::string& where);
std::int64_t to_int(const std::string& field, const std::string& where);
std::optional<double> to_optional_double(const std::string& field, const std::string& where);

std::string format_double(double v);   // shortest round-trip representation
std::string format_fixed(double v, int digits);

}  // namespace mmpn::csv
