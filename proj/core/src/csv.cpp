#include "mmpn/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmpn/errors.hpp"

namespace mmpn::csv {

std::size_t Table::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ValidationError("missing CSV column '" + name + "'");
}

static bool needs_quoting(const std::string& f) {
  return f.find_first_of(",\"\n\r") != std::string::npos;
}

static void append_field(std::string& out, const std::string& f) {
  if (!needs_quoting(f)) {
    out += f;
    return;
  }
  out += '"';
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

std::string to_string(const Table& table) {
  std::string out;
  auto emit_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      append_field(out, row[i]);
    }
    out += '\n';
  };
  emit_row(table.header);
  for (const auto& r : table.rows) emit_row(r);
  return out;
}

void write_file(const std::string& path, const Table& table) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << to_string(table);
  if (!f) throw ValidationError("write failed: " + path);
}

Table parse(const std::string& text, const std::string& origin) {
  Table t;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_data = false;
  std::size_t line = 1;

  auto end_field = [&]() {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&]() {
    end_field();
    if (t.header.empty()) {
      t.header = row;
    } else {
      if (row.size() != t.header.size()) {
        throw ValidationError(origin + ":" + std::to_string(line) + ": expected " +
                              std::to_string(t.header.size()) + " fields, got " +
                              std::to_string(row.size()));
      }
      t.rows.push_back(row);
    }
    row.clear();
    row_has_data = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
        if (c == '\n') ++line;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_data = true;
        break;
      case ',':
        end_field();
        row_has_data = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_data || !field.empty() || !row.empty()) end_row();
        ++line;
        break;
      default:
        field += c;
        row_has_data = true;
        break;
    }
  }
  if (in_quotes) throw ValidationError(origin + ": unterminated quoted field");
  if (row_has_data || !field.empty() || !row.empty()) end_row();
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

double to_double(const std::string& field, const std::string& where) {
  if (field.empty()) throw ValidationError(where + ": empty numeric field");
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (errno != 0 || end == field.c_str() || *end != '\0') {
    throw ValidationError(where + ": bad number '" + field + "'");
  }
  if (!std::isfinite(v)) throw ValidationError(where + ": non-finite value '" + field + "'");
  return v;
}

std::int64_t to_int(const std::string& field, const std::string& where) {
  if (field.empty()) throw ValidationError(where + ": empty integer field");
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(field.c_str(), &end, 10);
  if (errno != 0 || end == field.c_str() || *end != '\0') {
    throw ValidationError(where + ": bad integer '" + field + "'");
  }
  return v;
}

std::optional<double> to_optional_double(const std::string& field, const std::string& where) {
  if (field.empty()) return std::nullopt;
  return to_double(field, where);
}

std::string format_double(double v) {
  char buf[40];
  // Shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace mmpn::csv
