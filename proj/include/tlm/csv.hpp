#pragma once

// Minimal RFC 4180 writer for numeric tables.

#include <string>
#include <vector>

namespace tlm {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(const std::vector<double>& values);
};

/// %.14e; NaN and infinities as "nan", "inf", "-inf".
std::string format_number(double x);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(const std::string& s);

std::string to_csv(const CsvTable& table);

/// Writes the table (header only when there are no rows). Throws IoError.
void write_csv(const CsvTable& table, const std::string& path);

/// Parses text produced by to_csv (quoted fields supported).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace tlm
