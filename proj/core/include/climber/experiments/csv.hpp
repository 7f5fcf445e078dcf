#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace climber::experiments {

// Minimal comma-separated table: one header row, no quoting. Fields must not
// contain commas or newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  // Index of a header column; throws FormatError when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;

  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  // Throws FormatError on ragged rows.
  static CsvTable read(std::istream& in);
  static CsvTable load(const std::filesystem::path& path);
};

// Shortest text that parses back to the same double; "nan" for NaN.
std::string format_number(double value);
double parse_number(const std::string& text);

}  // namespace climber::experiments
