#include "climber/experiments/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "climber/errors.hpp"

namespace climber::experiments {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

void write_line(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].find_first_of(",\n\r") != std::string::npos) {
      throw FormatError(fmt::format("csv field '{}' contains a separator", fields[i]));
    }
    if (i > 0) out << ',';
    out << fields[i];
  }
  out << '\n';
}

}  // namespace

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw FormatError(fmt::format("csv row has {} fields, header has {}", row.size(), header.size()));
  }
  rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError(fmt::format("csv has no column '{}'", name));
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_number(rows.at(row).at(column(name)));
}

void CsvTable::write(std::ostream& out) const {
  write_line(out, header);
  for (const auto& row : rows) write_line(out, row);
}

void CsvTable::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write(out);
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

CsvTable CsvTable::read(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv is empty");
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != table.header.size()) {
      throw FormatError(fmt::format("csv row {} has {} fields, header has {}", table.rows.size() + 1, fields.size(),
                                    table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

CsvTable CsvTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return read(in);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  return fmt::format("{}", value);
}

double parse_number(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError(fmt::format("'{}' is not a number", text));
  }
  return value;
}

}  // namespace climber::experiments
