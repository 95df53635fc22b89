#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cfm {

// Minimal CSV: comma separated, optional double quotes, first line is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  // Parses cell (r, c) as a double; throws ValidationError with the location on failure.
  double number(std::size_t r, int c) const;
};

CsvTable read_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv_file(const std::filesystem::path& path);
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace cfm
