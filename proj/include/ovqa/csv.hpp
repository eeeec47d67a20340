#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ovqa {

// Minimal CSV: comma-separated, no quoting, first row is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(std::istream& in);
CsvTable load_csv(const std::string& path);

std::vector<std::string> split_csv_line(const std::string& line);
std::string format_double(double v);

}  // namespace ovqa
