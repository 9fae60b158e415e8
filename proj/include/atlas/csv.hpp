#pragma once

// Minimal locale-independent CSV: ',' separator, '.' decimal point, no quoting.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace atlas::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// 17 significant digits, round-trips every double.
std::string format_double(double x);
double parse_double(std::string_view s);
long parse_long(std::string_view s);

std::vector<std::string> split_line(std::string_view line);
Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

}  // namespace atlas::csv
