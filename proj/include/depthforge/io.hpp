#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "depthforge/types.hpp"

namespace depthforge {

struct CsvTable {
  Matrix values;
  std::vector<std::string> header;  // empty when the file has no header row
};

/// Comma-separated numeric table. Lines starting with '#' are comments; the
/// first data row is a header when any of its cells is non-numeric.
CsvTable load_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);

/// Parameter matrix whose first line is the shape comment "# p m" ("# p" for
/// a column vector).
Matrix load_parameter(const std::string& path);
Matrix parse_parameter(const std::string& text, const std::string& origin);

/// Shape comment followed by rows at full precision.
std::string format_parameter(const Matrix& m);

/// Shortest round-trip decimal form.
std::string format_number(double x);

using ConfigMap = std::map<std::string, std::string>;

/// Flat "key=value" lines with dotted keys; '#' lines are comments. When the
/// text holds echoed "# config.key=value" lines (a report or a fitted
/// parameter file), only those are read.
ConfigMap parse_config(const std::string& text, const std::string& origin);
ConfigMap load_config(const std::string& path);

/// "# config.key=value" lines, then a comma-separated table.
struct Report {
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(const std::string& field, const std::string& value);
  std::string render() const;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace depthforge
