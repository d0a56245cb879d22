#include "depthforge/io.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace depthforge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Parses a finite double occupying the whole cell.
bool parse_cell(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  errno = 0;
  char* end = nullptr;
  value = std::strtod(cell.c_str(), &end);
  return end == cell.c_str() + cell.size() && errno != ERANGE && std::isfinite(value);
}

bool looks_numeric(const std::string& cell) {
  double v = 0.0;
  if (parse_cell(cell, v)) return true;
  // nan/inf parse as numbers (and are then rejected with a location).
  char* end = nullptr;
  std::strtod(cell.c_str(), &end);
  return !cell.empty() && end == cell.c_str() + cell.size();
}

std::vector<std::pair<int, std::string>> content_lines(const std::string& text) {
  std::vector<std::pair<int, std::string>> out;
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.emplace_back(number, t);
  }
  return out;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file '" + path + "'");
  out << content;
  if (!out) throw ValidationError("failed while writing '" + path + "'");
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw ValidationError(origin + ": empty file (no data rows)");
  CsvTable table;
  std::size_t first = 0;
  {
    const auto cells = split_commas(lines[0].second);
    bool header = false;
    for (const auto& c : cells) header = header || !looks_numeric(c);
    if (header) {
      table.header = cells;
      first = 1;
    }
  }
  if (first == lines.size()) throw ValidationError(origin + ": header row but no data rows");
  const std::size_t cols = split_commas(lines[first].second).size();
  if (!table.header.empty() && table.header.size() != cols) {
    throw ValidationError(origin + ":" + std::to_string(lines[0].first) + ": header has " +
                          std::to_string(table.header.size()) + " columns but data rows have " +
                          std::to_string(cols));
  }
  table.values.resize(static_cast<Index>(lines.size() - first), static_cast<Index>(cols));
  for (std::size_t r = first; r < lines.size(); ++r) {
    const auto cells = split_commas(lines[r].second);
    const std::string where = origin + ":" + std::to_string(lines[r].first);
    if (cells.size() != cols) {
      throw ValidationError(where + ": ragged row with " + std::to_string(cells.size()) +
                            " columns, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_cell(cells[c], v)) {
        throw ValidationError(where + ": column " + std::to_string(c + 1) +
                              ": non-numeric or non-finite cell '" + cells[c] + "'");
      }
      table.values(static_cast<Index>(r - first), static_cast<Index>(c)) = v;
    }
  }
  return table;
}

CsvTable load_csv(const std::string& path) { return parse_csv(read_text_file(path), path); }

Matrix parse_parameter(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string first;
  std::getline(is, first);
  first = trim(first);
  if (first.empty() || first[0] != '#') {
    throw ValidationError(origin + ": missing '# p m' shape comment on the first line");
  }
  std::istringstream shape(first.substr(1));
  long p = 0;
  long m = 1;
  if (!(shape >> p) || p < 1) throw ValidationError(origin + ": malformed shape comment '" + first + "'");
  if (!(shape >> m)) m = 1;
  std::string extra;
  if (m < 1 || (shape >> extra)) throw ValidationError(origin + ": malformed shape comment '" + first + "'");
  const CsvTable table = parse_csv(text, origin);
  if (!table.header.empty()) throw ValidationError(origin + ": parameter files have no header row");
  const Matrix& v = table.values;
  if (v.rows() == p && v.cols() == m) return v;
  // A vector may also be written as a single row.
  if (m == 1 && v.rows() == 1 && v.cols() == p) return v.transpose();
  throw ValidationError(origin + ": shape comment says " + std::to_string(p) + " x " +
                        std::to_string(m) + " but the body is " + std::to_string(v.rows()) +
                        " x " + std::to_string(v.cols()));
}

Matrix load_parameter(const std::string& path) {
  return parse_parameter(read_text_file(path), path);
}

std::string format_number(double x) {
  if (x == 0.0) return "0";
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string format_parameter(const Matrix& m) {
  std::ostringstream os;
  os << "# " << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_number(m(i, j));
    }
    os << '\n';
  }
  return os.str();
}

ConfigMap parse_config(const std::string& text, const std::string& origin) {
  ConfigMap out;
  std::istringstream is(text);
  std::string line;
  int number = 0;
  const std::string echoed = "# config.";
  // A report (or fitted parameter file) carries its settings as echoed
  // comments; everything else in it is output.
  const bool report = text.rfind(echoed, 0) == 0 || text.find("\n" + echoed) != std::string::npos;
  while (std::getline(is, line)) {
    ++number;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind(echoed, 0) == 0) t = t.substr(echoed.size());
    else if (report || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ValidationError(where + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ValidationError(where + ": empty key");
    for (char c : key) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_')) {
        throw ValidationError(where + ": invalid key '" + key + "'");
      }
    }
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

ConfigMap load_config(const std::string& path) { return parse_config(read_text_file(path), path); }

void Report::add(const std::string& field, const std::string& value) {
  if (columns.empty()) columns = {"field", "value"};
  rows.push_back({field, value});
}

std::string Report::render() const {
  std::ostringstream os;
  for (const auto& [k, v] : config) os << "# config." << k << '=' << v << '\n';
  for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << columns[j];
  if (!columns.empty()) os << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
    os << '\n';
  }
  return os.str();
}

}  // namespace depthforge
