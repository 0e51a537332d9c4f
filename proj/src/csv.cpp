#include "exconf/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "exconf/types.hpp"

namespace exconf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Eigen::Index CsvTable::col(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw ParseError("missing required column '" + name + "'");
  return static_cast<Eigen::Index>(it - header.begin());
}

bool CsvTable::has_col(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

double CsvTable::num(std::size_t row, Eigen::Index column) const {
  return parse_double(rows[row][static_cast<std::size_t>(column)]);
}

Eigen::VectorXd CsvTable::numeric_column(const std::string& name) const {
  const auto c = col(name);
  Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = num(i, c);
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("'" + path + "' is empty; a header row is required");
  table.header = split_row(line);
  if (table.header.empty() || table.header[0].empty())
    throw ParseError("'" + path + "' has an empty header");
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto row = split_row(line);
    if (row.size() != table.header.size())
      throw ParseError("'" + path + "': row with " +
                       std::to_string(row.size()) + " cells, expected " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  const std::string t = trim(token);
  if (t.empty()) throw ParseError("empty numeric cell");
  const char* begin = t.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + t.size())
    throw ParseError("not a number: '" + t + "'");
  return v;
}

}  // namespace exconf
