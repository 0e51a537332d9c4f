#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace exconf {

/// Header-mandatory CSV with string cells; numeric access parses on demand.
/// "inf"/"-inf" are valid numeric tokens.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Eigen::Index col(const std::string& name) const;  // throws ParseError
  bool has_col(const std::string& name) const;
  double num(std::size_t row, Eigen::Index column) const;
  Eigen::VectorXd numeric_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

/// Shortest round-trip decimal; infinities as "inf"/"-inf".
std::string format_double(double v);

double parse_double(const std::string& token);  // throws ParseError

}  // namespace exconf
