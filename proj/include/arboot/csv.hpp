#pragma once

// CSV ingestion for the command-line surface: header row, comma separated,
// '.' decimal separator, roles resolved by column name or prefix pattern.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "arboot/errors.hpp"
#include "arboot/projection.hpp"

namespace arboot {

struct ColumnRoles {
  std::string outcome;
  std::string endogenous;
  std::vector<std::string> controls;
  std::vector<std::string> instruments;  // names, or a single "prefix:<p>"
  bool add_intercept = false;
};

struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;  // rows x columns

  Eigen::Index column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw MissingColumn("column '" + name + "' not found");
    return static_cast<Eigen::Index>(it - header.begin());
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  CsvTable table;
  table.header = split_csv_line(line);

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != table.header.size())
      throw ParseError("row " + std::to_string(lineno) + ": expected " +
                       std::to_string(table.header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        std::size_t used = 0;
        row[c] = std::stod(fields[c], &used);
        if (used != fields[c].size()) throw std::invalid_argument(fields[c]);
      } catch (const std::exception&) {
        throw ParseError("row " + std::to_string(lineno) + ", column '" +
                         table.header[c] + "': not a number");
      }
      if (!std::isfinite(row[c]))
        throw NonFinite("row " + std::to_string(lineno) + ", column '" +
                        table.header[c] + "': non-finite value");
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
  return table;
}

inline std::vector<std::string> resolve_instruments(const CsvTable& table,
                                                    const ColumnRoles& roles) {
  if (roles.instruments.size() == 1 &&
      roles.instruments[0].rfind("prefix:", 0) == 0) {
    const std::string prefix = roles.instruments[0].substr(7);
    std::vector<std::string> names;
    for (const auto& h : table.header)
      if (h.rfind(prefix, 0) == 0) names.push_back(h);
    if (names.empty())
      throw MissingColumn("no column matches instrument prefix '" + prefix + "'");
    return names;
  }
  return roles.instruments;
}

inline RawSample ingest_csv(const std::string& path, const ColumnRoles& roles) {
  const CsvTable table = read_csv(path);
  const Eigen::Index n = table.values.rows();
  RawSample raw;
  raw.Y = table.values.col(table.column(roles.outcome));
  raw.X = table.values.col(table.column(roles.endogenous));

  const auto iv_names = resolve_instruments(table, roles);
  raw.Z.resize(n, static_cast<Eigen::Index>(iv_names.size()));
  for (std::size_t j = 0; j < iv_names.size(); ++j)
    raw.Z.col(static_cast<Eigen::Index>(j)) =
        table.values.col(table.column(iv_names[j]));

  const Eigen::Index L =
      static_cast<Eigen::Index>(roles.controls.size()) + (roles.add_intercept ? 1 : 0);
  raw.W.resize(n, L);
  for (std::size_t j = 0; j < roles.controls.size(); ++j)
    raw.W.col(static_cast<Eigen::Index>(j)) =
        table.values.col(table.column(roles.controls[j]));
  if (roles.add_intercept) raw.W.col(L - 1).setOnes();
  return raw;
}

inline void write_raw_sample_csv(const RawSample& raw, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "y,x";
  for (Eigen::Index j = 0; j < raw.W.cols(); ++j) out << ",w" << j;
  for (Eigen::Index j = 0; j < raw.Z.cols(); ++j) out << ",z" << j;
  out << "\n";
  for (Eigen::Index i = 0; i < raw.Y.size(); ++i) {
    out << raw.Y(i) << "," << raw.X(i);
    for (Eigen::Index j = 0; j < raw.W.cols(); ++j) out << "," << raw.W(i, j);
    for (Eigen::Index j = 0; j < raw.Z.cols(); ++j) out << "," << raw.Z(i, j);
    out << "\n";
  }
}

}  // namespace arboot
