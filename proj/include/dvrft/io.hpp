#pragma once

/// @file
/// File formats: SignalRecord CSV (`t,value`), transfer function and
/// state-space JSON, dense matrix CSV.

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dvrft/lti.hpp"

namespace dvrft::io {

using nlohmann::json;

/// Next line that is neither empty nor a '#' comment, without a trailing CR.
inline bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() != '#') return true;
  }
  return false;
}

inline SignalRecord read_signal_csv(std::istream& in, const std::string& label = {}) {
  std::string line;
  if (!next_data_line(in, line)) throw PreconditionError("signal CSV: empty input");
  if (line != "t,value") throw PreconditionError("signal CSV: header must be 't,value', got '" + line + "'");
  std::vector<double> t, v;
  std::size_t row = 1;
  while (next_data_line(in, line)) {
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw PreconditionError("signal CSV: missing comma on line " + std::to_string(row));
    try {
      t.push_back(std::stod(line.substr(0, comma)));
      v.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw PreconditionError("signal CSV: unparsable number on line " + std::to_string(row));
    }
  }
  if (t.size() < 2) throw PreconditionError("signal CSV: at least two rows are needed to infer Ts");
  const double ts = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(ts > 0.0)) throw PreconditionError("signal CSV: time column must increase");
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double expected = t.front() + ts * static_cast<double>(i);
    if (std::abs(t[i] - expected) > 1e-9 * (std::abs(expected) + ts))
      throw PreconditionError("signal CSV: time column is not uniform at row " + std::to_string(i + 2));
  }
  return {std::move(v), ts, label};
}

inline SignalRecord read_signal_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path);
  return read_signal_csv(in, path);
}

inline void write_signal_csv(std::ostream& out, const SignalRecord& s) {
  out << "t,value\n";
  out.precision(17);
  for (std::size_t i = 0; i < s.size(); ++i) out << static_cast<double>(i) * s.ts() << ',' << s[i] << '\n';
}

inline void write_signal_csv(const std::string& path, const SignalRecord& s) {
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write " + path);
  write_signal_csv(out, s);
}

inline Domain parse_domain(const std::string& s) {
  if (s == "continuous") return Domain::continuous;
  if (s == "discrete") return Domain::discrete;
  throw PreconditionError("unknown domain '" + s + "'");
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows_if_empty, Eigen::Index cols_if_empty) {
  if (!j.is_array()) throw PreconditionError("matrix JSON must be an array of rows");
  if (j.empty()) return Eigen::MatrixXd(rows_if_empty, cols_if_empty);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols) throw DimensionError("matrix JSON rows differ in length");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

inline json to_json(const TransferFunction& tf) {
  return {{"type", "transfer_function"},
          {"num", tf.num()},
          {"den", tf.den()},
          {"domain", to_string(tf.domain())},
          {"ts", tf.ts()}};
}

inline TransferFunction transfer_function_from_json(const json& j) {
  const Domain domain = parse_domain(j.at("domain").get<std::string>());
  auto num = j.at("num").get<std::vector<double>>();
  auto den = j.at("den").get<std::vector<double>>();
  if (domain == Domain::continuous) return TransferFunction::continuous(std::move(num), std::move(den));
  return TransferFunction::discrete(std::move(num), std::move(den), j.at("ts").get<double>());
}

inline json to_json(const StateSpace& ss) {
  return {{"type", "state_space"},
          {"A", matrix_to_json(ss.a())},
          {"B", matrix_to_json(ss.b())},
          {"C", matrix_to_json(ss.c())},
          {"D", matrix_to_json(ss.d())},
          {"domain", to_string(ss.domain())},
          {"ts", ss.ts()}};
}

inline StateSpace state_space_from_json(const json& j) {
  const Domain domain = parse_domain(j.at("domain").get<std::string>());
  const Eigen::MatrixXd d = matrix_from_json(j.at("D"), 0, 0);
  Eigen::MatrixXd a = matrix_from_json(j.at("A"), 0, 0);
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd b = matrix_from_json(j.at("B"), n, d.cols());
  Eigen::MatrixXd c = matrix_from_json(j.at("C"), d.rows(), n);
  return {a, b, c, d, domain, j.value("ts", 0.0)};
}

/// Dense matrix CSV with a header row of column names.
inline void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) out << (k ? "," : "") << m(i, k);
    out << '\n';
  }
}

inline Eigen::MatrixXd read_matrix_csv(std::istream& in, std::vector<std::string>* header = nullptr) {
  std::string line;
  if (!next_data_line(in, line)) throw PreconditionError("matrix CSV: empty input");
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (next_data_line(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    try {
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw PreconditionError("matrix CSV: unparsable number in '" + line + "'");
    }
    if (row.size() != names.size()) throw DimensionError("matrix CSV: row width differs from header");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = rows[i][k];
  if (header) *header = std::move(names);
  return m;
}

}  // namespace dvrft::io
