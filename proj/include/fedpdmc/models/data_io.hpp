#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpdmc/core.hpp"
#include "fedpdmc/skeleton_io.hpp"

namespace fedpdmc {

struct Table {
  std::vector<std::string> header;
  Mat rows;
};

inline void write_table_csv(std::ostream& out, const std::vector<std::string>& header, const Mat& rows) {
  detail::require(static_cast<Eigen::Index>(header.size()) == rows.cols(), ErrorCode::DimensionMismatch,
                  "header width differs from column count");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << format_double(rows(i, c));
    out << '\n';
  }
}

inline Table read_table_csv(std::istream& in) {
  Table table;
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)), ErrorCode::ParseError, "line 1: missing header");
  detail::strip_cr(line);
  table.header = detail::split_csv_line(line);
  std::vector<std::vector<double>> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    detail::require(cells.size() == table.header.size(), ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                        " fields, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& cell : cells) row.push_back(detail::parse_double(cell, line_no));
    values.push_back(std::move(row));
  }
  table.rows.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t c = 0; c < values[i].size(); ++c)
      table.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = values[i][c];
  return table;
}

inline Table read_table_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  detail::require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  try {
    return read_table_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

/// Column names for each model's worker data file.
inline std::vector<std::string> numbered_columns(const std::string& prefix, std::size_t first, std::size_t last) {
  std::vector<std::string> names;
  for (std::size_t i = first; i <= last; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

inline std::vector<std::string> gaussian_columns(std::size_t d) { return numbered_columns("y", 1, d); }
inline std::vector<std::string> logistic_columns(std::size_t d) {
  auto names = numbered_columns("xi", 1, d);
  names.push_back("eta");
  return names;
}
inline std::vector<std::string> ar1_columns(std::size_t steps) { return numbered_columns("y", 0, steps); }
inline std::vector<std::string> cox_columns() { return {"i", "j", "count"}; }

inline void require_columns(const Table& table, const std::vector<std::string>& expected, const std::string& what) {
  detail::require(table.header == expected, ErrorCode::ParseError,
                  what + ": unexpected header (expected " + std::to_string(expected.size()) + " columns starting '" +
                      (expected.empty() ? std::string() : expected.front()) + "')");
}

/// A data manifest: which file holds each worker's observations.
struct DataManifest {
  std::string model;
  nlohmann::json params = nlohmann::json::object();
  std::vector<std::filesystem::path> worker_files;  // relative to the manifest

  nlohmann::json to_json() const {
    nlohmann::json workers = nlohmann::json::array();
    for (std::size_t m = 0; m < worker_files.size(); ++m)
      workers.push_back({{"id", m + 1}, {"file", worker_files[m].generic_string()}});
    return {{"model", model}, {"params", params}, {"workers", workers}};
  }

  static DataManifest from_json(const nlohmann::json& j) {
    DataManifest out;
    try {
      out.model = j.at("model").get<std::string>();
      if (j.contains("params")) out.params = j.at("params");
      for (const auto& w : j.at("workers")) out.worker_files.emplace_back(w.at("file").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("data manifest: ") + e.what());
    }
    detail::require(!out.worker_files.empty(), ErrorCode::ConfigInvalid, "data manifest lists no workers");
    return out;
  }
};

}  // namespace fedpdmc
