#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedpdmc/core.hpp"

namespace fedpdmc {

/// Shortest decimal text that parses back to the same double (at most 17 significant digits).
inline std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
  }
  return std::string(buf, end);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": not a number: '" + text + "'");
  }
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

/// Header `t,x1..xd,v1..vd`, one row per skeleton point.
inline void write_skeleton_csv(std::ostream& out, const Skeleton& skeleton) {
  const std::size_t d = skeleton.dim();
  out << "t";
  for (std::size_t i = 1; i <= d; ++i) out << ",x" << i;
  for (std::size_t i = 1; i <= d; ++i) out << ",v" << i;
  out << '\n';
  for (const auto& p : skeleton.points) {
    out << format_double(p.t);
    for (Eigen::Index i = 0; i < p.x.size(); ++i) out << ',' << format_double(p.x[i]);
    for (Eigen::Index i = 0; i < p.v.size(); ++i) out << ',' << format_double(p.v[i]);
    out << '\n';
  }
}

/// Reads a skeleton CSV. The file carries no horizon; a nonpositive
/// `horizon` means "time of the last point".
inline Skeleton read_skeleton_csv(std::istream& in, double horizon = 0.0, Flow flow = Flow::linear()) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)), ErrorCode::ParseError, "missing header");
  detail::strip_cr(line);
  const auto header = detail::split_csv_line(line);
  detail::require(header.size() >= 3 && header.size() % 2 == 1 && header[0] == "t", ErrorCode::ParseError,
                  "header must be t,x1..xd,v1..vd");
  const std::size_t d = (header.size() - 1) / 2;
  for (std::size_t i = 1; i <= d; ++i) {
    detail::require(header[i] == "x" + std::to_string(i) && header[d + i] == "v" + std::to_string(i),
                    ErrorCode::ParseError, "unexpected header column");
  }
  Skeleton skeleton;
  skeleton.flow = std::move(flow);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    detail::require(cells.size() == 2 * d + 1, ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": expected " + std::to_string(2 * d + 1) + " fields");
    SkeletonPoint p;
    p.t = detail::parse_double(cells[0], line_no);
    p.x.resize(static_cast<Eigen::Index>(d));
    p.v.resize(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
      p.x[static_cast<Eigen::Index>(i)] = detail::parse_double(cells[1 + i], line_no);
      p.v[static_cast<Eigen::Index>(i)] = detail::parse_double(cells[1 + d + i], line_no);
    }
    skeleton.points.push_back(std::move(p));
  }
  detail::require(!skeleton.points.empty(), ErrorCode::EmptyInput, "skeleton CSV has no rows");
  skeleton.horizon = horizon > 0.0 ? horizon : skeleton.points.back().t;
  skeleton.validate();
  return skeleton;
}

}  // namespace fedpdmc
