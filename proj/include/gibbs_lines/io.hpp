#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbs_lines/extended_real.hpp"
#include "gibbs_lines/lattice.hpp"

namespace gibbs_lines {

// Shortest decimal string that parses back to the identical double.
inline std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_value(const ExtendedReal& v) {
  if (v.is_pos_inf()) return "inf";
  if (v.is_neg_inf()) return "-inf";
  return format_value(v.value());
}

// Inverse of format_value; accepts the inf tokens and plain decimals.
inline double parse_value(const std::string& token) {
  if (token == "inf" || token == "+inf") return HUGE_VAL;
  if (token == "-inf") return -HUGE_VAL;
  if (token == "nan") return std::nan("");
  double v = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::invalid_argument("parse_value: bad number '" + token + "'");
  return v;
}

// Rows-by-times table of curve values, the parsed form of a paths CSV.
// A stream of several states concatenates row blocks; consumers split
// blocks wherever the time column restarts.
struct PathTable {
  std::vector<double> times;
  std::vector<std::vector<ExtendedReal>> columns;

  int curves() const { return static_cast<int>(columns.size()); }
};

inline void write_path_header(std::ostream& out, int curves) {
  out << "time";
  for (int i = 1; i <= curves; ++i) out << ",curve_" << i;
  out << '\n';
}

inline void write_path_rows(std::ostream& out, const Grid& grid,
                            const std::vector<std::vector<ExtendedReal>>& columns) {
  for (int m = 0; m < grid.num_times(); ++m) {
    out << format_value(grid.time(m));
    for (const auto& col : columns) {
      out << ',' << format_value(col[static_cast<std::size_t>(m)]);
    }
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::vector<ExtendedReal>> state_columns(const EnsembleState& s,
                                                            bool with_boundaries) {
  std::vector<std::vector<ExtendedReal>> columns;
  const int times = s.grid.num_times();
  auto boundary_column = [&](const BoundaryCurve& c) {
    std::vector<ExtendedReal> col;
    col.reserve(static_cast<std::size_t>(times));
    for (int m = 0; m < times; ++m) col.push_back(c.at(m));
    return col;
  };
  if (with_boundaries) columns.push_back(boundary_column(s.f));
  for (const auto& path : s.paths) {
    std::vector<ExtendedReal> col;
    col.reserve(static_cast<std::size_t>(times));
    for (long long index : path.indices())
      col.push_back(ExtendedReal(static_cast<double>(index) * s.grid.dx));
    columns.push_back(std::move(col));
  }
  if (with_boundaries) columns.push_back(boundary_column(s.g));
  return columns;
}

}  // namespace detail

// One state per row block: header once, then num_times rows of
// time,curve_1,...,curve_k in full round-trip precision. Boundary curves,
// when included, occupy the first and last curve columns and may print the
// inf/-inf tokens.
inline void export_paths(std::ostream& out, const EnsembleState& state,
                         bool with_boundaries = false) {
  const auto columns = detail::state_columns(state, with_boundaries);
  write_path_header(out, static_cast<int>(columns.size()));
  write_path_rows(out, state.grid, columns);
}

inline void export_paths(std::ostream& out, const std::vector<EnsembleState>& states,
                         bool with_boundaries = false) {
  if (states.empty()) throw std::invalid_argument("export_paths: no states");
  const auto first = detail::state_columns(states.front(), with_boundaries);
  write_path_header(out, static_cast<int>(first.size()));
  write_path_rows(out, states.front().grid, first);
  for (std::size_t i = 1; i < states.size(); ++i) {
    const auto columns = detail::state_columns(states[i], with_boundaries);
    if (columns.size() != first.size())
      throw std::invalid_argument("export_paths: states disagree on curve count");
    write_path_rows(out, states[i].grid, columns);
  }
}

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace detail

// Parses a paths CSV back into a table. Validates the header shape and
// rectangularity; values round-trip bit-exactly through format_value.
inline PathTable parse_paths(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("parse_paths: empty input");
  const auto header = detail::split_csv_row(line);
  if (header.empty() || header[0] != "time")
    throw std::invalid_argument("parse_paths: header must start with 'time'");
  const int curves = static_cast<int>(header.size()) - 1;
  if (curves < 1) throw std::invalid_argument("parse_paths: no curve columns");
  for (int i = 1; i <= curves; ++i) {
    if (header[static_cast<std::size_t>(i)] != "curve_" + std::to_string(i))
      throw std::invalid_argument("parse_paths: bad header column '" +
                                  header[static_cast<std::size_t>(i)] + "'");
  }
  PathTable table;
  table.columns.resize(static_cast<std::size_t>(curves));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_row(line);
    if (static_cast<int>(fields.size()) != curves + 1)
      throw std::invalid_argument("parse_paths: row has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(curves + 1));
    table.times.push_back(parse_value(fields[0]));
    for (int i = 0; i < curves; ++i) {
      const double v = parse_value(fields[static_cast<std::size_t>(i) + 1]);
      table.columns[static_cast<std::size_t>(i)].push_back(
          std::isinf(v) ? (v > 0 ? ExtendedReal::pos_inf() : ExtendedReal::neg_inf())
                        : ExtendedReal(v));
    }
  }
  if (table.times.empty()) throw std::invalid_argument("parse_paths: no data rows");
  return table;
}

// Recovers lattice indices from a finite curve column. The exported values
// are exactly index*dx, so the inversion must reproduce the indices with no
// tolerance at all.
inline std::vector<long long> indices_from_values(const Grid& grid,
                                                  const std::vector<ExtendedReal>& column) {
  std::vector<long long> indices;
  indices.reserve(column.size());
  for (const auto& v : column) {
    if (!v.finite())
      throw std::invalid_argument("indices_from_values: infinite value in curve column");
    const long long index = std::llround(v.value() / grid.dx);
    if (static_cast<double>(index) * grid.dx != v.value())
      throw std::invalid_argument("indices_from_values: value " + format_value(v.value()) +
                                  " is not on the lattice");
    indices.push_back(index);
  }
  return indices;
}

}  // namespace gibbs_lines
