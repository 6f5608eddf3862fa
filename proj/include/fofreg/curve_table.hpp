#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fofreg/quadrature.hpp"

namespace fofreg {

/// Parse failure in a curve CSV, with 1-based line/column coordinates.
struct CsvError : std::runtime_error {
  CsvError(const std::string& msg, int line_num, int column_num)
      : std::runtime_error(msg + " (line " + std::to_string(line_num) + ", column " +
                           std::to_string(column_num) + ")"),
        line(line_num),
        column(column_num) {}
  int line;
  int column;
};

/// Long-format curve file: header `curve_id,arg,value`, one observation per
/// row. Curves keep the order of first appearance; rows within a curve are
/// sorted by arg and must be distinct.
struct CurveTable {
  std::vector<Curve> curves;
  double arg_min = 0.0;  // over all rows, original scale
  double arg_max = 1.0;
};

CurveTable read_curve_table(const std::string& path);

/// Affine map of every abscissa from [lo, hi] onto [0,1].
void rescale_args(std::vector<Curve>& curves, double lo, double hi);

/// Shortest round-trippable decimal form of a double (%.17g).
std::string format_double(double v);

}  // namespace fofreg
