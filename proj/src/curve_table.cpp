#include "fofreg/curve_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace fofreg {

namespace {

struct RawCurve {
  std::vector<double> args;
  std::vector<double> values;
};

double parse_number(const std::string& field, int line, int column) {
  double out = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc() || res.ptr != last)
    throw CsvError("expected a numeric value, got '" + field + "'", line, column);
  if (!std::isfinite(out)) throw CsvError("non-finite value '" + field + "'", line, column);
  return out;
}

}  // namespace

CurveTable read_curve_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open curve file: " + path);

  std::string line;
  int line_num = 0;

  if (!std::getline(in, line)) throw CsvError("empty file", 1, 1);
  ++line_num;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "curve_id,arg,value")
    throw CsvError("header must be exactly 'curve_id,arg,value'", 1, 1);

  std::vector<std::string> order;
  std::map<std::string, RawCurve> raw;

  while (std::getline(in, line)) {
    ++line_num;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const size_t c1 = line.find(',');
    const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos ||
        line.find(',', c2 + 1) != std::string::npos)
      throw CsvError("expected exactly 3 comma-separated fields", line_num, 1);

    const std::string id = line.substr(0, c1);
    if (id.empty()) throw CsvError("empty curve_id", line_num, 1);
    const double arg = parse_number(line.substr(c1 + 1, c2 - c1 - 1), line_num,
                                    static_cast<int>(c1) + 2);
    const double value = parse_number(line.substr(c2 + 1), line_num, static_cast<int>(c2) + 2);

    auto it = raw.find(id);
    if (it == raw.end()) {
      order.push_back(id);
      it = raw.emplace(id, RawCurve{}).first;
    }
    it->second.args.push_back(arg);
    it->second.values.push_back(value);
  }

  if (order.empty()) throw CsvError("no data rows", line_num + 1, 1);

  CurveTable table;
  table.arg_min = std::numeric_limits<double>::infinity();
  table.arg_max = -std::numeric_limits<double>::infinity();
  for (const std::string& id : order) {
    RawCurve& rc = raw[id];
    if (rc.args.size() < 2)
      throw std::invalid_argument("curve '" + id + "' has fewer than 2 observations");
    std::vector<size_t> idx(rc.args.size());
    std::iota(idx.begin(), idx.end(), size_t(0));
    std::sort(idx.begin(), idx.end(),
              [&rc](size_t a, size_t b) { return rc.args[a] < rc.args[b]; });
    Curve curve;
    curve.label = id;
    curve.args.resize(static_cast<Eigen::Index>(idx.size()));
    curve.values.resize(static_cast<Eigen::Index>(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k) {
      curve.args(static_cast<Eigen::Index>(k)) = rc.args[idx[k]];
      curve.values(static_cast<Eigen::Index>(k)) = rc.values[idx[k]];
      if (k > 0 && !(rc.args[idx[k]] > rc.args[idx[k - 1]]))
        throw std::invalid_argument("curve '" + id + "' has a duplicated arg " +
                                    format_double(rc.args[idx[k]]));
    }
    table.arg_min = std::min(table.arg_min, curve.args(0));
    table.arg_max = std::max(table.arg_max, curve.args(curve.args.size() - 1));
    table.curves.push_back(std::move(curve));
  }
  return table;
}

void rescale_args(std::vector<Curve>& curves, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("rescale: degenerate argument range");
  const double span = hi - lo;
  for (Curve& curve : curves) curve.args = ((curve.args.array() - lo) / span).matrix();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace fofreg
