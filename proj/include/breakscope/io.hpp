#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "breakscope/error.hpp"
#include "breakscope/series.hpp"

namespace breakscope {

/// Columns to read besides the leading date column; empty selects every column.
struct CsvSchema {
  std::vector<std::string> columns;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a comma-separated file with a header row; the first column holds ISO-8601 dates.
/// Each mapped column becomes one series; the panel is then inner-joined on dates.
inline Panel load_csv(const std::filesystem::path& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    for (auto f : detail::split_commas(line)) header.emplace_back(detail::trim(f));
    break;
  }
  if (header.size() < 2) throw Error(ErrorCode::MalformedRow, "missing header with a value column", line_no);

  std::vector<std::size_t> cols;
  if (schema.columns.empty()) {
    for (std::size_t c = 1; c < header.size(); ++c) cols.push_back(c);
  } else {
    for (const auto& name : schema.columns) {
      auto it = std::find(header.begin() + 1, header.end(), name);
      if (it == header.end()) throw Error(ErrorCode::InvalidArgument, "column '" + name + "' not in header");
      cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }

  std::vector<Date> dates;
  std::vector<std::vector<double>> values(cols.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::MalformedRow,
                  "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " fields",
                  line_no);
    Date d;
    try {
      d = Date::parse(detail::trim(fields[0]));
    } catch (const Error&) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": bad date", line_no);
    }
    if (!dates.empty() && d == dates.back())
      throw Error(ErrorCode::DuplicateDate, "line " + std::to_string(line_no) + ": duplicate date " + d.to_string(),
                  line_no);
    if (!dates.empty() && d < dates.back()) {
      if (std::find(dates.begin(), dates.end(), d) != dates.end())
        throw Error(ErrorCode::DuplicateDate,
                    "line " + std::to_string(line_no) + ": duplicate date " + d.to_string(), line_no);
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": dates out of order", line_no);
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
      double v = 0;
      if (!detail::parse_double(fields[cols[c]], v))
        throw Error(ErrorCode::MalformedRow,
                    "line " + std::to_string(line_no) + ": cannot parse '" + std::string(fields[cols[c]]) + "'",
                    line_no);
      values[c].push_back(v);
    }
    dates.push_back(d);
  }
  std::vector<TimeSeries> series;
  for (std::size_t c = 0; c < cols.size(); ++c) series.emplace_back(header[cols[c]], dates, std::move(values[c]));
  return Panel::align(std::move(series));
}

/// Decimal text with 9 significant digits, independent of the global locale.
inline std::string fmt9(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, p);
}

/// Rounds to 9 significant digits so that JSON output carries the same precision as CSV.
inline nlohmann::json num9(double v) {
  if (!std::isfinite(v)) return nullptr;
  double r = 0;
  const std::string s = fmt9(v);
  std::from_chars(s.data(), s.data() + s.size(), r);
  return r;
}

inline nlohmann::json num9(const std::vector<double>& v) {
  auto a = nlohmann::json::array();
  for (double x : v) a.push_back(num9(x));
  return a;
}

/// Long format: date,statistic,value with statistic tagged "<statistic>:<source>".
inline void write_rolling_csv(std::ostream& os, const std::vector<RollingSeries>& curves) {
  os << "date,statistic,value\n";
  for (const auto& c : curves)
    for (const auto& p : c.points) os << p.date.to_string() << ',' << c.statistic << ':' << c.source_id << ',' << fmt9(p.value) << '\n';
}

inline nlohmann::json to_json(const RollingSeries& r) {
  nlohmann::json j;
  j["source_id"] = r.source_id;
  j["statistic"] = r.statistic;
  auto pts = nlohmann::json::array();
  for (const auto& p : r.points) pts.push_back({{"date", p.date.to_string()}, {"value", num9(p.value)}});
  j["points"] = std::move(pts);
  auto gaps = nlohmann::json::array();
  for (const auto& g : r.gaps) gaps.push_back({{"date", g.date.to_string()}, {"reason", g.reason}});
  j["gaps"] = std::move(gaps);
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m, const std::vector<std::string>& ids) {
  os << "id";
  for (const auto& id : ids) os << ',' << id;
  os << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    os << ids.at(static_cast<std::size_t>(r));
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << ',' << fmt9(m(r, c));
    os << '\n';
  }
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m, const std::vector<std::string>& ids) {
  nlohmann::json j;
  j["ids"] = ids;
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num9(m(r, c)));
    rows.push_back(std::move(row));
  }
  j["matrix"] = std::move(rows);
  return j;
}

inline void write_panel_csv(std::ostream& os, const Panel& panel) {
  os << "date";
  for (const auto& s : panel.series()) os << ',' << s.id();
  os << '\n';
  for (std::size_t i = 0; i < panel.length(); ++i) {
    os << panel.date_axis()[i].to_string();
    for (const auto& s : panel.series()) os << ',' << fmt9(s.values()[i]);
    os << '\n';
  }
}

}  // namespace breakscope
