#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "breakscope/date.hpp"
#include "breakscope/error.hpp"

namespace breakscope {

struct TimePoint {
  Date date;
  double value = 0.0;
};

enum class Transform { raw, log, log_return, signed_log_return };

inline std::string_view to_string(Transform t) {
  switch (t) {
    case Transform::raw: return "raw";
    case Transform::log: return "log";
    case Transform::log_return: return "log_return";
    case Transform::signed_log_return: return "signed_log_return";
  }
  return "raw";
}

inline Transform parse_transform(std::string_view s) {
  if (s == "raw") return Transform::raw;
  if (s == "log") return Transform::log;
  if (s == "log_return") return Transform::log_return;
  if (s == "signed_log_return") return Transform::signed_log_return;
  throw Error(ErrorCode::InvalidArgument, "unknown transform '" + std::string(s) + "'");
}

/// Date-indexed value sequence. Dates are strictly increasing and values finite;
/// both are checked on construction.
class TimeSeries {
 public:
  TimeSeries() = default;

  TimeSeries(std::string id, std::vector<Date> dates, std::vector<double> values,
             Transform tag = Transform::raw)
      : id_(std::move(id)), dates_(std::move(dates)), values_(std::move(values)), tag_(tag) {
    if (dates_.size() != values_.size())
      throw Error(ErrorCode::InvalidArgument, "series '" + id_ + "': dates/values length mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw Error(ErrorCode::InvalidArgument,
                    "series '" + id_ + "': non-finite value at " + dates_[i].to_string());
      if (i > 0 && !(dates_[i - 1] < dates_[i]))
        throw Error(dates_[i - 1] == dates_[i] ? ErrorCode::DuplicateDate : ErrorCode::InvalidArgument,
                    "series '" + id_ + "': dates not strictly increasing at " + dates_[i].to_string());
    }
  }

  /// Convenience for synthetic data: dates are consecutive days starting at `start`.
  static TimeSeries from_values(std::string id, std::vector<double> values,
                                Date start = Date::from_ymd(2000, 1, 1),
                                Transform tag = Transform::raw) {
    std::vector<Date> dates(values.size());
    for (std::size_t i = 0; i < dates.size(); ++i) dates[i] = start + static_cast<int>(i);
    return TimeSeries(std::move(id), std::move(dates), std::move(values), tag);
  }

  const std::string& id() const { return id_; }
  Transform transform_tag() const { return tag_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::span<const double> values() const { return values_; }
  std::span<const Date> dates() const { return dates_; }
  TimePoint operator[](std::size_t i) const { return {dates_[i], values_[i]}; }

 private:
  std::string id_;
  std::vector<Date> dates_;
  std::vector<double> values_;
  Transform tag_ = Transform::raw;
};

/// Aligned collection of series sharing one date axis.
class Panel {
 public:
  Panel() = default;

  /// Inner join on dates: only dates present in every input series are kept.
  static Panel align(std::vector<TimeSeries> series) {
    if (series.empty()) return Panel();
    std::vector<Date> axis(series.front().dates().begin(), series.front().dates().end());
    for (std::size_t s = 1; s < series.size(); ++s) {
      std::vector<Date> next;
      std::set_intersection(axis.begin(), axis.end(), series[s].dates().begin(),
                            series[s].dates().end(), std::back_inserter(next));
      axis = std::move(next);
    }
    Panel panel;
    panel.axis_ = axis;
    for (const auto& ts : series) {
      std::vector<double> vals;
      vals.reserve(axis.size());
      auto d = ts.dates();
      std::size_t j = 0;
      for (Date date : axis) {
        while (d[j] < date) ++j;
        vals.push_back(ts.values()[j]);
      }
      panel.series_.emplace_back(ts.id(), axis, std::move(vals), ts.transform_tag());
    }
    return panel;
  }

  std::size_t size() const { return series_.size(); }
  std::size_t length() const { return axis_.size(); }
  std::span<const Date> date_axis() const { return axis_; }
  const TimeSeries& operator[](std::size_t i) const { return series_.at(i); }
  const std::vector<TimeSeries>& series() const { return series_; }

  std::size_t index_of(std::string_view id) const {
    for (std::size_t i = 0; i < series_.size(); ++i)
      if (series_[i].id() == id) return i;
    throw Error(ErrorCode::InvalidArgument, "no series named '" + std::string(id) + "'");
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& s : series_) out.push_back(s.id());
    return out;
  }

 private:
  std::vector<Date> axis_;
  std::vector<TimeSeries> series_;
};

struct RollingWindowSpec {
  std::size_t window_len = 75;
  std::size_t step = 1;

  /// Number of windows for a source of length n (0 if the window does not fit).
  std::size_t count(std::size_t n) const {
    return window_len == 0 || step == 0 || window_len > n ? 0 : (n - window_len) / step + 1;
  }
};

struct RollingGap {
  Date date;
  std::string reason;
};

/// Derived statistic stream; each value is stamped with the last date of its window.
struct RollingSeries {
  std::string source_id;
  std::string statistic;
  std::vector<TimePoint> points;
  std::vector<RollingGap> gaps;
  std::vector<std::string> warnings;

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const auto& p : points) v.push_back(p.value);
    return v;
  }
};

}  // namespace breakscope
