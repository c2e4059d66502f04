#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "breakscope/error.hpp"
#include "breakscope/series.hpp"

namespace breakscope {

struct DropResult {
  TimeSeries series;
  std::size_t dropped = 0;
};

/// Removes every point with value <= 0. Only the affected series loses the date;
/// panel alignment later drops it everywhere.
inline DropResult drop_negative_prices(const TimeSeries& s) {
  if (s.transform_tag() != Transform::raw)
    throw Error(ErrorCode::InvalidArgument, "drop_negative_prices expects a raw price series");
  std::vector<Date> dates;
  std::vector<double> values;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.values()[i] > 0.0) {
      dates.push_back(s.dates()[i]);
      values.push_back(s.values()[i]);
    }
  }
  if (values.empty())
    throw Error(ErrorCode::AllDropped, "series '" + s.id() + "' has no positive values");
  const std::size_t dropped = s.size() - values.size();
  return {TimeSeries(s.id(), std::move(dates), std::move(values), Transform::raw), dropped};
}

inline TimeSeries log_levels(const TimeSeries& s) {
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s.values()[i] > 0.0))
      throw Error(ErrorCode::NonPositiveValue,
                  "series '" + s.id() + "' has a non-positive value at " + s.dates()[i].to_string() +
                      " (drop negative prices first)");
    v[i] = std::log(s.values()[i]);
  }
  return TimeSeries(s.id(), {s.dates().begin(), s.dates().end()}, std::move(v), Transform::log);
}

/// r_i = ln v_i - ln v_{i-1}, stamped at date i.
inline TimeSeries log_returns(const TimeSeries& s) {
  if (s.size() < 2) throw Error(ErrorCode::TooShort, "log returns need at least 2 points");
  std::vector<double> v(s.size() - 1);
  std::vector<Date> d(s.size() - 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s.values()[i] > 0.0))
      throw Error(ErrorCode::NonPositiveValue,
                  "series '" + s.id() + "' has a non-positive value at " + s.dates()[i].to_string() +
                      " (drop negative prices first)");
  }
  for (std::size_t i = 1; i < s.size(); ++i) {
    v[i - 1] = std::log(s.values()[i]) - std::log(s.values()[i - 1]);
    d[i - 1] = s.dates()[i];
  }
  return TimeSeries(s.id(), std::move(d), std::move(v), Transform::log_return);
}

/// signed_log_return is ordinary log returns (already signed).
inline TimeSeries apply_transform(const TimeSeries& s, Transform t) {
  switch (t) {
    case Transform::raw: return s;
    case Transform::log: return log_levels(s);
    case Transform::log_return: return log_returns(s);
    case Transform::signed_log_return: {
      auto r = log_returns(s);
      return TimeSeries(r.id(), {r.dates().begin(), r.dates().end()}, {r.values().begin(), r.values().end()},
                        Transform::signed_log_return);
    }
  }
  return s;
}

using WindowStatistic = std::function<double(std::span<const double>)>;

/// Applies `f` to each contiguous window; windows where `f` throws become gaps.
inline RollingSeries rolling_apply(const TimeSeries& s, const RollingWindowSpec& spec,
                                   const WindowStatistic& f, std::string statistic = "statistic") {
  if (spec.window_len == 0 || spec.step == 0)
    throw Error(ErrorCode::InvalidArgument, "window length and step must be positive");
  if (spec.window_len > s.size())
    throw Error(ErrorCode::WindowTooLong, "window of " + std::to_string(spec.window_len) +
                                              " exceeds series length " + std::to_string(s.size()));
  RollingSeries out;
  out.source_id = s.id();
  out.statistic = std::move(statistic);
  const std::size_t count = spec.count(s.size());
  out.points.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * spec.step;
    const Date stamp = s.dates()[start + spec.window_len - 1];
    try {
      const double v = f(s.values().subspan(start, spec.window_len));
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteMoment, "non-finite window statistic");
      out.points.push_back({stamp, v});
    } catch (const Error& e) {
      out.gaps.push_back({stamp, e.what()});
    }
  }
  return out;
}

}  // namespace breakscope
