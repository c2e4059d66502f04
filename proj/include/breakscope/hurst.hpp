#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "breakscope/error.hpp"
#include "breakscope/preprocess.hpp"
#include "breakscope/series.hpp"
#include "breakscope/stats.hpp"

namespace breakscope {

enum class HurstMethod { rs, ghe };

inline std::string_view to_string(HurstMethod m) { return m == HurstMethod::rs ? "rs" : "ghe"; }

/// Scale/statistic pairs behind a log-log fit.
struct ScaleCurve {
  std::vector<double> scales;
  std::vector<double> statistic;
};

struct HurstEstimate {
  double h = 0.5;
  double raw = 0.5;  // before clamping to [0,1]
  bool clamped = false;
  HurstMethod method = HurstMethod::ghe;
  double q = 1.0;
  double fit_r2 = 0.0;
  std::size_t n_scales = 0;
  ScaleCurve curve;
};

namespace detail {
inline void clamp_estimate(HurstEstimate& e) {
  e.h = std::clamp(e.raw, 0.0, 1.0);
  e.clamped = e.h != e.raw;
}
}  // namespace detail

/// Mean rescaled range over the floor(len/n) complete subseries of length n.
/// Constant subseries are skipped.
inline double rs_statistic(std::span<const double> x, std::size_t n) {
  if (n < 8) throw Error(ErrorCode::InvalidArgument, "subseries length must be >= 8");
  if (x.size() < 2 * n) throw Error(ErrorCode::TooShort, "R/S needs at least two subseries");
  const std::size_t d = x.size() / n;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < d; ++k) {
    auto sub = x.subspan(k * n, n);
    const double m = mean(sub);
    double y = 0, lo = 0, hi = 0, ss = 0;
    bool first = true;
    for (double v : sub) {
      const double dv = v - m;
      ss += dv * dv;
      y += dv;
      if (first) {
        lo = hi = y;
        first = false;
      }
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    const double s = std::sqrt(ss / static_cast<double>(n));
    if (!(s > 0.0)) continue;
    total += (hi - lo) / s;
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::DegenerateSubseries, "every subseries is constant");
  return total / static_cast<double>(used);
}

/// Expected R/S of white noise (Anis-Lloyd with the Peters small-sample factor).
/// Gamma-ratio form up to n = 340, its asymptotic 1/sqrt(n pi/2) beyond.
inline double expected_rs(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "expected R/S needs n >= 2");
  const double nd = static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = n - 1; i >= 1; --i) sum += std::sqrt((nd - static_cast<double>(i)) / static_cast<double>(i));
  const double lead = (nd - 0.5) / nd;
  double g;
  if (n <= 340)
    g = std::exp(std::lgamma((nd - 1.0) / 2.0) - std::lgamma(nd / 2.0)) / std::sqrt(std::numbers::pi);
  else
    g = 1.0 / std::sqrt(nd * std::numbers::pi / 2.0);
  return lead * g * sum;
}

/// Half-octave grid starting at 8, capped so that every scale has >= 4 subseries.
inline std::vector<std::size_t> default_rs_scales(std::size_t len) {
  std::vector<std::size_t> out;
  for (int k = 0;; ++k) {
    const auto n = static_cast<std::size_t>(std::lround(8.0 * std::pow(2.0, k / 2.0)));
    if (4 * n > len) break;
    if (out.empty() || n != out.back()) out.push_back(n);
  }
  return out;
}

/// Slope of log (R/S)_n against log n. In corrected mode the white-noise expectation
/// is subtracted first and 0.5 added back.
inline HurstEstimate hurst_rs(std::span<const double> x, std::vector<std::size_t> scales, bool corrected = true) {
  std::sort(scales.begin(), scales.end());
  scales.erase(std::unique(scales.begin(), scales.end()), scales.end());
  if (scales.size() < 4) throw Error(ErrorCode::InsufficientScales, "R/S regression needs >= 4 scales");
  if (x.size() < 2 * scales.back()) throw Error(ErrorCode::TooShort, "series shorter than twice the largest scale");
  HurstEstimate e;
  e.method = HurstMethod::rs;
  std::vector<double> lx, ly;
  for (auto n : scales) {
    const double rs = rs_statistic(x, n);
    e.curve.scales.push_back(static_cast<double>(n));
    e.curve.statistic.push_back(rs);
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(rs) - (corrected ? std::log(expected_rs(n)) : 0.0));
  }
  const auto fit = ols(lx, ly);
  e.raw = fit.slope + (corrected ? 0.5 : 0.0);
  e.fit_r2 = fit.r2;
  e.n_scales = scales.size();
  detail::clamp_estimate(e);
  return e;
}

inline HurstEstimate hurst_rs(std::span<const double> x, bool corrected = true) {
  return hurst_rs(x, default_rs_scales(x.size()), corrected);
}

inline std::vector<std::size_t> default_tau_max_set() {
  std::vector<std::size_t> s;
  for (std::size_t t = 5; t <= 19; ++t) s.push_back(t);
  return s;
}

/// Generalized Hurst exponent of a level series. For each tau_max the q-th moment of
/// |x(t+tau) - x(t)| is regressed on tau = 1..tau_max in log-log space; H(q) is the
/// slope over q, averaged across tau_max. Only the numerator moment is fitted, so
/// the result does not depend on where the level series starts.
/// `length_factor` sets the minimum length as a multiple of the largest tau_max.
inline HurstEstimate ghe(std::span<const double> x, double q = 1.0,
                         std::vector<std::size_t> tau_max_set = default_tau_max_set(),
                         std::size_t length_factor = 10) {
  if (!(q > 0.0)) throw Error(ErrorCode::InvalidArgument, "moment order q must be positive");
  std::sort(tau_max_set.begin(), tau_max_set.end());
  tau_max_set.erase(std::unique(tau_max_set.begin(), tau_max_set.end()), tau_max_set.end());
  if (tau_max_set.empty() || tau_max_set.front() < 2)
    throw Error(ErrorCode::InvalidArgument, "tau_max values must be >= 2");
  const std::size_t tmax = tau_max_set.back();
  if (x.size() < length_factor * tmax || x.size() <= tmax)
    throw Error(ErrorCode::TooShort, "series of length " + std::to_string(x.size()) + " too short for tau_max " +
                                         std::to_string(tmax));
  std::vector<double> k(tmax + 1, 0.0);
  for (std::size_t tau = 1; tau <= tmax; ++tau) {
    double s = 0.0;
    const std::size_t m = x.size() - tau;
    for (std::size_t t = 0; t < m; ++t) s += std::pow(std::abs(x[t + tau] - x[t]), q);
    k[tau] = s / static_cast<double>(m);
    if (!std::isfinite(k[tau]) || !(k[tau] > 0.0))
      throw Error(ErrorCode::NonFiniteMoment, "increment moment at tau=" + std::to_string(tau) + " is not usable");
  }
  HurstEstimate e;
  e.method = HurstMethod::ghe;
  e.q = q;
  for (std::size_t tau = 1; tau <= tmax; ++tau) {
    e.curve.scales.push_back(static_cast<double>(tau));
    e.curve.statistic.push_back(k[tau]);
  }
  double hsum = 0.0, r2sum = 0.0;
  for (auto tm : tau_max_set) {
    std::vector<double> lx, ly;
    for (std::size_t tau = 1; tau <= tm; ++tau) {
      lx.push_back(std::log(static_cast<double>(tau)));
      ly.push_back(std::log(k[tau]));
    }
    const auto fit = ols(lx, ly);
    hsum += fit.slope / q;
    r2sum += fit.r2;
  }
  const auto cnt = static_cast<double>(tau_max_set.size());
  e.raw = hsum / cnt;
  e.fit_r2 = r2sum / cnt;
  e.n_scales = tmax;
  detail::clamp_estimate(e);
  return e;
}

/// tau_max values usable inside a window of `window_len` points.
inline std::vector<std::size_t> window_tau_max_set(std::size_t window_len,
                                                   const std::vector<std::size_t>& wanted = default_tau_max_set()) {
  std::vector<std::size_t> out;
  for (auto t : wanted)
    if (10 * t <= window_len) out.push_back(t);
  return out;
}

/// Rolling GHE of a level series. The tau_max set is cut to what fits in the window.
inline RollingSeries rolling_ghe(const TimeSeries& s, const RollingWindowSpec& spec = {}, double q = 1.0,
                                 const std::vector<std::size_t>& tau_max_set = default_tau_max_set()) {
  const auto taus = window_tau_max_set(spec.window_len, tau_max_set);
  if (taus.empty())
    throw Error(ErrorCode::WindowTooLong, "window of " + std::to_string(spec.window_len) +
                                              " is too short for any tau_max in the set");
  auto out = rolling_apply(
      s, spec, [&](std::span<const double> w) { return ghe(w, q, taus).h; }, "ghe");
  if (spec.window_len < 60) out.warnings.push_back("window shorter than 60 points; GHE estimates are noisy");
  return out;
}

inline RollingSeries rolling_hurst_rs(const TimeSeries& s, const RollingWindowSpec& spec = {}, bool corrected = true) {
  return rolling_apply(
      s, spec, [&](std::span<const double> w) { return hurst_rs(w, corrected).h; }, "rs");
}

inline double fractal_dimension(double h) {
  if (!(h >= 0.0 && h <= 1.0)) throw Error(ErrorCode::OutOfRange, "Hurst exponent outside [0,1]");
  return 2.0 - h;
}

inline double spectral_exponent(double h) {
  if (!(h >= 0.0 && h <= 1.0)) throw Error(ErrorCode::OutOfRange, "Hurst exponent outside [0,1]");
  return 2.0 * h + 1.0;
}

enum class Efficiency { anti_persistent, efficient_band, persistent };

inline std::string_view to_string(Efficiency e) {
  switch (e) {
    case Efficiency::anti_persistent: return "anti_persistent";
    case Efficiency::efficient_band: return "efficient_band";
    case Efficiency::persistent: return "persistent";
  }
  return "efficient_band";
}

inline Efficiency classify_efficiency(double h, double band = 0.05) {
  if (h < 0.5 - band) return Efficiency::anti_persistent;
  if (h > 0.5 + band) return Efficiency::persistent;
  return Efficiency::efficient_band;
}

/// Calendar-year means of a rolling curve, keyed by year of the stamp date.
inline std::map<int, double> annual_means(const RollingSeries& r) {
  std::map<int, std::pair<double, std::size_t>> acc;
  for (const auto& p : r.points) {
    auto& a = acc[p.date.year()];
    a.first += p.value;
    ++a.second;
  }
  std::map<int, double> out;
  for (const auto& [y, a] : acc) out[y] = a.first / static_cast<double>(a.second);
  return out;
}

/// Correlation of rolling curves over the dates where every curve has a value.
inline Eigen::MatrixXd rolling_correlation_matrix(const std::vector<RollingSeries>& curves) {
  std::vector<TimeSeries> ts;
  for (const auto& c : curves) {
    std::vector<Date> d;
    std::vector<double> v;
    for (const auto& p : c.points) {
      d.push_back(p.date);
      v.push_back(p.value);
    }
    ts.emplace_back(c.source_id, std::move(d), std::move(v));
  }
  const auto panel = Panel::align(std::move(ts));
  if (panel.size() >= 2 && panel.length() == 0)
    throw Error(ErrorCode::NoOverlap, "rolling curves share no dates");
  std::vector<std::vector<double>> rows;
  for (const auto& s : panel.series()) rows.emplace_back(s.values().begin(), s.values().end());
  return pearson_correlation_matrix(rows, panel.ids());
}

}  // namespace breakscope
