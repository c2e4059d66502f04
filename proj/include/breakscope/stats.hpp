#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "breakscope/error.hpp"
#include "breakscope/series.hpp"

namespace breakscope {

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population variance (divides by n).
inline double variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

/// Sample standard deviation (divides by n - 1).
inline double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt(variance(x) * static_cast<double>(x.size()) / static_cast<double>(x.size() - 1));
}

inline std::vector<double> standardize(std::span<const double> x) {
  const double m = mean(x);
  const double sd = std::sqrt(variance(x));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sd > 0 ? (x[i] - m) / sd : 0.0;
  return out;
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = a + b x.
inline LinearFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "ols needs two equal-length sequences of length >= 2");
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::ZeroVariance, "ols regressor has zero variance");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return fit;
}

/// Digamma at positive integers: psi(n) = -gamma + sum_{k<n} 1/k. Cached table.
class DigammaTable {
 public:
  double operator()(std::size_t n) const {
    if (n == 0) throw Error(ErrorCode::OutOfRange, "digamma(0) is undefined");
    if (n >= table_.size()) extend(n);
    return table_[n];
  }

 private:
  void extend(std::size_t n) const {
    std::size_t old = table_.size();
    table_.resize(std::max(n + 1, 2 * old));
    if (old < 2) {
      table_[1] = -0.57721566490153286061;
      old = 2;
    }
    for (std::size_t i = old; i < table_.size(); ++i)
      table_[i] = table_[i - 1] + 1.0 / static_cast<double>(i - 1);
  }
  mutable std::vector<double> table_ = {0.0, -0.57721566490153286061};
};

inline double digamma_int(std::size_t n) {
  thread_local DigammaTable table;
  return table(n);
}

struct JarqueBera {
  double statistic = 0.0;
  double p_value = 1.0;
  double skewness = 0.0;
  double kurtosis = 3.0;
};

/// JB = n/6 (S^2 + (K-3)^2/4) from population moments; p-value is the chi-square(2)
/// upper tail, which is exactly exp(-JB/2).
inline JarqueBera jarque_bera(std::span<const double> x) {
  if (x.size() < 20) throw Error(ErrorCode::TooShort, "Jarque-Bera needs at least 20 observations");
  const double n = static_cast<double>(x.size());
  const double m = mean(x);
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 == 0.0) throw Error(ErrorCode::ZeroVariance, "Jarque-Bera on a constant sample");
  JarqueBera jb;
  jb.skewness = m3 / std::pow(m2, 1.5);
  jb.kurtosis = m4 / (m2 * m2);
  jb.statistic = n / 6.0 * (jb.skewness * jb.skewness + 0.25 * (jb.kurtosis - 3.0) * (jb.kurtosis - 3.0));
  jb.p_value = std::exp(-0.5 * jb.statistic);
  return jb;
}

inline JarqueBera jarque_bera(const TimeSeries& s) { return jarque_bera(s.values()); }

/// Pearson correlation matrix of equal-length rows. Diagonal is exactly 1.
inline Eigen::MatrixXd pearson_correlation_matrix(const std::vector<std::vector<double>>& rows,
                                                  const std::vector<std::string>& ids = {}) {
  if (rows.size() < 2) throw Error(ErrorCode::InvalidArgument, "correlation matrix needs >= 2 sequences");
  const std::size_t n = rows.front().size();
  if (n < 3) throw Error(ErrorCode::TooShort, "correlation matrix needs sequences of length >= 3");
  std::vector<std::vector<double>> z;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != n) throw Error(ErrorCode::InvalidArgument, "correlation rows differ in length");
    const double m = mean(rows[r]);
    std::vector<double> c(n);
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = rows[r][i] - m;
      ss += c[i] * c[i];
    }
    if (ss == 0.0)
      throw Error(ErrorCode::ZeroVariance,
                  "sequence '" + (r < ids.size() ? ids[r] : std::to_string(r)) + "' has zero variance");
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : c) v *= inv;
    z.push_back(std::move(c));
  }
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = a + 1; b < k; ++b) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += z[a][i] * z[b][i];
      corr(a, b) = corr(b, a) = std::clamp(s, -1.0, 1.0);
    }
  return corr;
}

/// Linear-interpolated empirical quantile, p in [0,1].
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace breakscope
