#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "breakscope/error.hpp"
#include "breakscope/infotheory.hpp"
#include "breakscope/series.hpp"

namespace breakscope {

inline std::vector<double> gen_white_noise(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  std::vector<double> out(n);
  for (double& v : out) v = z(rng);
  return out;
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag k.
inline double fgn_autocovariance(double h, std::size_t k) {
  const double kd = static_cast<double>(k);
  const double e = 2.0 * h;
  return 0.5 * (std::pow(kd + 1.0, e) - 2.0 * std::pow(kd, e) + std::pow(std::abs(kd - 1.0), e));
}

/// Exact fGn by Durbin-Levinson recursion, O(n^2).
inline std::vector<double> gen_fgn_levinson(double h, std::size_t n, std::uint64_t seed) {
  if (!(h > 0.0 && h < 1.0)) throw Error(ErrorCode::InvalidArgument, "fGn needs h in (0,1)");
  std::vector<double> gamma(n + 1);
  for (std::size_t k = 0; k <= n; ++k) gamma[k] = fgn_autocovariance(h, k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n), phi, prev;
  double v = gamma[0];
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      // update partial autocorrelations for order t
      double num = gamma[t];
      for (std::size_t j = 0; j + 1 < t; ++j) num -= prev[j] * gamma[t - 1 - j];
      const double kappa = num / v;
      phi.assign(t, 0.0);
      phi[t - 1] = kappa;
      for (std::size_t j = 0; j + 1 < t; ++j) phi[j] = prev[j] - kappa * prev[t - 2 - j];
      v *= 1.0 - kappa * kappa;
      prev = phi;
    }
    double m = 0.0;
    for (std::size_t j = 0; j < t; ++j) m += phi[j] * x[t - 1 - j];
    x[t] = m + std::sqrt(v) * z(rng);
  }
  return x;
}

/// Exact fGn by circulant embedding (Davies-Harte) of size 2m, m the next power of two >= n.
/// Throws EmbeddingFailure if the circulant has a negative eigenvalue.
inline std::vector<double> gen_fgn_circulant(double h, std::size_t n, std::uint64_t seed) {
  if (!(h > 0.0 && h < 1.0)) throw Error(ErrorCode::InvalidArgument, "fGn needs h in (0,1)");
  std::size_t m = 1;
  while (m < n) m <<= 1;
  const std::size_t size = 2 * m;
  std::vector<std::complex<double>> c(size), lambda;
  for (std::size_t k = 0; k <= m; ++k) c[k] = fgn_autocovariance(h, k);
  for (std::size_t k = m + 1; k < size; ++k) c[k] = c[size - k];
  Eigen::FFT<double> fft;
  fft.fwd(lambda, c);
  std::vector<double> scale(size);
  for (std::size_t k = 0; k < size; ++k) {
    const double l = lambda[k].real();
    if (l < -1e-10 * static_cast<double>(size))
      throw Error(ErrorCode::EmbeddingFailure, "circulant embedding has a negative eigenvalue");
    scale[k] = std::sqrt(std::max(l, 0.0) / static_cast<double>(size));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::complex<double>> w(size), y;
  for (std::size_t k = 0; k < size; ++k) {
    const double a = z(rng);
    const double b = z(rng);
    w[k] = scale[k] * std::complex<double>(a, b);
  }
  fft.fwd(y, w);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i].real();
  return out;
}

/// Unit-variance fGn; falls back to the exact recursion if the embedding fails.
inline std::vector<double> gen_fgn(double h, std::size_t n, std::uint64_t seed) {
  try {
    return gen_fgn_circulant(h, n, seed);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmbeddingFailure) throw;
    return gen_fgn_levinson(h, n, seed);
  }
}

/// Fractional Brownian motion path: cumulative sum of fGn.
inline std::vector<double> gen_fbm(double h, std::size_t n, std::uint64_t seed) {
  auto x = gen_fgn(h, n, seed);
  for (std::size_t i = 1; i < n; ++i) x[i] += x[i - 1];
  return x;
}

inline double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct VarSystem {
  Panel panel;
  Eigen::MatrixXi coupling;  // coupling(target, source) = 1 for a true direct edge
};

/// x_t = A x_{t-1} + eps_t with A(target, source). Series ids are X1..XK and the first
/// `burn_in` draws are discarded.
inline VarSystem gen_var_coupled(const Eigen::MatrixXd& a, double noise_sd, std::size_t n, std::uint64_t seed,
                                 std::size_t burn_in = 500) {
  if (a.rows() != a.cols() || a.rows() == 0) throw Error(ErrorCode::InvalidArgument, "coupling matrix must be square");
  if (spectral_radius(a) >= 1.0) throw Error(ErrorCode::Unstable, "coupling matrix spectral radius >= 1");
  const auto k = static_cast<std::size_t>(a.rows());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, noise_sd);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.rows()), e(a.rows());
  std::vector<std::vector<double>> cols(k, std::vector<double>(n));
  for (std::size_t t = 0; t < n + burn_in; ++t) {
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = z(rng);
    x = a * x + e;
    if (t >= burn_in)
      for (std::size_t i = 0; i < k; ++i) cols[i][t - burn_in] = x(static_cast<Eigen::Index>(i));
  }
  std::vector<TimeSeries> ts;
  for (std::size_t i = 0; i < k; ++i)
    ts.push_back(TimeSeries::from_values("X" + std::to_string(i + 1), std::move(cols[i])));
  VarSystem sys;
  sys.panel = Panel::align(std::move(ts));
  sys.coupling = (a.array() != 0.0).cast<int>();
  for (Eigen::Index i = 0; i < sys.coupling.rows(); ++i) sys.coupling(i, i) = 0;
  return sys;
}

struct PiecewiseSpec {
  std::size_t n = 500;
  std::vector<std::size_t> knots;  // segment starts after the first
  std::vector<double> levels;      // trend value at each segment start
  std::vector<double> slopes;      // per-step slope in each segment
  double amplitude = 0.0;
  double period = 12.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

struct PiecewiseSeries {
  TimeSeries series;
  std::vector<double> trend;
  std::vector<double> season;
  std::vector<std::size_t> changepoints;
};

/// y_t = level_j + slope_j (t - start_j) + A sin(2 pi t / P) + noise.
inline PiecewiseSeries gen_piecewise(const PiecewiseSpec& s) {
  const std::size_t segs = s.knots.size() + 1;
  if (s.levels.size() != segs || s.slopes.size() != segs)
    throw Error(ErrorCode::InvalidArgument, "levels and slopes need one entry per segment");
  if (!(s.period >= 2.0)) throw Error(ErrorCode::InvalidArgument, "period must be >= 2");
  for (std::size_t j = 0; j < s.knots.size(); ++j)
    if (s.knots[j] == 0 || s.knots[j] >= s.n || (j > 0 && s.knots[j] <= s.knots[j - 1]))
      throw Error(ErrorCode::InvalidArgument, "knots must be increasing and inside (0, n)");
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  PiecewiseSeries out;
  out.trend.resize(s.n);
  out.season.resize(s.n);
  out.changepoints = s.knots;
  std::vector<double> y(s.n);
  std::size_t seg = 0;
  for (std::size_t t = 0; t < s.n; ++t) {
    while (seg < s.knots.size() && t >= s.knots[seg]) ++seg;
    const double start = seg == 0 ? 0.0 : static_cast<double>(s.knots[seg - 1]);
    out.trend[t] = s.levels[seg] + s.slopes[seg] * (static_cast<double>(t) - start);
    out.season[t] = s.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / s.period);
    const double noise = z(rng);
    y[t] = out.trend[t] + out.season[t] + s.noise_sd * noise;
  }
  out.series = TimeSeries::from_values("Y", std::move(y));
  return out;
}

/// Direct double sum over the joint probabilities.
inline double brute_force_mi(const DiscreteJoint& j) {
  const double n = static_cast<double>(j.n());
  std::vector<double> px(j.rows(), 0.0), py(j.cols(), 0.0);
  for (std::size_t r = 0; r < j.rows(); ++r)
    for (std::size_t c = 0; c < j.cols(); ++c) {
      px[r] += static_cast<double>(j(r, c)) / n;
      py[c] += static_cast<double>(j(r, c)) / n;
    }
  double mi = 0.0;
  for (std::size_t r = 0; r < j.rows(); ++r)
    for (std::size_t c = 0; c < j.cols(); ++c) {
      const double p = static_cast<double>(j(r, c)) / n;
      if (p > 0.0) mi += p * std::log(p / (px[r] * py[c]));
    }
  return mi;
}

/// MI of a bivariate Gaussian with correlation rho, in nats.
inline double gaussian_mi_oracle(double rho) {
  if (!(std::abs(rho) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|rho| must be < 1");
  return -0.5 * std::log1p(-rho * rho);
}

enum class GeneratorKind { fgn, fbm, white_noise, var_coupled, piecewise_trend_seasonal };

inline GeneratorKind parse_generator_kind(std::string_view s) {
  if (s == "fgn") return GeneratorKind::fgn;
  if (s == "fbm") return GeneratorKind::fbm;
  if (s == "white_noise") return GeneratorKind::white_noise;
  if (s == "var_coupled") return GeneratorKind::var_coupled;
  if (s == "piecewise_trend_seasonal" || s == "piecewise") return GeneratorKind::piecewise_trend_seasonal;
  throw Error(ErrorCode::InvalidArgument, "unknown generator kind '" + std::string(s) + "'");
}

}  // namespace breakscope
