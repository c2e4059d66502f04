#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "breakscope/error.hpp"
#include "breakscope/series.hpp"
#include "breakscope/stats.hpp"

namespace breakscope {

enum class SeasonMode { harmonic, none };

inline std::string_view to_string(SeasonMode m) { return m == SeasonMode::harmonic ? "harmonic" : "none"; }

inline SeasonMode parse_season_mode(std::string_view s) {
  if (s == "harmonic") return SeasonMode::harmonic;
  if (s == "none") return SeasonMode::none;
  throw Error(ErrorCode::InvalidArgument, "unknown season mode '" + std::string(s) + "'");
}

/// Knots are segment starts: knot tau splits [.., tau) from [tau, ..).
struct ModelStructure {
  std::vector<std::size_t> trend_knots;
  std::vector<std::size_t> seasonal_knots;
  std::vector<std::size_t> harmonic_orders;  // one per seasonal segment
  double period = 7.0;
  SeasonMode season_mode = SeasonMode::harmonic;

  std::size_t column_count() const {
    std::size_t c = 2 * (trend_knots.size() + 1);
    if (season_mode == SeasonMode::harmonic)
      for (auto l : harmonic_orders) c += 2 * l;
    return c;
  }
  friend bool operator==(const ModelStructure&, const ModelStructure&) = default;
};

struct BeastOptions {
  std::size_t cp_max = 20;
  std::size_t min_seg = 0;  // 0 picks max(10, n/20)
  std::size_t order_max = 3;
  double period = 7.0;
  SeasonMode season_mode = SeasonMode::harmonic;
  double sigma2_shape = 1e-4;
  double sigma2_scale = 1e-4;
  double nu_shape = 0.01;
  double nu_rate = 0.01;
  std::size_t chains = 3;
  std::size_t samples = 10000;  // sweeps per chain, burn-in included
  std::size_t burn_in = 2000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  double cp_prob_min = 0.18;
  double slope_eps = 0.1;  // |slope| below slope_eps * sd(y) / n counts as zero
  bool standardize_input = true;
  bool likelihood_disabled = false;          // sample the structural prior
  std::optional<ModelStructure> fixed_structure;  // disables structure moves
  std::optional<double> fixed_nu;

  std::size_t resolved_min_seg(std::size_t n) const {
    return min_seg > 0 ? min_seg : std::max<std::size_t>(10, n / 20);
  }
};

namespace detail {

inline std::vector<std::size_t> bounds(const std::vector<std::size_t>& knots, std::size_t n) {
  std::vector<std::size_t> b{0};
  b.insert(b.end(), knots.begin(), knots.end());
  b.push_back(n);
  return b;
}

/// Centered ramp of a segment [start, end): runs from about -1 to 1.
inline double ramp(std::size_t t, std::size_t start, std::size_t end) {
  const double len = static_cast<double>(end - start);
  return (2.0 * static_cast<double>(t - start) - (len - 1.0)) / len;
}

inline double log_choose(double a, double k) {
  return std::lgamma(a + 1.0) - std::lgamma(k + 1.0) - std::lgamma(a - k + 1.0);
}

/// Knot layouts with every segment at least s long.
struct KnotSpace {
  std::size_t n = 0, s = 1, cap = 0;

  KnotSpace(std::size_t n_, std::size_t s_, std::size_t cp_max) : n(n_), s(s_) {
    cap = n / s >= 1 ? std::min(cp_max, n / s - 1) : 0;
  }

  /// log of the number of layouts with m knots.
  double log_count(std::size_t m) const {
    const double free = static_cast<double>(n) - static_cast<double>((m + 1) * s);
    return log_choose(free + static_cast<double>(m), static_cast<double>(m));
  }

  std::size_t birth_slots(const std::vector<std::size_t>& k) const {
    const auto b = bounds(k, n);
    std::size_t total = 0;
    for (std::size_t j = 0; j + 1 < b.size(); ++j)
      if (b[j + 1] - b[j] >= 2 * s) total += b[j + 1] - b[j] - 2 * s + 1;
    return total;
  }

  /// idx-th admissible new knot position, counting left to right.
  std::size_t birth_position(const std::vector<std::size_t>& k, std::size_t idx) const {
    const auto b = bounds(k, n);
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      if (b[j + 1] - b[j] < 2 * s) continue;
      const std::size_t cnt = b[j + 1] - b[j] - 2 * s + 1;
      if (idx < cnt) return b[j] + s + idx;
      idx -= cnt;
    }
    throw Error(ErrorCode::OutOfRange, "birth slot index out of range");
  }

  /// Admissible range [lo, hi] for moving knot j.
  std::pair<std::size_t, std::size_t> move_range(const std::vector<std::size_t>& k, std::size_t j) const {
    const std::size_t lo = (j == 0 ? 0 : k[j - 1]) + s;
    const std::size_t hi = (j + 1 == k.size() ? n : k[j + 1]) - s;
    return {lo, hi};
  }

  template <class Rng>
  std::vector<std::size_t> random_layout(std::size_t m, Rng& rng) const {
    m = std::min(m, cap);
    const std::size_t free = n - (m + 1) * s;
    std::vector<std::size_t> slots(free + m);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    std::vector<std::size_t> bars;
    std::sample(slots.begin(), slots.end(), std::back_inserter(bars), m, rng);
    std::sort(bars.begin(), bars.end());
    std::vector<std::size_t> k(m);
    for (std::size_t j = 0; j < m; ++j) k[j] = (j + 1) * s + bars[j] - j;
    return k;
  }
};

}  // namespace detail

/// Dense regression basis: per trend segment an intercept and a centered ramp in t,
/// per seasonal segment sin/cos(2 pi l t / P) for l = 1..L_k; zero outside the segment.
inline Eigen::MatrixXd design_matrix(const ModelStructure& m, std::size_t n) {
  const auto tb = detail::bounds(m.trend_knots, n);
  const auto sb = detail::bounds(m.seasonal_knots, n);
  if (m.season_mode == SeasonMode::harmonic && m.harmonic_orders.size() != sb.size() - 1)
    throw Error(ErrorCode::InvalidArgument, "one harmonic order per seasonal segment required");
  for (std::size_t j = 0; j + 1 < tb.size(); ++j)
    if (tb[j + 1] <= tb[j] || tb[j + 1] - tb[j] < 2)
      throw Error(ErrorCode::SingularSegment, "trend segment shorter than its 2 columns");
  if (m.season_mode == SeasonMode::harmonic)
    for (std::size_t k = 0; k + 1 < sb.size(); ++k)
      if (sb[k + 1] <= sb[k] || sb[k + 1] - sb[k] < 2 * m.harmonic_orders[k])
        throw Error(ErrorCode::SingularSegment, "seasonal segment shorter than its column count");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.column_count()));
  Eigen::Index col = 0;
  for (std::size_t j = 0; j + 1 < tb.size(); ++j, col += 2)
    for (std::size_t t = tb[j]; t < tb[j + 1]; ++t) {
      x(static_cast<Eigen::Index>(t), col) = 1.0;
      x(static_cast<Eigen::Index>(t), col + 1) = detail::ramp(t, tb[j], tb[j + 1]);
    }
  if (m.season_mode == SeasonMode::harmonic)
    for (std::size_t k = 0; k + 1 < sb.size(); ++k)
      for (std::size_t l = 1; l <= m.harmonic_orders[k]; ++l, col += 2)
        for (std::size_t t = sb[k]; t < sb[k + 1]; ++t) {
          const double ang = 2.0 * std::numbers::pi * static_cast<double>(l * t) / m.period;
          x(static_cast<Eigen::Index>(t), col) = std::sin(ang);
          x(static_cast<Eigen::Index>(t), col + 1) = std::cos(ang);
        }
  return x;
}

namespace detail {

struct Gram {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
};

struct ConjugateFit {
  double log_evidence = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd mu;
  double an = 0.0, bn = 0.0;
};

/// Precomputed basis values for one series length and period.
class Basis {
 public:
  static constexpr std::size_t kMaxOrder = 8;

  Basis(std::size_t n, double period, std::size_t order_max) : n_(n), order_max_(order_max) {
    if (order_max > kMaxOrder) throw Error(ErrorCode::InvalidArgument, "harmonic order above 8 is not supported");
    trig_.resize(2 * order_max * n);
    for (std::size_t l = 1; l <= order_max; ++l)
      for (std::size_t t = 0; t < n; ++t) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(l * t) / period;
        trig_[((l - 1) * 2) * n + t] = std::sin(ang);
        trig_[((l - 1) * 2 + 1) * n + t] = std::cos(ang);
      }
  }

  Gram gram(const ModelStructure& m, std::span<const double> y) const {
    const auto p = static_cast<Eigen::Index>(m.column_count());
    Gram g{Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p)};
    const auto tb = bounds(m.trend_knots, n_);
    const auto sb = bounds(m.seasonal_knots, n_);
    const bool season = m.season_mode == SeasonMode::harmonic;
    std::vector<Eigen::Index> season_col(sb.size(), 0);
    Eigen::Index c = static_cast<Eigen::Index>(2 * (tb.size() - 1));
    if (season)
      for (std::size_t k = 0; k + 1 < sb.size(); ++k) {
        season_col[k] = c;
        c += static_cast<Eigen::Index>(2 * m.harmonic_orders[k]);
      }
    std::size_t tj = 0, sk = 0;
    double idx[2 + 2 * kMaxOrder];
    Eigen::Index cols[2 + 2 * kMaxOrder];
    for (std::size_t t = 0; t < n_; ++t) {
      while (t >= tb[tj + 1]) ++tj;
      std::size_t nz = 0;
      cols[nz] = static_cast<Eigen::Index>(2 * tj);
      idx[nz++] = 1.0;
      cols[nz] = static_cast<Eigen::Index>(2 * tj + 1);
      idx[nz++] = ramp(t, tb[tj], tb[tj + 1]);
      if (season) {
        while (t >= sb[sk + 1]) ++sk;
        for (std::size_t q = 0; q < 2 * m.harmonic_orders[sk]; ++q) {
          cols[nz] = season_col[sk] + static_cast<Eigen::Index>(q);
          idx[nz++] = trig_[q * n_ + t];
        }
      }
      for (std::size_t a = 0; a < nz; ++a) {
        g.xty(cols[a]) += idx[a] * y[t];
        for (std::size_t b = 0; b <= a; ++b) g.xtx(cols[a], cols[b]) += idx[a] * idx[b];
      }
    }
    g.xtx = g.xtx.selfadjointView<Eigen::Lower>();
    return g;
  }

  std::size_t order_max() const { return order_max_; }
  double trig(std::size_t q, std::size_t t) const { return trig_[q * n_ + t]; }

 private:
  std::size_t n_, order_max_;
  std::vector<double> trig_;
};

/// Normal-inverse-gamma evidence with beta | sigma2 ~ N(0, sigma2/nu I).
inline ConjugateFit conjugate_fit(const Gram& g, double yty, std::size_t n, double nu, double a0, double b0) {
  ConjugateFit f;
  const auto p = g.xtx.rows();
  Eigen::MatrixXd lam = g.xtx;
  lam.diagonal().array() += nu;
  f.llt.compute(lam);
  if (f.llt.info() != Eigen::Success) throw Error(ErrorCode::SingularSegment, "posterior precision not positive definite");
  f.mu = f.llt.solve(g.xty);
  const double quad = std::max(0.0, yty - g.xty.dot(f.mu));
  f.an = a0 + 0.5 * static_cast<double>(n);
  f.bn = b0 + 0.5 * quad;
  double logdet = 0.0;
  const Eigen::MatrixXd& l = f.llt.matrixLLT();
  for (Eigen::Index i = 0; i < p; ++i) logdet += 2.0 * std::log(l(i, i));
  f.log_evidence = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
                   0.5 * static_cast<double>(p) * std::log(nu) - 0.5 * logdet + a0 * std::log(b0) -
                   f.an * std::log(f.bn) + std::lgamma(f.an) - std::lgamma(a0);
  if (!std::isfinite(f.log_evidence)) throw Error(ErrorCode::NumericalUnderflow, "log evidence is not finite");
  return f;
}

}  // namespace detail

/// Log marginal likelihood of y under a fixed structure and precision scale nu.
inline double log_marginal_likelihood(const ModelStructure& m, std::span<const double> y, const BeastOptions& opt = {},
                                      double nu = 1.0) {
  const Eigen::MatrixXd x = design_matrix(m, y.size());
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  detail::Gram g{x.transpose() * x, x.transpose() * yv};
  return detail::conjugate_fit(g, yv.squaredNorm(), y.size(), nu, opt.sigma2_shape, opt.sigma2_scale).log_evidence;
}

/// One RJ-MCMC-within-Gibbs chain on an already scaled series.
class BeastChain {
 public:
  enum class Move {
    trend_birth, trend_death, trend_move, trend_merge, trend_split,
    season_birth, season_death, season_move, order_change
  };

  BeastChain(std::span<const double> y, const BeastOptions& opt, ModelStructure init, std::uint64_t seed)
      : y_(y.begin(), y.end()),
        opt_(opt),
        basis_(y.size(), opt.period, std::max<std::size_t>(opt.order_max, 1)),
        space_(y.size(), opt.resolved_min_seg(y.size()), opt.cp_max),
        rng_(seed),
        state_(std::move(init)) {
    yty_ = 0.0;
    for (double v : y_) yty_ += v * v;
    nu_ = opt.fixed_nu.value_or(1.0);
    if (!opt_.likelihood_disabled) {
      refresh();
      sigma2_ = fit_.bn / (fit_.an - 1.0 > 0 ? fit_.an - 1.0 : 1.0);
      beta_ = fit_.mu;
    }
  }

  const ModelStructure& structure() const { return state_; }
  double log_evidence() const { return opt_.likelihood_disabled ? 0.0 : fit_.log_evidence; }
  const Eigen::VectorXd& beta() const { return beta_; }
  double sigma2() const { return sigma2_; }
  double nu() const { return nu_; }
  std::size_t min_seg() const { return space_.s; }
  std::size_t knot_cap() const { return space_.cap; }

  /// Log acceptance ratio for adding a trend knot at `pos` (no state change).
  double log_ratio_trend_birth(std::size_t pos) const {
    auto k = state_.trend_knots;
    const std::size_t b = space_.birth_slots(k);
    if (k.size() >= space_.cap || b == 0) return -std::numeric_limits<double>::infinity();
    k.insert(std::upper_bound(k.begin(), k.end(), pos), pos);
    ModelStructure prop = state_;
    prop.trend_knots = k;
    const std::size_t m = state_.trend_knots.size();
    return delta_evidence(prop) + space_.log_count(m) - space_.log_count(m + 1) + std::log(static_cast<double>(b)) -
           std::log(static_cast<double>(m + 1));
  }

  /// Log acceptance ratio for removing trend knot j (no state change).
  double log_ratio_trend_death(std::size_t j) const {
    const std::size_t m = state_.trend_knots.size();
    if (m == 0) return -std::numeric_limits<double>::infinity();
    ModelStructure prop = state_;
    prop.trend_knots.erase(prop.trend_knots.begin() + static_cast<std::ptrdiff_t>(j));
    const std::size_t b = space_.birth_slots(prop.trend_knots);
    return delta_evidence(prop) + space_.log_count(m) - space_.log_count(m - 1) + std::log(static_cast<double>(m)) -
           std::log(static_cast<double>(b));
  }

  /// Structure proposal followed by the Gibbs draws of sigma2, beta and nu.
  void sweep() {
    if (!opt_.fixed_structure) structure_move();
    if (opt_.likelihood_disabled) return;
    std::gamma_distribution<double> g_sigma(fit_.an, 1.0 / fit_.bn);
    sigma2_ = 1.0 / g_sigma(rng_);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::VectorXd e(fit_.mu.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = z(rng_);
    beta_ = fit_.mu + std::sqrt(sigma2_) * fit_.llt.matrixU().solve(e);
    if (!opt_.fixed_nu) {
      const double shape = opt_.nu_shape + 0.5 * static_cast<double>(beta_.size());
      const double rate = opt_.nu_rate + beta_.squaredNorm() / (2.0 * sigma2_);
      std::gamma_distribution<double> g_nu(shape, 1.0 / rate);
      nu_ = std::max(g_nu(rng_), 1e-12);
      fit_ = detail::conjugate_fit(gram_, yty_, y_.size(), nu_, opt_.sigma2_shape, opt_.sigma2_scale);
    }
  }

  /// Trend and seasonal curves for the current beta.
  void curves(std::vector<double>& trend, std::vector<double>& season) const {
    const std::size_t n = y_.size();
    trend.assign(n, 0.0);
    season.assign(n, 0.0);
    if (beta_.size() == 0) return;
    const auto tb = detail::bounds(state_.trend_knots, n);
    for (std::size_t j = 0; j + 1 < tb.size(); ++j)
      for (std::size_t t = tb[j]; t < tb[j + 1]; ++t)
        trend[t] = beta_(static_cast<Eigen::Index>(2 * j)) +
                   beta_(static_cast<Eigen::Index>(2 * j + 1)) * detail::ramp(t, tb[j], tb[j + 1]);
    if (state_.season_mode != SeasonMode::harmonic) return;
    const auto sb = detail::bounds(state_.seasonal_knots, n);
    auto c = static_cast<Eigen::Index>(2 * (tb.size() - 1));
    for (std::size_t k = 0; k + 1 < sb.size(); ++k) {
      for (std::size_t q = 0; q < 2 * state_.harmonic_orders[k]; ++q, ++c)
        for (std::size_t t = sb[k]; t < sb[k + 1]; ++t) season[t] += beta_(c) * basis_.trig(q, t);
    }
  }

  /// Per-step trend slope (scaled units) of the segment holding t.
  double slope_at(std::size_t t) const {
    if (beta_.size() == 0) return 0.0;
    const auto& k = state_.trend_knots;
    const auto j = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), t) - k.begin());
    const std::size_t start = j == 0 ? 0 : k[j - 1];
    const std::size_t end = j == k.size() ? y_.size() : k[j];
    return 2.0 * beta_(static_cast<Eigen::Index>(2 * j + 1)) / static_cast<double>(end - start);
  }

 private:
  double delta_evidence(const ModelStructure& prop) const {
    if (opt_.likelihood_disabled) return 0.0;
    const auto g = basis_.gram(prop, y_);
    const auto f = detail::conjugate_fit(g, yty_, y_.size(), nu_, opt_.sigma2_shape, opt_.sigma2_scale);
    return f.log_evidence - fit_.log_evidence;
  }

  void refresh() {
    gram_ = basis_.gram(state_, y_);
    fit_ = detail::conjugate_fit(gram_, yty_, y_.size(), nu_, opt_.sigma2_shape, opt_.sigma2_scale);
  }

  bool try_accept(ModelStructure prop, double log_prior_proposal) {
    double log_alpha = log_prior_proposal;
    detail::Gram g;
    detail::ConjugateFit f;
    if (!opt_.likelihood_disabled) {
      try {
        g = basis_.gram(prop, y_);
        f = detail::conjugate_fit(g, yty_, y_.size(), nu_, opt_.sigma2_shape, opt_.sigma2_scale);
      } catch (const Error&) {
        return false;
      }
      log_alpha += f.log_evidence - fit_.log_evidence;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (!(std::log(u(rng_)) < log_alpha)) return false;
    state_ = std::move(prop);
    if (!opt_.likelihood_disabled) {
      gram_ = std::move(g);
      fit_ = std::move(f);
    }
    return true;
  }

  template <class T>
  T pick(T count) {
    std::uniform_int_distribution<T> d(0, count - 1);
    return d(rng_);
  }

  bool birth(std::vector<std::size_t> ModelStructure::*knots, bool seasonal) {
    const auto& k = state_.*knots;
    const std::size_t m = k.size();
    const std::size_t b = space_.birth_slots(k);
    if (m >= space_.cap || b == 0) return false;
    const std::size_t pos = space_.birth_position(k, pick(b));
    ModelStructure prop = state_;
    auto& nk = prop.*knots;
    const auto it = std::upper_bound(nk.begin(), nk.end(), pos);
    const auto seg = static_cast<std::size_t>(it - nk.begin());
    nk.insert(it, pos);
    if (seasonal) {
      // right half draws a fresh order; this cancels against the order prior
      const std::size_t order = 1 + pick(opt_.order_max);
      prop.harmonic_orders.insert(prop.harmonic_orders.begin() + static_cast<std::ptrdiff_t>(seg + 1), order);
    }
    const double lr = space_.log_count(m) - space_.log_count(m + 1) + std::log(static_cast<double>(b)) -
                      std::log(static_cast<double>(m + 1));
    return try_accept(std::move(prop), lr);
  }

  bool death(std::vector<std::size_t> ModelStructure::*knots, bool seasonal) {
    const std::size_t m = (state_.*knots).size();
    if (m == 0) return false;
    const std::size_t j = pick(m);
    ModelStructure prop = state_;
    auto& nk = prop.*knots;
    nk.erase(nk.begin() + static_cast<std::ptrdiff_t>(j));
    if (seasonal) prop.harmonic_orders.erase(prop.harmonic_orders.begin() + static_cast<std::ptrdiff_t>(j + 1));
    const std::size_t b = space_.birth_slots(nk);
    const double lr = space_.log_count(m) - space_.log_count(m - 1) + std::log(static_cast<double>(m)) -
                      std::log(static_cast<double>(b));
    return try_accept(std::move(prop), lr);
  }

  bool move(std::vector<std::size_t> ModelStructure::*knots) {
    const std::size_t m = (state_.*knots).size();
    if (m == 0) return false;
    const std::size_t j = pick(m);
    const auto [lo, hi] = space_.move_range(state_.*knots, j);
    if (hi <= lo) return false;
    ModelStructure prop = state_;
    const std::size_t cur = (state_.*knots)[j];
    if (pick(2) == 0) {
      // local step of at most half a minimum segment
      const auto r = static_cast<long>(std::max<std::size_t>(1, space_.s / 2));
      std::uniform_int_distribution<long> d(-r, r - 1);
      long step = d(rng_);
      if (step >= 0) ++step;
      const long np = static_cast<long>(cur) + step;
      if (np < static_cast<long>(lo) || np > static_cast<long>(hi)) return false;
      (prop.*knots)[j] = static_cast<std::size_t>(np);
    } else {
      (prop.*knots)[j] = lo + pick(hi - lo + 1);
    }
    if ((prop.*knots)[j] == cur) return false;
    return try_accept(std::move(prop), 0.0);
  }

  // Merge two adjacent trend knots into one, or split one into two, inside the same
  // neighbour bounds [L, U). R single positions and S ordered pairs fit there.
  static double merge_positions(std::size_t span, std::size_t s) { return static_cast<double>(span - 2 * s + 1); }
  static double split_pairs(std::size_t span, std::size_t s) {
    const double g = static_cast<double>(span) - 3.0 * static_cast<double>(s);
    return (g + 1.0) * (g + 2.0) / 2.0;
  }

  bool trend_merge() {
    const auto& k = state_.trend_knots;
    const std::size_t m = k.size();
    if (m < 2) return false;
    const std::size_t j = pick(m - 1);
    const std::size_t lo = j == 0 ? 0 : k[j - 1];
    const std::size_t hi = j + 2 == m ? y_.size() : k[j + 2];
    const std::size_t s = space_.s;
    const double r = merge_positions(hi - lo, s);
    const std::size_t pos = lo + s + pick(static_cast<std::size_t>(r));
    ModelStructure prop = state_;
    auto& nk = prop.trend_knots;
    nk.erase(nk.begin() + static_cast<std::ptrdiff_t>(j), nk.begin() + static_cast<std::ptrdiff_t>(j + 2));
    nk.insert(nk.begin() + static_cast<std::ptrdiff_t>(j), pos);
    const double lr = space_.log_count(m) - space_.log_count(m - 1) + std::log(r) - std::log(split_pairs(hi - lo, s));
    return try_accept(std::move(prop), lr);
  }

  bool trend_split() {
    const auto& k = state_.trend_knots;
    const std::size_t m = k.size();
    if (m == 0 || m >= space_.cap) return false;
    const std::size_t j = pick(m);
    const std::size_t lo = j == 0 ? 0 : k[j - 1];
    const std::size_t hi = j + 1 == m ? y_.size() : k[j + 1];
    const std::size_t s = space_.s;
    if (hi - lo < 3 * s) return false;
    const std::size_t g = hi - lo - 3 * s;
    std::size_t x = pick(g + 2), z = pick(g + 2);
    while (z == x) z = pick(g + 2);
    if (z < x) std::swap(x, z);
    ModelStructure prop = state_;
    auto& nk = prop.trend_knots;
    nk[j] = lo + s + x;
    nk.insert(nk.begin() + static_cast<std::ptrdiff_t>(j + 1), lo + 2 * s + z - 1);
    const double lr = space_.log_count(m) - space_.log_count(m + 1) + std::log(split_pairs(hi - lo, s)) -
                      std::log(merge_positions(hi - lo, s));
    return try_accept(std::move(prop), lr);
  }

  bool order_change() {
    if (opt_.order_max < 2) return false;
    const std::size_t k = pick(state_.harmonic_orders.size());
    ModelStructure prop = state_;
    std::size_t o = 1 + pick(opt_.order_max - 1);
    if (o >= state_.harmonic_orders[k]) ++o;
    prop.harmonic_orders[k] = o;
    return try_accept(std::move(prop), 0.0);
  }

  void structure_move() {
    const bool season = state_.season_mode == SeasonMode::harmonic;
    const auto mv = static_cast<Move>(pick<int>(season ? 9 : 5));
    switch (mv) {
      case Move::trend_birth: birth(&ModelStructure::trend_knots, false); break;
      case Move::trend_death: death(&ModelStructure::trend_knots, false); break;
      case Move::trend_move: move(&ModelStructure::trend_knots); break;
      case Move::trend_merge: trend_merge(); break;
      case Move::trend_split: trend_split(); break;
      case Move::season_birth: birth(&ModelStructure::seasonal_knots, true); break;
      case Move::season_death: death(&ModelStructure::seasonal_knots, true); break;
      case Move::season_move: move(&ModelStructure::seasonal_knots); break;
      case Move::order_change: order_change(); break;
    }
  }

  std::vector<double> y_;
  BeastOptions opt_;
  detail::Basis basis_;
  detail::KnotSpace space_;
  std::mt19937_64 rng_;
  ModelStructure state_;
  double yty_ = 0.0;
  double nu_ = 1.0;
  double sigma2_ = 1.0;
  Eigen::VectorXd beta_;
  detail::Gram gram_;
  detail::ConjugateFit fit_;
};

struct SlopeSign {
  double pos = 0.0;
  double zero = 0.0;
  double neg = 0.0;
};

struct ExtractedCp {
  std::size_t index = 0;
  Date date;
  double probability = 0.0;  // mass of knots within half a minimum segment
  double jump = 0.0;         // posterior-mean trend change across the knot, input units
};

struct PosteriorSummary {
  std::string source_id;
  std::vector<Date> dates;
  std::vector<double> raw;
  std::size_t cp_max = 0;
  std::size_t min_seg = 0;
  std::size_t retained = 0;
  std::vector<double> trend_cp_prob, seasonal_cp_prob;
  std::vector<double> ncp_trend_dist, ncp_seasonal_dist;
  std::vector<double> cumulative_ncp_dist;  // Pr(trend + seasonal knots >= k)
  std::vector<SlopeSign> slope_sign;
  std::vector<double> trend, trend_lo, trend_hi;
  std::vector<double> seasonal, seasonal_lo, seasonal_hi;
  std::vector<double> seasonal_order;
  std::vector<double> residual;
  std::vector<ExtractedCp> trend_cps, seasonal_cps;
  std::vector<double> beta_mean, beta_sd;  // only with a fixed structure
  double rhat = 1.0;
  bool not_converged = false;
  SeasonMode season_mode = SeasonMode::harmonic;

  std::size_t ncp_trend_mode() const {
    return static_cast<std::size_t>(std::max_element(ncp_trend_dist.begin(), ncp_trend_dist.end()) -
                                    ncp_trend_dist.begin());
  }
};

namespace detail {

inline std::size_t dist_median(const std::vector<double>& p) {
  double c = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    c += p[k];
    if (c >= 0.5 - 1e-12) return k;
  }
  return p.empty() ? 0 : p.size() - 1;
}

/// Peaks of the knot-probability curve summed over +-h, greedily, at most `cap`.
inline std::vector<ExtractedCp> extract_cps(const std::vector<double>& prob, const std::vector<double>& jump_sum,
                                            const std::vector<double>& jump_cnt, std::size_t min_seg,
                                            double threshold, std::size_t cap, std::span<const Date> dates,
                                            double scale) {
  const std::size_t n = prob.size();
  const std::size_t h = min_seg > 1 ? (min_seg - 1) / 2 : 0;
  std::vector<double> w(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t u = t >= h ? t - h : 0; u <= std::min(n - 1, t + h); ++u) w[t] += prob[u];
  std::vector<ExtractedCp> out;
  std::vector<bool> blocked(n, false);
  while (out.size() < cap) {
    std::size_t best = n;
    for (std::size_t t = 0; t < n; ++t)
      if (!blocked[t] && (best == n || w[t] > w[best])) best = t;
    if (best == n || w[best] < threshold) break;
    const std::size_t lo = best >= h ? best - h : 0;
    const std::size_t hi = std::min(n - 1, best + h);
    double mass = 0.0, loc = 0.0, js = 0.0, jc = 0.0;
    for (std::size_t u = lo; u <= hi; ++u) {
      mass += prob[u];
      loc += prob[u] * static_cast<double>(u);
      js += jump_sum[u];
      jc += jump_cnt[u];
    }
    ExtractedCp cp;
    cp.index = mass > 0 ? static_cast<std::size_t>(std::lround(loc / mass)) : best;
    cp.date = dates[cp.index];
    cp.probability = std::min(1.0, w[best]);
    cp.jump = jc > 0 ? scale * js / jc : 0.0;
    out.push_back(cp);
    for (std::size_t u = best >= 2 * h + 1 ? best - 2 * h : 0; u <= std::min(n - 1, best + 2 * h); ++u)
      blocked[u] = true;
  }
  std::sort(out.begin(), out.end(), [](const ExtractedCp& a, const ExtractedCp& b) { return a.index < b.index; });
  return out;
}

/// Split-chain potential scale reduction.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> parts;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) continue;
    parts.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    parts.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  if (parts.size() < 2) return 1.0;
  const double len = static_cast<double>(parts.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& p : parts) {
    means.push_back(mean(p));
    w += variance(p) * len / (len - 1.0);
  }
  w /= static_cast<double>(parts.size());
  const double b = len * variance(means) * static_cast<double>(means.size()) / static_cast<double>(means.size() - 1);
  if (!(w > 0.0)) return 1.0;
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

}  // namespace detail

/// Runs the configured chains and pools retained sweeps into a summary.
inline PosteriorSummary run_sampler(const TimeSeries& series, const BeastOptions& opt = {}) {
  const std::size_t n = series.size();
  const std::size_t s = opt.resolved_min_seg(n);
  if (n < 4 * s) throw Error(ErrorCode::TooShort, "series shorter than four minimum segments");
  if (opt.burn_in >= opt.samples) throw Error(ErrorCode::InvalidArgument, "burn-in must be below the sweep count");
  if (opt.chains == 0 || opt.thin == 0 || opt.order_max == 0 || !(opt.period >= 2.0))
    throw Error(ErrorCode::InvalidArgument, "chains, thin, order and period must be positive");
  const double ym = mean(series.values());
  double ysd = std::sqrt(variance(series.values()));
  if (!opt.standardize_input) ysd = 1.0;
  if (!(ysd > 0.0)) throw Error(ErrorCode::ZeroVariance, "series is constant");
  std::vector<double> y(n);
  for (std::size_t t = 0; t < n; ++t) y[t] = opt.standardize_input ? (series.values()[t] - ym) / ysd : series.values()[t];
  const double shift = opt.standardize_input ? ym : 0.0;

  const detail::KnotSpace space(n, s, opt.cp_max);
  PosteriorSummary out;
  out.source_id = series.id();
  out.dates.assign(series.dates().begin(), series.dates().end());
  out.raw.assign(series.values().begin(), series.values().end());
  out.cp_max = opt.cp_max;
  out.min_seg = s;
  out.season_mode = opt.season_mode;

  std::vector<double> tcp(n, 0), scp(n, 0), tsum(n, 0), tsq(n, 0), ssum(n, 0), ssq(n, 0), ordsum(n, 0);
  std::vector<double> jsum(n, 0), jcnt(n, 0), sjsum(n, 0), sjcnt(n, 0);
  std::vector<double> pos(n, 0), zero(n, 0), neg(n, 0);
  std::vector<std::uint64_t> ncp_t(opt.cp_max + 1, 0), ncp_s(opt.cp_max + 1, 0), ncp_total(2 * opt.cp_max + 2, 0);
  Eigen::VectorXd bsum, bsq;
  std::vector<std::vector<double>> evid(opt.chains);
  std::vector<double> trend, season;
  std::size_t retained = 0;
  // zero-slope band in the units the chain works in
  const double eps = opt.slope_eps * std::sqrt(variance(y)) / static_cast<double>(n);

  for (std::size_t c = 0; c < opt.chains; ++c) {
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                      static_cast<std::uint32_t>(c), 0x5eedu};
    std::mt19937_64 init_rng(seq);
    ModelStructure init;
    init.period = opt.period;
    init.season_mode = opt.season_mode;
    if (opt.fixed_structure) {
      init = *opt.fixed_structure;
    } else if (c == 0) {
      if (opt.season_mode == SeasonMode::harmonic) init.harmonic_orders = {1};
    } else {
      init.trend_knots = space.random_layout(opt.cp_max / 2, init_rng);
      if (opt.season_mode == SeasonMode::harmonic) {
        init.seasonal_knots = space.random_layout(opt.cp_max / 2, init_rng);
        std::uniform_int_distribution<std::size_t> ord(1, opt.order_max);
        for (std::size_t k = 0; k <= init.seasonal_knots.size(); ++k) init.harmonic_orders.push_back(ord(init_rng));
      }
    }
    BeastChain chain(y, opt, init, init_rng());
    for (std::size_t it = 0; it < opt.samples; ++it) {
      chain.sweep();
      if (it < opt.burn_in || (it - opt.burn_in) % opt.thin != 0) continue;
      ++retained;
      const auto& st = chain.structure();
      evid[c].push_back(chain.log_evidence());
      const std::size_t mt = st.trend_knots.size();
      const std::size_t ms = st.season_mode == SeasonMode::harmonic ? st.seasonal_knots.size() : 0;
      ++ncp_t[std::min(mt, opt.cp_max)];
      ++ncp_s[std::min(ms, opt.cp_max)];
      ++ncp_total[std::min(mt + ms, 2 * opt.cp_max + 1)];
      for (auto k : st.trend_knots) tcp[k] += 1;
      if (st.season_mode == SeasonMode::harmonic)
        for (auto k : st.seasonal_knots) scp[k] += 1;
      if (opt.likelihood_disabled) continue;
      chain.curves(trend, season);
      for (std::size_t t = 0; t < n; ++t) {
        tsum[t] += trend[t];
        tsq[t] += trend[t] * trend[t];
        ssum[t] += season[t];
        ssq[t] += season[t] * season[t];
        const double sl = chain.slope_at(t);
        if (std::abs(sl) < eps)
          zero[t] += 1;
        else if (sl > 0)
          pos[t] += 1;
        else
          neg[t] += 1;
      }
      for (auto k : st.trend_knots) {
        jsum[k] += trend[std::min(k + 1, n - 1)] - trend[k - 1];
        jcnt[k] += 1;
      }
      if (st.season_mode == SeasonMode::harmonic) {
        const auto sb = detail::bounds(st.seasonal_knots, n);
        for (std::size_t k = 0; k + 1 < sb.size(); ++k)
          for (std::size_t t = sb[k]; t < sb[k + 1]; ++t) ordsum[t] += static_cast<double>(st.harmonic_orders[k]);
        for (auto k : st.seasonal_knots) {
          sjsum[k] += season[std::min(k + 1, n - 1)] - season[k - 1];
          sjcnt[k] += 1;
        }
      }
      if (opt.fixed_structure) {
        const auto& b = chain.beta();
        if (bsum.size() == 0) {
          bsum = Eigen::VectorXd::Zero(b.size());
          bsq = Eigen::VectorXd::Zero(b.size());
        }
        bsum += b;
        bsq += b.cwiseProduct(b);
      }
    }
  }

  const double r = static_cast<double>(retained);
  out.retained = retained;
  auto norm = [&](const std::vector<std::uint64_t>& v) {
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = static_cast<double>(v[i]) / r;
    return d;
  };
  out.ncp_trend_dist = norm(ncp_t);
  out.ncp_seasonal_dist = norm(ncp_s);
  {
    std::vector<std::uint64_t> tail(ncp_total.size(), 0);
    std::uint64_t acc = 0;
    for (std::size_t k = ncp_total.size(); k-- > 0;) {
      acc += ncp_total[k];
      tail[k] = acc;
    }
    out.cumulative_ncp_dist = norm(tail);
  }
  out.trend_cp_prob.resize(n);
  out.seasonal_cp_prob.resize(n);
  out.slope_sign.resize(n);
  out.trend.resize(n);
  out.trend_lo.resize(n);
  out.trend_hi.resize(n);
  out.seasonal.resize(n);
  out.seasonal_lo.resize(n);
  out.seasonal_hi.resize(n);
  out.seasonal_order.resize(n);
  out.residual.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.trend_cp_prob[t] = tcp[t] / r;
    out.seasonal_cp_prob[t] = scp[t] / r;
    const double tot = pos[t] + zero[t] + neg[t];
    if (tot > 0) out.slope_sign[t] = {pos[t] / tot, zero[t] / tot, neg[t] / tot};
    const double tm = tsum[t] / r, tv = std::max(0.0, tsq[t] / r - tm * tm);
    const double sm = ssum[t] / r, sv = std::max(0.0, ssq[t] / r - sm * sm);
    out.trend[t] = shift + ysd * tm;
    out.trend_lo[t] = shift + ysd * (tm - 1.96 * std::sqrt(tv));
    out.trend_hi[t] = shift + ysd * (tm + 1.96 * std::sqrt(tv));
    out.seasonal[t] = ysd * sm;
    out.seasonal_lo[t] = ysd * (sm - 1.96 * std::sqrt(sv));
    out.seasonal_hi[t] = ysd * (sm + 1.96 * std::sqrt(sv));
    out.seasonal_order[t] = opt.season_mode == SeasonMode::harmonic ? ordsum[t] / r : 0.0;
    out.residual[t] = out.raw[t] - out.trend[t] - out.seasonal[t];
  }
  if (!opt.likelihood_disabled) {
    out.trend_cps = detail::extract_cps(out.trend_cp_prob, jsum, jcnt, s, opt.cp_prob_min,
                                        detail::dist_median(out.ncp_trend_dist), series.dates(), ysd);
    if (opt.season_mode == SeasonMode::harmonic)
      out.seasonal_cps = detail::extract_cps(out.seasonal_cp_prob, sjsum, sjcnt, s, opt.cp_prob_min,
                                             detail::dist_median(out.ncp_seasonal_dist), series.dates(), ysd);
  }
  if (bsum.size() > 0) {
    out.beta_mean.resize(static_cast<std::size_t>(bsum.size()));
    out.beta_sd.resize(out.beta_mean.size());
    for (Eigen::Index i = 0; i < bsum.size(); ++i) {
      const double m = bsum(i) / r;
      out.beta_mean[static_cast<std::size_t>(i)] = m;
      out.beta_sd[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, bsq(i) / r - m * m));
    }
  }
  out.rhat = opt.likelihood_disabled ? 1.0 : detail::split_rhat(evid);
  out.not_converged = out.rhat > 1.2;
  return out;
}

inline SlopeSign classify_slope_sign(const PosteriorSummary& s, std::size_t t) {
  if (t >= s.slope_sign.size()) throw Error(ErrorCode::OutOfAxis, "time index outside the series");
  return s.slope_sign[t];
}

inline Eigen::MatrixXd trend_correlation_matrix(const std::vector<PosteriorSummary>& summaries) {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids;
  for (const auto& s : summaries) {
    if (!rows.empty() && s.dates != summaries.front().dates)
      throw Error(ErrorCode::InvalidArgument, "trend curves must share a date axis");
    rows.push_back(s.trend);
    ids.push_back(s.source_id);
  }
  return pearson_correlation_matrix(rows, ids);
}

}  // namespace breakscope
