#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "breakscope/error.hpp"
#include "breakscope/knn.hpp"
#include "breakscope/preprocess.hpp"
#include "breakscope/series.hpp"
#include "breakscope/stats.hpp"

namespace breakscope {

/// Two-way contingency table of counts; rows index X, columns index Y.
class DiscreteJoint {
 public:
  DiscreteJoint() = default;
  explicit DiscreteJoint(std::vector<std::vector<std::uint64_t>> counts) : counts_(std::move(counts)) {
    if (counts_.empty() || counts_.front().empty()) throw Error(ErrorCode::EmptyTable, "contingency table is empty");
    for (const auto& r : counts_) {
      if (r.size() != counts_.front().size()) throw Error(ErrorCode::InvalidArgument, "ragged contingency table");
      for (auto c : r) n_ += c;
    }
    if (n_ == 0) throw Error(ErrorCode::EmptyTable, "contingency table has zero total count");
  }

  std::size_t rows() const { return counts_.size(); }
  std::size_t cols() const { return counts_.empty() ? 0 : counts_.front().size(); }
  std::uint64_t operator()(std::size_t r, std::size_t c) const { return counts_[r][c]; }
  std::uint64_t n() const { return n_; }
  const std::vector<std::vector<std::uint64_t>>& counts() const { return counts_; }

  std::vector<std::uint64_t> row_sums() const {
    std::vector<std::uint64_t> s(rows(), 0);
    for (std::size_t r = 0; r < rows(); ++r)
      for (auto c : counts_[r]) s[r] += c;
    return s;
  }
  std::vector<std::uint64_t> col_sums() const {
    std::vector<std::uint64_t> s(cols(), 0);
    for (const auto& r : counts_)
      for (std::size_t c = 0; c < r.size(); ++c) s[c] += r[c];
    return s;
  }

  DiscreteJoint transposed() const {
    std::vector<std::vector<std::uint64_t>> t(cols(), std::vector<std::uint64_t>(rows()));
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t c = 0; c < cols(); ++c) t[c][r] = counts_[r][c];
    return DiscreteJoint(std::move(t));
  }

 private:
  std::vector<std::vector<std::uint64_t>> counts_;
  std::uint64_t n_ = 0;
};

enum class MiEstimator { binned, knn };

inline std::string_view to_string(MiEstimator e) { return e == MiEstimator::binned ? "binned" : "knn"; }

inline MiEstimator parse_mi_estimator(std::string_view s) {
  if (s == "binned") return MiEstimator::binned;
  if (s == "knn") return MiEstimator::knn;
  throw Error(ErrorCode::InvalidArgument, "unknown MI estimator '" + std::string(s) + "'");
}

/// Mutual information in nats.
struct MiEstimate {
  double value = 0.0;
  MiEstimator estimator = MiEstimator::binned;
  std::size_t param = 0;  // bins per axis, or k
  bool negative = false;         // k-NN estimate below zero, reported unclamped
  bool near_degenerate = false;  // k-NN neighbourhoods collapsed onto a curve
};

inline constexpr double kNatsToBits = 1.4426950408889634;

/// -sum p ln p with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw Error(ErrorCode::NotNormalized, "negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::NotNormalized, "probabilities do not sum to 1");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

namespace detail {
inline double count_entropy(const std::vector<std::uint64_t>& counts, std::uint64_t n) {
  const double nd = static_cast<double>(n);
  double h = 0.0;
  for (auto c : counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / nd;
      h -= p * std::log(p);
    }
  return h;
}
}  // namespace detail

inline double marginal_entropy_x(const DiscreteJoint& j) { return detail::count_entropy(j.row_sums(), j.n()); }
inline double marginal_entropy_y(const DiscreteJoint& j) { return detail::count_entropy(j.col_sums(), j.n()); }

inline double joint_entropy(const DiscreteJoint& j) {
  std::vector<std::uint64_t> all;
  for (const auto& r : j.counts()) all.insert(all.end(), r.begin(), r.end());
  return detail::count_entropy(all, j.n());
}

/// H(X|Y) = H(X,Y) - H(Y).
inline double conditional_entropy(const DiscreteJoint& j) { return joint_entropy(j) - marginal_entropy_y(j); }

/// Plug-in MI. Each cell term is evaluated from integer counts and the terms are summed
/// in sorted order, so transposing the table gives the identical double.
inline MiEstimate mutual_information_discrete(const DiscreteJoint& j) {
  const auto rs = j.row_sums();
  const auto cs = j.col_sums();
  const double n = static_cast<double>(j.n());
  std::vector<double> terms;
  for (std::size_t r = 0; r < j.rows(); ++r)
    for (std::size_t c = 0; c < j.cols(); ++c) {
      const auto cnt = j(r, c);
      if (cnt == 0) continue;
      const double num = static_cast<double>(cnt) * n;
      const double den = static_cast<double>(rs[r]) * static_cast<double>(cs[c]);
      terms.push_back(static_cast<double>(cnt) / n * std::log(num / den));
    }
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  MiEstimate e;
  e.value = std::max(0.0, s);
  e.estimator = MiEstimator::binned;
  e.param = std::max(j.rows(), j.cols());
  return e;
}

/// Bin index 0..bins-1 by rank (ties broken by position).
inline std::vector<std::size_t> equiprobable_bins(std::span<const double> x, std::size_t bins) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<std::size_t> out(x.size());
  for (std::size_t r = 0; r < order.size(); ++r) out[order[r]] = r * bins / x.size();
  return out;
}

inline std::size_t default_bins(std::size_t n) {
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n) / 5.0))));
}

/// Binned plug-in MI with equiprobable marginal bins; bins = 0 picks floor(sqrt(n/5)).
inline MiEstimate mi_binned(std::span<const double> x, std::span<const double> y, std::size_t bins = 0) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "MI inputs differ in length");
  if (x.size() < 10) throw Error(ErrorCode::TooShort, "binned MI needs at least 10 points");
  if (bins == 0) bins = default_bins(x.size());
  const auto bx = equiprobable_bins(x, bins);
  const auto by = equiprobable_bins(y, bins);
  std::vector<std::vector<std::uint64_t>> t(bins, std::vector<std::uint64_t>(bins, 0));
  for (std::size_t i = 0; i < x.size(); ++i) ++t[bx[i]][by[i]];
  auto e = mutual_information_discrete(DiscreteJoint(std::move(t)));
  e.param = bins;
  return e;
}

namespace detail {
inline std::uint64_t content_hash(std::span<const double> x) {
  std::uint64_t h = 1469598103934665603ull;
  for (double v : x) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace detail

/// Standardized copy with a ~1e-10 jitter. The jitter depends only on the seed and the
/// column's content, so the same column is always prepared identically.
inline std::vector<double> prepare_knn_column(std::span<const double> x, std::uint64_t seed = 0) {
  const double sd = std::sqrt(variance(x));
  if (!(sd > 0.0)) throw Error(ErrorCode::DegenerateDimension, "constant input to k-NN estimator");
  auto z = standardize(x);
  std::mt19937_64 rng(seed ^ detail::content_hash(x));
  std::uniform_real_distribution<double> u(-0.5e-10, 0.5e-10);
  for (double& v : z) v += u(rng);
  return z;
}

struct KnnCmiResult {
  double value = 0.0;
  double median_nx = 0.0;
  double median_ny = 0.0;
};

/// KSG conditional MI I(X;Y|Z) on prepared columns (max-norm, first KSG variant).
/// With Z empty it is the ordinary KSG mutual information.
inline KnnCmiResult ksg_cmi(const std::vector<std::span<const double>>& xs,
                            const std::vector<std::span<const double>>& ys,
                            const std::vector<std::span<const double>>& zs, std::size_t k) {
  if (xs.empty() || ys.empty()) throw Error(ErrorCode::InvalidArgument, "k-NN MI needs non-empty X and Y");
  const std::size_t n = xs.front().size();
  if (k == 0 || 2 * k >= n) throw Error(ErrorCode::InvalidArgument, "k must satisfy 1 <= k < n/2");
  std::vector<std::span<const double>> joint;
  joint.insert(joint.end(), xs.begin(), xs.end());
  joint.insert(joint.end(), ys.begin(), ys.end());
  joint.insert(joint.end(), zs.begin(), zs.end());
  for (const auto& c : joint)
    if (c.size() != n) throw Error(ErrorCode::InvalidArgument, "k-NN MI columns differ in length");
  const KdTree tree(PointCloud::from_columns(joint));
  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = tree.kth_distance(i, k);

  auto sub = [&](const std::vector<std::span<const double>>& a, const std::vector<std::span<const double>>& b) {
    std::vector<std::span<const double>> c(a);
    c.insert(c.end(), b.begin(), b.end());
    return c;
  };
  const RadiusCounter cx(sub(xs, zs));
  const RadiusCounter cy(sub(ys, zs));
  std::optional<RadiusCounter> cz;
  if (!zs.empty()) cz.emplace(zs);

  double acc = 0.0;
  std::vector<double> nxs(n), nys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t nx = cx.count_within(i, eps[i]);
    const std::size_t ny = cy.count_within(i, eps[i]);
    nxs[i] = static_cast<double>(nx);
    nys[i] = static_cast<double>(ny);
    double t = digamma_int(nx + 1) + digamma_int(ny + 1);
    if (cz) t -= digamma_int(cz->count_within(i, eps[i]) + 1);
    acc += t;
  }
  KnnCmiResult r;
  r.value = digamma_int(k) - acc / static_cast<double>(n);
  if (!cz) r.value += digamma_int(n);
  r.median_nx = quantile(std::move(nxs), 0.5);
  r.median_ny = quantile(std::move(nys), 0.5);
  return r;
}

/// KSG mutual information between two scalar sequences, k = 4 by default.
inline MiEstimate mi_knn(std::span<const double> x, std::span<const double> y, std::size_t k = 4,
                         std::uint64_t seed = 0) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "MI inputs differ in length");
  if (x.size() < 50) throw Error(ErrorCode::TooShort, "k-NN MI needs at least 50 points");
  if (k == 0 || 2 * k >= x.size()) throw Error(ErrorCode::InvalidArgument, "k must satisfy 1 <= k < n/2");
  const auto px = prepare_knn_column(x, seed);
  const auto py = prepare_knn_column(y, seed);
  const auto r = ksg_cmi({px}, {py}, {}, k);
  MiEstimate e;
  e.value = r.value;
  e.estimator = MiEstimator::knn;
  e.param = k;
  e.negative = r.value < 0.0;
  e.near_degenerate = r.median_nx <= static_cast<double>(k) && r.median_ny <= static_cast<double>(k);
  return e;
}

/// Rolling MI between two aligned series (same dates), stamped at window end.
inline RollingSeries rolling_mi(const TimeSeries& a, const TimeSeries& b, const RollingWindowSpec& spec = {60, 1},
                                MiEstimator estimator = MiEstimator::knn, std::size_t k = 4, std::uint64_t seed = 0) {
  if (a.size() != b.size() || !std::equal(a.dates().begin(), a.dates().end(), b.dates().begin()))
    throw Error(ErrorCode::InvalidArgument, "rolling MI needs two series on the same date axis");
  if (spec.window_len > a.size())
    throw Error(ErrorCode::WindowTooLong, "window of " + std::to_string(spec.window_len) +
                                              " exceeds series length " + std::to_string(a.size()));
  if (spec.window_len == 0 || spec.step == 0)
    throw Error(ErrorCode::InvalidArgument, "window length and step must be positive");
  RollingSeries out;
  out.source_id = a.id() + "~" + b.id();
  out.statistic = estimator == MiEstimator::knn ? "mi_knn" : "mi_binned";
  const std::size_t count = spec.count(a.size());
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * spec.step;
    const Date stamp = a.dates()[start + spec.window_len - 1];
    try {
      const auto xa = a.values().subspan(start, spec.window_len);
      const auto xb = b.values().subspan(start, spec.window_len);
      const auto e = estimator == MiEstimator::knn ? mi_knn(xa, xb, k, seed) : mi_binned(xa, xb);
      out.points.push_back({stamp, e.value});
    } catch (const Error& e) {
      out.gaps.push_back({stamp, e.what()});
    }
  }
  return out;
}

struct DecouplingEvent {
  Date onset;
  Date peak;
  double peak_gap = 0.0;
};

/// Runs of >= run_len dates with |a - b| > gap_threshold that follow >= run_len dates
/// at or below the threshold. Curves are joined on their common dates.
inline std::vector<DecouplingEvent> mi_decoupling(const RollingSeries& a, const RollingSeries& b,
                                                  double gap_threshold = 0.1, std::size_t run_len = 5) {
  if (run_len == 0) throw Error(ErrorCode::InvalidArgument, "run length must be positive");
  std::vector<Date> dates;
  std::vector<double> gap;
  std::size_t j = 0;
  for (const auto& p : a.points) {
    while (j < b.points.size() && b.points[j].date < p.date) ++j;
    if (j < b.points.size() && b.points[j].date == p.date) {
      dates.push_back(p.date);
      gap.push_back(std::abs(p.value - b.points[j].value));
    }
  }
  if (dates.empty()) throw Error(ErrorCode::NoOverlap, "MI curves share no dates");
  std::vector<DecouplingEvent> out;
  std::size_t quiet = 0;
  std::size_t i = 0;
  while (i < gap.size()) {
    if (!(gap[i] > gap_threshold)) {
      ++quiet;
      ++i;
      continue;
    }
    std::size_t e = i;
    std::size_t peak = i;
    while (e < gap.size() && gap[e] > gap_threshold) {
      if (gap[e] > gap[peak]) peak = e;
      ++e;
    }
    if (quiet >= run_len && e - i >= run_len) out.push_back({dates[i], dates[peak], gap[peak]});
    quiet = 0;
    i = e;
  }
  return out;
}

}  // namespace breakscope
