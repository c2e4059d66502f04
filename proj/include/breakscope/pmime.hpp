#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "breakscope/error.hpp"
#include "breakscope/infotheory.hpp"
#include "breakscope/io.hpp"
#include "breakscope/series.hpp"

namespace breakscope {

/// Lagged copy of one panel series. lag = l refers to x_{t+1-l} when predicting
/// x_{t+1}, so lag 1 is the most recent observation.
struct LagVariable {
  std::size_t series_index = 0;
  std::size_t lag = 1;
  friend bool operator==(const LagVariable&, const LagVariable&) = default;
};

struct MixedEmbedding {
  std::size_t target_index = 0;
  std::vector<LagVariable> selected;
  std::vector<double> cycle_gains;  // CMI gain of each accepted variable
  std::string stop_reason;
};

enum class StopRule { surrogate, ratio };

inline std::string_view to_string(StopRule r) { return r == StopRule::surrogate ? "surrogate" : "ratio"; }

inline StopRule parse_stop_rule(std::string_view s) {
  if (s == "surrogate") return StopRule::surrogate;
  if (s == "ratio") return StopRule::ratio;
  throw Error(ErrorCode::InvalidArgument, "unknown stopping rule '" + std::string(s) + "'");
}

struct PmimeOptions {
  std::size_t lmax = 5;
  std::size_t k = 4;
  StopRule stop = StopRule::surrogate;
  double alpha = 0.05;
  double ratio = 0.97;
  std::size_t surrogates = 100;
  std::uint64_t seed = 0;
  /// Account for picking the best of C candidates: accept only if
  /// P(max of C null gains below the observed gain) > 1 - alpha.
  bool multiplicity_correction = true;
};

namespace detail {

/// Prepared lag columns over the common sample t = lmax-1 .. n-2 (N = n - lmax rows).
class LagDesign {
 public:
  LagDesign(const Panel& panel, std::size_t lmax, std::uint64_t seed) : lmax_(lmax), k_(panel.size()) {
    const std::size_t n = panel.length();
    if (lmax == 0) throw Error(ErrorCode::InvalidArgument, "maximum lag must be >= 1");
    if (n < 20 * lmax) throw Error(ErrorCode::TooShort, "series length " + std::to_string(n) + " below 20 * L_max");
    rows_ = n - lmax;
    future_.resize(k_);
    lags_.resize(k_ * lmax);
    for (std::size_t s = 0; s < k_; ++s) {
      const auto x = panel[s].values();
      future_[s] = prepare_knn_column(x.subspan(lmax, rows_), seed);
      for (std::size_t l = 1; l <= lmax; ++l)
        lags_[s * lmax + (l - 1)] = prepare_knn_column(x.subspan(lmax - l, rows_), seed);
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t series() const { return k_; }
  std::size_t lmax() const { return lmax_; }
  std::span<const double> future(std::size_t s) const { return future_[s]; }
  std::span<const double> lag(const LagVariable& v) const { return lags_[v.series_index * lmax_ + (v.lag - 1)]; }

 private:
  std::size_t lmax_, k_, rows_ = 0;
  std::vector<std::vector<double>> future_;
  std::vector<std::vector<double>> lags_;
};

inline std::vector<double> circular_shift(std::span<const double> x, std::size_t shift) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[(i + shift) % x.size()];
  return out;
}

inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

/// Largest count of surrogates at or above the observed gain that still accepts.
inline long max_exceedances(std::size_t r, std::size_t candidates, double alpha, bool correct) {
  const double c = correct ? static_cast<double>(std::max<std::size_t>(candidates, 1)) : 1.0;
  long best = -1;
  for (std::size_t e = 0; e <= r; ++e)
    if (std::pow(static_cast<double>(r - e) / static_cast<double>(r), c) > 1.0 - alpha) best = static_cast<long>(e);
  return best;
}

inline MixedEmbedding build_embedding(const LagDesign& design, std::size_t target, const PmimeOptions& opt) {
  MixedEmbedding emb;
  emb.target_index = target;
  const auto y = design.future(target);
  std::vector<LagVariable> pool;
  for (std::size_t s = 0; s < design.series(); ++s)
    for (std::size_t l = 1; l <= design.lmax(); ++l) pool.push_back({s, l});
  std::vector<std::span<const double>> w;
  double info_w = 0.0;  // I(y; w) accumulated from the chain rule
  std::size_t cycle = 0;
  while (!pool.empty()) {
    double best_gain = -std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      const double g = ksg_cmi({y}, {design.lag(pool[c])}, w, opt.k).value;
      if (g > best_gain) {
        best_gain = g;
        best = c;
      }
    }
    const double gain = std::max(0.0, best_gain);
    bool accept = false;
    if (opt.stop == StopRule::surrogate) {
      const long limit = max_exceedances(opt.surrogates, pool.size(), opt.alpha, opt.multiplicity_correction);
      if (gain > 0.0 && limit >= 0) {
        auto rng = stream_rng(opt.seed, target + 1, cycle + 1);
        const auto cand = design.lag(pool[best]);
        const std::size_t n = cand.size();
        std::uniform_int_distribution<std::size_t> shift(n / 10, n - n / 10);
        long exceed = 0;
        for (std::size_t r = 0; r < opt.surrogates && exceed <= limit; ++r) {
          const auto sur = circular_shift(cand, shift(rng));
          const double gs = std::max(0.0, ksg_cmi({y}, {sur}, w, opt.k).value);
          if (gs >= gain) ++exceed;
        }
        accept = exceed <= limit;
      }
      if (!accept) emb.stop_reason = "surrogate test not significant";
    } else {
      const double info_new = info_w + best_gain;
      accept = info_new > 0.0 && (info_w / info_new) <= opt.ratio;
      if (!accept) emb.stop_reason = "information ratio above threshold";
    }
    if (!accept) break;
    emb.selected.push_back(pool[best]);
    emb.cycle_gains.push_back(best_gain);
    info_w += best_gain;
    w.push_back(design.lag(pool[best]));
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
    ++cycle;
  }
  if (pool.empty()) emb.stop_reason = "all candidates selected";
  return emb;
}

}  // namespace detail

/// Greedy mixed embedding for one target series.
inline MixedEmbedding build_mixed_embedding(const Panel& panel, std::size_t target, const PmimeOptions& opt = {}) {
  if (target >= panel.size()) throw Error(ErrorCode::InvalidArgument, "target index out of range");
  const detail::LagDesign design(panel, opt.lmax, opt.seed);
  return detail::build_embedding(design, target, opt);
}

struct PairDiagnostics {
  std::size_t driver = 0;
  std::size_t target = 0;
  double numerator = 0.0;    // I(y; w_driver | rest of w)
  double denominator = 0.0;  // I(y; w)
  double raw = 0.0;
  bool clamped = false;
};

struct PmimeResult {
  std::vector<std::string> ids;
  Eigen::MatrixXd matrix;     // (driver, target)
  Eigen::MatrixXi adjacency;  // matrix > 0
  std::vector<MixedEmbedding> embeddings;  // one per target
  std::vector<PairDiagnostics> pairs;
  StopRule stop = StopRule::surrogate;
};

namespace detail {
inline void attribute_target(const LagDesign& design, const MixedEmbedding& emb, const PmimeOptions& opt,
                             PmimeResult& res) {
  const std::size_t j = emb.target_index;
  const auto y = design.future(j);
  std::vector<std::span<const double>> all;
  for (const auto& v : emb.selected) all.push_back(design.lag(v));
  double den = 0.0;
  bool den_done = false;
  for (std::size_t i = 0; i < design.series(); ++i) {
    if (i == j) continue;
    PairDiagnostics d;
    d.driver = i;
    d.target = j;
    std::vector<std::span<const double>> own, rest;
    for (const auto& v : emb.selected) (v.series_index == i ? own : rest).push_back(design.lag(v));
    if (!own.empty()) {
      if (!den_done) {
        den = ksg_cmi({y}, all, {}, opt.k).value;
        den_done = true;
      }
      d.denominator = den;
      d.numerator = ksg_cmi({y}, own, rest, opt.k).value;
      d.raw = den > 0.0 ? d.numerator / den : 0.0;
      const double v = std::clamp(d.raw, 0.0, 1.0);
      d.clamped = v != d.raw || !(den > 0.0);
      res.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
    res.pairs.push_back(d);
  }
}
}  // namespace detail

/// Direct-causality matrix from one mixed embedding per target. An entry is exactly 0
/// when the target's embedding holds no lag of the driver; otherwise it is the share of
/// I(y; w) carried by the driver's lags given the rest, clamped to [0,1].
inline PmimeResult pmime(const Panel& panel, const PmimeOptions& opt = {}) {
  if (panel.size() < 2) throw Error(ErrorCode::InvalidArgument, "PMIME needs at least two series");
  const detail::LagDesign design(panel, opt.lmax, opt.seed);
  PmimeResult res;
  res.ids = panel.ids();
  res.stop = opt.stop;
  const auto k = static_cast<Eigen::Index>(panel.size());
  res.matrix = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t j = 0; j < panel.size(); ++j) {
    res.embeddings.push_back(detail::build_embedding(design, j, opt));
    detail::attribute_target(design, res.embeddings.back(), opt, res);
  }
  res.adjacency = (res.matrix.array() > 0.0).cast<int>();
  return res;
}

namespace detail {
inline std::vector<std::span<const double>> lag_block(const LagDesign& d, std::size_t s, std::size_t l) {
  std::vector<std::span<const double>> out;
  for (std::size_t q = 1; q <= l; ++q) out.push_back(d.lag({s, q}));
  return out;
}

inline double conditional_te(const LagDesign& d, std::size_t from, std::size_t to, std::size_t l,
                             const std::vector<std::size_t>& others, std::size_t k) {
  auto z = lag_block(d, to, l);
  for (auto o : others) {
    auto b = lag_block(d, o, l);
    z.insert(z.end(), b.begin(), b.end());
  }
  return ksg_cmi({d.future(to)}, lag_block(d, from, l), z, k).value;
}
}  // namespace detail

/// TE(from -> to) with uniform embeddings of L lags for both series.
inline double transfer_entropy(const Panel& panel, std::size_t from, std::size_t to, std::size_t l, std::size_t k = 4,
                               std::uint64_t seed = 0) {
  if (from >= panel.size() || to >= panel.size() || from == to)
    throw Error(ErrorCode::InvalidArgument, "transfer entropy needs two distinct valid series");
  const detail::LagDesign d(panel, l, seed);
  return detail::conditional_te(d, from, to, l, {}, k);
}

struct PteResult {
  double value = 0.0;
  bool dimensionality_warning = false;  // K * L above a tenth of the sample
};

/// TE conditioned on L lags of every other series in the panel.
inline PteResult partial_transfer_entropy(const Panel& panel, std::size_t from, std::size_t to, std::size_t l,
                                          std::size_t k = 4, std::uint64_t seed = 0) {
  if (from >= panel.size() || to >= panel.size() || from == to)
    throw Error(ErrorCode::InvalidArgument, "partial transfer entropy needs two distinct valid series");
  const detail::LagDesign d(panel, l, seed);
  std::vector<std::size_t> others;
  for (std::size_t s = 0; s < panel.size(); ++s)
    if (s != from && s != to) others.push_back(s);
  PteResult r;
  r.value = detail::conditional_te(d, from, to, l, others, k);
  r.dimensionality_warning = panel.size() * l * 10 > panel.length();
  return r;
}

/// TE values with the driver's lag block circularly time-shifted; a null sample.
inline std::vector<double> transfer_entropy_null(const Panel& panel, std::size_t from, std::size_t to, std::size_t l,
                                                 std::size_t surrogates, std::uint64_t seed, std::size_t k = 4) {
  const detail::LagDesign d(panel, l, seed);
  auto rng = detail::stream_rng(seed, from + 1, to + 1);
  const std::size_t n = d.rows();
  std::uniform_int_distribution<std::size_t> shift(n / 10, n - n / 10);
  std::vector<double> out;
  for (std::size_t r = 0; r < surrogates; ++r) {
    const std::size_t s = shift(rng);
    std::vector<std::vector<double>> shifted;
    for (std::size_t q = 1; q <= l; ++q) shifted.push_back(detail::circular_shift(d.lag({from, q}), s));
    std::vector<std::span<const double>> x(shifted.begin(), shifted.end());
    out.push_back(ksg_cmi({d.future(to)}, x, detail::lag_block(d, to, l), k).value);
  }
  return out;
}

struct NetworkEdge {
  std::string from;
  std::string to;
  double weight = 0.0;
};

struct CausalityNetwork {
  std::vector<std::string> nodes;
  std::vector<NetworkEdge> edges;
};

inline CausalityNetwork causality_network(const PmimeResult& r, double threshold = 0.0) {
  CausalityNetwork net;
  net.nodes = r.ids;
  for (Eigen::Index i = 0; i < r.matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < r.matrix.cols(); ++j)
      if (i != j && r.matrix(i, j) > threshold)
        net.edges.push_back({r.ids[static_cast<std::size_t>(i)], r.ids[static_cast<std::size_t>(j)], r.matrix(i, j)});
  return net;
}

inline nlohmann::json to_json(const CausalityNetwork& net) {
  nlohmann::json j;
  auto nodes = nlohmann::json::array();
  for (const auto& n : net.nodes) nodes.push_back({{"id", n}});
  auto links = nlohmann::json::array();
  for (const auto& e : net.edges) links.push_back({{"source", e.from}, {"target", e.to}, {"weight", num9(e.weight)}});
  j["directed"] = true;
  j["nodes"] = std::move(nodes);
  j["links"] = std::move(links);
  return j;
}

inline void write_edge_list_csv(std::ostream& os, const CausalityNetwork& net) {
  os << "source,target,weight\n";
  for (const auto& e : net.edges) os << e.from << ',' << e.to << ',' << fmt9(e.weight) << '\n';
}

inline nlohmann::json to_json(const PmimeResult& r) {
  nlohmann::json j = matrix_to_json(r.matrix, r.ids);
  j["orientation"] = "rows are drivers, columns are targets";
  j["stop_rule"] = std::string(to_string(r.stop));
  auto embs = nlohmann::json::array();
  for (const auto& e : r.embeddings) {
    auto sel = nlohmann::json::array();
    for (std::size_t q = 0; q < e.selected.size(); ++q)
      sel.push_back({{"series", r.ids[e.selected[q].series_index]},
                     {"lag", e.selected[q].lag},
                     {"gain", num9(e.cycle_gains[q])}});
    embs.push_back({{"target", r.ids[e.target_index]}, {"selected", std::move(sel)}, {"stop_reason", e.stop_reason}});
  }
  j["embeddings"] = std::move(embs);
  auto pairs = nlohmann::json::array();
  for (const auto& p : r.pairs)
    pairs.push_back({{"driver", r.ids[p.driver]},
                     {"target", r.ids[p.target]},
                     {"numerator", num9(p.numerator)},
                     {"denominator", num9(p.denominator)},
                     {"raw", num9(p.raw)},
                     {"clamped", p.clamped}});
  j["pairs"] = std::move(pairs);
  return j;
}

struct RollingPmime {
  std::vector<Date> dates;  // window end
  std::vector<Eigen::MatrixXd> matrices;
  std::vector<std::string> ids;
  std::vector<std::string> warnings;
};

/// PMIME over sliding windows of the panel.
inline RollingPmime rolling_pmime(const Panel& panel, const RollingWindowSpec& spec, const PmimeOptions& opt = {}) {
  if (spec.window_len == 0 || spec.step == 0)
    throw Error(ErrorCode::InvalidArgument, "window length and step must be positive");
  if (spec.window_len > panel.length())
    throw Error(ErrorCode::WindowTooLong, "window exceeds panel length");
  RollingPmime out;
  out.ids = panel.ids();
  if (spec.window_len < 500)
    out.warnings.push_back("window below 500 samples; conditional MI estimates are unreliable");
  for (std::size_t w = 0; w < spec.count(panel.length()); ++w) {
    const std::size_t start = w * spec.step;
    std::vector<TimeSeries> sub;
    for (const auto& s : panel.series()) {
      const auto d = s.dates().subspan(start, spec.window_len);
      const auto v = s.values().subspan(start, spec.window_len);
      sub.emplace_back(s.id(), std::vector<Date>(d.begin(), d.end()), std::vector<double>(v.begin(), v.end()),
                       s.transform_tag());
    }
    out.dates.push_back(panel.date_axis()[start + spec.window_len - 1]);
    out.matrices.push_back(pmime(Panel::align(std::move(sub)), opt).matrix);
  }
  return out;
}

}  // namespace breakscope
