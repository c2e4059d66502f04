#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

namespace breakscope {

/// Row-major point cloud gathered from column vectors.
struct PointCloud {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;

  static PointCloud from_columns(const std::vector<std::span<const double>>& cols) {
    PointCloud pc;
    pc.d = cols.size();
    pc.n = cols.empty() ? 0 : cols.front().size();
    pc.data.resize(pc.n * pc.d);
    for (std::size_t c = 0; c < pc.d; ++c)
      for (std::size_t i = 0; i < pc.n; ++i) pc.data[i * pc.d + c] = cols[c][i];
    return pc;
  }

  const double* row(std::size_t i) const { return data.data() + i * d; }
};

/// KD-tree for maximum-norm neighbour queries on a fixed point cloud.
class KdTree {
 public:
  explicit KdTree(const PointCloud& pc) : n_(pc.n), d_(pc.d) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    pts_ = pc.data;
    if (n_ > 0) build(0, n_);
    // reorder coordinates to leaf order for locality
    std::vector<double> ordered(n_ * d_);
    slot_.resize(n_);
    for (std::size_t s = 0; s < n_; ++s) {
      std::copy_n(pc.data.data() + perm_[s] * d_, d_, ordered.data() + s * d_);
      slot_[perm_[s]] = s;
    }
    pts_ = std::move(ordered);
  }

  std::size_t size() const { return n_; }

  /// Distance to the k-th nearest other point of point i.
  double kth_distance(std::size_t i, std::size_t k) const {
    const double* q = pts_.data() + slot_[i] * d_;
    std::priority_queue<double> heap;  // k smallest so far, largest on top
    for (std::size_t t = 0; t < k; ++t) heap.push(std::numeric_limits<double>::infinity());
    knn(0, q, slot_[i], heap);
    return heap.top();
  }

  /// Number of points other than i at distance strictly below r.
  std::size_t count_within(std::size_t i, double r) const {
    if (!(r > 0.0)) return 0;
    const double* q = pts_.data() + slot_[i] * d_;
    return count(0, q, r) - 1;
  }

 private:
  struct Node {
    std::size_t begin, end;
    std::size_t left = 0, right = 0;  // 0 marks a leaf
    std::vector<double> lo, hi;
  };
  static constexpr std::size_t kLeaf = 12;

  const double* at(std::size_t slot) const { return pts_.data() + perm_[slot] * d_; }

  std::size_t build(std::size_t b, std::size_t e) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({b, e, 0, 0, std::vector<double>(d_), std::vector<double>(d_)});
    std::vector<double> lo(d_, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d_, -std::numeric_limits<double>::infinity());
    for (std::size_t s = b; s < e; ++s) {
      const double* p = at(s);
      for (std::size_t c = 0; c < d_; ++c) {
        lo[c] = std::min(lo[c], p[c]);
        hi[c] = std::max(hi[c], p[c]);
      }
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (e - b <= kLeaf) return id;
    std::size_t dim = 0;
    for (std::size_t c = 1; c < d_; ++c)
      if (hi[c] - lo[c] > hi[dim] - lo[dim]) dim = c;
    const std::size_t mid = b + (e - b) / 2;
    std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(b), perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                     perm_.begin() + static_cast<std::ptrdiff_t>(e),
                     [&](std::size_t x, std::size_t y) { return pts_[x * d_ + dim] < pts_[y * d_ + dim]; });
    const std::size_t l = build(b, mid);
    const std::size_t r = build(mid, e);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  double box_distance(const Node& nd, const double* q) const {
    double m = 0.0;
    for (std::size_t c = 0; c < d_; ++c) {
      const double g = q[c] < nd.lo[c] ? nd.lo[c] - q[c] : (q[c] > nd.hi[c] ? q[c] - nd.hi[c] : 0.0);
      m = std::max(m, g);
    }
    return m;
  }

  double box_far(const Node& nd, const double* q) const {
    double m = 0.0;
    for (std::size_t c = 0; c < d_; ++c) m = std::max(m, std::max(std::abs(q[c] - nd.lo[c]), std::abs(nd.hi[c] - q[c])));
    return m;
  }

  double dist(const double* a, const double* b) const {
    double m = 0.0;
    for (std::size_t c = 0; c < d_; ++c) m = std::max(m, std::abs(a[c] - b[c]));
    return m;
  }

  void knn(std::size_t id, const double* q, std::size_t self, std::priority_queue<double>& heap) const {
    const Node& nd = nodes_[id];
    if (nd.left == 0) {
      for (std::size_t s = nd.begin; s < nd.end; ++s) {
        if (s == self) continue;
        const double dd = dist(q, pts_.data() + s * d_);
        if (dd < heap.top()) {
          heap.pop();
          heap.push(dd);
        }
      }
      return;
    }
    const double dl = box_distance(nodes_[nd.left], q);
    const double dr = box_distance(nodes_[nd.right], q);
    const std::size_t first = dl <= dr ? nd.left : nd.right;
    const std::size_t second = dl <= dr ? nd.right : nd.left;
    if (std::min(dl, dr) < heap.top()) knn(first, q, self, heap);
    if (std::max(dl, dr) < heap.top()) knn(second, q, self, heap);
  }

  std::size_t count(std::size_t id, const double* q, double r) const {
    const Node& nd = nodes_[id];
    if (box_distance(nd, q) >= r) return 0;
    if (box_far(nd, q) < r) return nd.end - nd.begin;
    if (nd.left == 0) {
      std::size_t c = 0;
      for (std::size_t s = nd.begin; s < nd.end; ++s)
        if (dist(q, pts_.data() + s * d_) < r) ++c;
      return c;
    }
    return count(nd.left, q, r) + count(nd.right, q, r);
  }

  std::size_t n_, d_;
  std::vector<double> pts_;
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> slot_;
  std::vector<Node> nodes_;
};

/// Strict-radius counts on a single coordinate via a sorted copy.
class SortedAxis {
 public:
  explicit SortedAxis(std::span<const double> x) : x_(x.begin(), x.end()), sorted_(x.begin(), x.end()) {
    std::sort(sorted_.begin(), sorted_.end());
  }

  /// Number of points other than i with |x_j - x_i| < r.
  std::size_t count_within(std::size_t i, double r) const {
    if (!(r > 0.0)) return 0;
    const double v = x_[i];
    auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), v - r);
    auto hi = std::upper_bound(sorted_.begin(), sorted_.end(), v + r);
    while (lo != hi && !(std::abs(*lo - v) < r)) ++lo;
    while (hi != lo && !(std::abs(*(hi - 1) - v) < r)) --hi;
    return static_cast<std::size_t>(hi - lo) - 1;
  }

 private:
  std::vector<double> x_;
  std::vector<double> sorted_;
};

/// Strict-radius counter over a subset of columns; 1-D uses a sorted axis.
class RadiusCounter {
 public:
  explicit RadiusCounter(const std::vector<std::span<const double>>& cols) {
    if (cols.size() == 1)
      axis_.emplace_back(cols.front());
    else
      tree_.emplace_back(PointCloud::from_columns(cols));
  }
  std::size_t count_within(std::size_t i, double r) const {
    return axis_.empty() ? tree_.front().count_within(i, r) : axis_.front().count_within(i, r);
  }

 private:
  std::vector<SortedAxis> axis_;
  std::vector<KdTree> tree_;
};

}  // namespace breakscope
