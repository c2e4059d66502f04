#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "breakscope/knn.hpp"

using namespace breakscope;

namespace {

double maxdist(const PointCloud& pc, std::size_t a, std::size_t b) {
  double m = 0;
  for (std::size_t c = 0; c < pc.d; ++c) m = std::max(m, std::abs(pc.row(a)[c] - pc.row(b)[c]));
  return m;
}

}  // namespace

TEST(KdTree, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (std::size_t d : {1u, 2u, 3u, 5u}) {
    std::vector<std::vector<double>> cols(d, std::vector<double>(400));
    for (auto& c : cols)
      for (double& v : c) v = z(rng);
    std::vector<std::span<const double>> spans(cols.begin(), cols.end());
    const auto pc = PointCloud::from_columns(spans);
    const KdTree tree(pc);
    for (std::size_t i = 0; i < pc.n; i += 7) {
      std::vector<double> ds;
      for (std::size_t j = 0; j < pc.n; ++j)
        if (j != i) ds.push_back(maxdist(pc, i, j));
      std::sort(ds.begin(), ds.end());
      for (std::size_t k : {1u, 4u, 10u}) EXPECT_EQ(tree.kth_distance(i, k), ds[k - 1]);
      for (double r : {0.1, 0.5, 1.0, ds[3]}) {
        const auto brute = static_cast<std::size_t>(std::count_if(ds.begin(), ds.end(), [&](double v) { return v < r; }));
        EXPECT_EQ(tree.count_within(i, r), brute);
        if (d == 1) EXPECT_EQ(SortedAxis(cols[0]).count_within(i, r), brute);
      }
    }
  }
}

TEST(KdTree, StrictRadiusWithTies) {
  std::vector<double> x{0, 1, 1, 2, 3};
  const SortedAxis ax(x);
  EXPECT_EQ(ax.count_within(1, 1.0), 1u);  // only the tie at distance 0
  EXPECT_EQ(ax.count_within(0, 1.0), 0u);
  const std::vector<std::span<const double>> cols{x};
  const KdTree t(PointCloud::from_columns(cols));
  EXPECT_EQ(t.count_within(1, 1.0), 1u);
  EXPECT_EQ(t.kth_distance(1, 1), 0.0);
}
