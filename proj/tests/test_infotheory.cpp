#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "breakscope/infotheory.hpp"
#include "breakscope/synth.hpp"

using namespace breakscope;

namespace {

using Table = std::vector<std::vector<std::uint64_t>>;

// Independent oracle: I = sum_xy p log p - sum_x p log p - sum_y p log p, written against raw counts.
double oracle_mi(const Table& t) {
  double n = 0;
  for (const auto& r : t)
    for (auto c : r) n += static_cast<double>(c);
  auto plogp = [&](double c) { return c > 0 ? c / n * std::log(c / n) : 0.0; };
  double hxy = 0, hx = 0, hy = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double rs = 0;
    for (auto c : t[i]) {
      hxy -= plogp(static_cast<double>(c));
      rs += static_cast<double>(c);
    }
    hx -= plogp(rs);
  }
  for (std::size_t j = 0; j < t[0].size(); ++j) {
    double cs = 0;
    for (const auto& r : t) cs += static_cast<double>(r[j]);
    hy -= plogp(cs);
  }
  return hx + hy - hxy;
}

Table random_table(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::uniform_int_distribution<std::uint64_t> u(0, 50);
  Table t(r, std::vector<std::uint64_t>(c));
  for (auto& row : t)
    for (auto& v : row) v = u(rng);
  t[0][0] += 1;
  return t;
}

std::pair<std::vector<double>, std::vector<double>> gaussian_pair(double rho, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = z(rng);
    y[i] = rho * x[i] + std::sqrt(1 - rho * rho) * z(rng);
  }
  return {x, y};
}

}  // namespace

TEST(Entropy, Examples) {
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.5}), std::log(2.0), 1e-15);
  EXPECT_EQ(entropy(std::vector<double>{1.0, 0.0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-15);
  EXPECT_THROW(entropy(std::vector<double>{0.5, 0.6}), Error);
  EXPECT_THROW(entropy(std::vector<double>{1.5, -0.5}), Error);
}

TEST(DiscreteMi, Examples) {
  EXPECT_NEAR(mutual_information_discrete(DiscreteJoint({{25, 25}, {25, 25}})).value, 0.0, 1e-15);
  EXPECT_NEAR(mutual_information_discrete(DiscreteJoint({{50, 0}, {0, 50}})).value, std::log(2.0), 1e-15);
  // 0.8 ln 1.6 + 0.2 ln 0.4 over the four cells
  const double by_hand = 0.8 * std::log(1.6) + 0.2 * std::log(0.4);
  EXPECT_NEAR(mutual_information_discrete(DiscreteJoint({{40, 10}, {10, 40}})).value, by_hand, 1e-12);
  EXPECT_THROW(DiscreteJoint({{0, 0}, {0, 0}}), Error);
  EXPECT_THROW(DiscreteJoint({{1, 2}, {3}}), Error);
}

TEST(DiscreteMi, MatchesIndependentOracleOnRandomTables) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 200; ++t) {
    const auto tab = random_table(rng, 1 + rng() % 6, 1 + rng() % 6);
    const DiscreteJoint j(tab);
    EXPECT_NEAR(mutual_information_discrete(j).value, std::max(0.0, oracle_mi(tab)), 1e-12);
    EXPECT_NEAR(brute_force_mi(j), oracle_mi(tab), 1e-12);
  }
}

TEST(DiscreteMi, EntropyDifferenceIdentity) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const DiscreteJoint j(random_table(rng, 2 + rng() % 5, 2 + rng() % 5));
    const double via_h = marginal_entropy_x(j) - conditional_entropy(j);
    EXPECT_NEAR(mutual_information_discrete(j).value, via_h, 1e-12);
  }
}

TEST(DiscreteMi, TransposeGivesIdenticalDouble) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const DiscreteJoint j(random_table(rng, 4, 3));
    EXPECT_EQ(mutual_information_discrete(j).value, mutual_information_discrete(j.transposed()).value);
  }
}

TEST(DiscreteMi, CoarseningNeverIncreasesInformation) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 200; ++t) {
    const auto tab = random_table(rng, 4, 8);
    Table merged(4, std::vector<std::uint64_t>(4));
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 8; ++c) merged[r][c / 2] += tab[r][c];
    EXPECT_LE(mutual_information_discrete(DiscreteJoint(merged)).value,
              mutual_information_discrete(DiscreteJoint(tab)).value + 1e-12);
  }
}

TEST(BinnedMi, SymmetricExactly) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto [x, y] = gaussian_pair(0.4, 500, s);
    EXPECT_EQ(mi_binned(x, y).value, mi_binned(y, x).value);
  }
  EXPECT_EQ(default_bins(5000), 31u);
}

TEST(KnnMi, GaussianOracle) {
  auto [x, y] = gaussian_pair(0.5, 5000, 1);
  EXPECT_NEAR(mi_knn(x, y).value, -0.5 * std::log(1 - 0.25), 0.03);
  EXPECT_NEAR(gaussian_mi_oracle(0.5), 0.14384, 1e-5);
  EXPECT_EQ(gaussian_mi_oracle(0.0), 0.0);
}

TEST(KnnMi, IndependentNearZero) {
  auto [x, y] = gaussian_pair(0.0, 2000, 2);
  EXPECT_LT(std::abs(mi_knn(x, y).value), 0.05);
}

TEST(KnnMi, NullMeanCalibrated) {
  double s = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    auto [x, y] = gaussian_pair(0.0, 1000, 1000 + t);
    s += mi_knn(x, y, 4).value;
  }
  EXPECT_NEAR(s / 200.0, 0.0, 0.01);
}

TEST(KnnMi, IdentityCouplingFlagsDegenerate) {
  const auto x = gen_white_noise(1000, 3);
  const auto e = mi_knn(x, x);
  EXPECT_GT(e.value, 2.0);
  EXPECT_TRUE(e.near_degenerate);
}

TEST(KnnMi, SymmetricAndErrors) {
  auto [x, y] = gaussian_pair(0.6, 800, 4);
  EXPECT_NEAR(mi_knn(x, y).value, mi_knn(y, x).value, 1e-9);
  EXPECT_THROW(mi_knn(std::vector<double>(100, 1.0), y), Error);
  EXPECT_THROW(mi_knn(std::span<const double>(x).first(20), std::span<const double>(y).first(20)), Error);
}

TEST(RollingMi, NullBand) {
  std::vector<double> null;
  for (std::uint64_t s = 0; s < 300; ++s) {
    auto [x, y] = gaussian_pair(0.0, 60, 5000 + s);
    null.push_back(mi_knn(x, y).value);
  }
  const double p95 = quantile(null, 0.95);
  auto [x, y] = gaussian_pair(0.0, 600, 77);
  const auto r = rolling_mi(TimeSeries::from_values("a", x), TimeSeries::from_values("b", y), {60, 1});
  ASSERT_EQ(r.points.size(), 541u);
  EXPECT_EQ(r.source_id, "a~b");
  std::size_t inside = 0;
  for (const auto& p : r.points) inside += p.value <= p95;
  EXPECT_GE(static_cast<double>(inside) / static_cast<double>(r.points.size()), 0.8);
}

TEST(RollingMi, SelfIsHigh) {
  const auto x = gen_white_noise(300, 5);
  const auto a = TimeSeries::from_values("a", x);
  const auto r = rolling_mi(a, a, {60, 1});
  for (const auto& p : r.points) EXPECT_GT(p.value, 1.5);
}

TEST(RollingMi, CouplingOnsetLocated) {
  const std::size_t n = 600, onset = 300, w = 60;
  auto x = gen_white_noise(n, 10);
  auto y = gen_white_noise(n, 11);
  const auto e = gen_white_noise(n, 12, 0.1);
  for (std::size_t t = onset; t < n; ++t) y[t] = x[t] + e[t];
  const auto r = rolling_mi(TimeSeries::from_values("x", x), TimeSeries::from_values("y", y), {w, 1});
  // first stamp where the curve crosses half of its late level
  double late = 0;
  for (std::size_t i = r.points.size() - 50; i < r.points.size(); ++i) late += r.points[i].value / 50.0;
  std::size_t cross = 0;
  while (cross < r.points.size() && r.points[cross].value < late / 2) ++cross;
  ASSERT_LT(cross, r.points.size());
  const auto stamp_index = static_cast<long>(cross + w - 1);
  EXPECT_LE(std::abs(stamp_index - static_cast<long>(onset)), static_cast<long>(w));
}

TEST(Decoupling, IdenticalCurvesNoEvents) {
  RollingSeries a;
  for (int i = 0; i < 50; ++i) a.points.push_back({Date::from_ymd(2022, 1, 1) + i, 0.3});
  EXPECT_TRUE(mi_decoupling(a, a).empty());
}

TEST(Decoupling, LinearDivergenceOnset) {
  RollingSeries a, b;
  const Date d0 = Date::from_ymd(2022, 1, 1);
  for (int i = 0; i < 200; ++i) {
    a.points.push_back({d0 + i, 0.5});
    b.points.push_back({d0 + i, 0.5 + (i >= 100 ? 0.03 * (i - 100) : 0.0)});
  }
  // gap 0.03 k first exceeds 0.1 at k = 4
  const auto ev = mi_decoupling(a, b, 0.1, 5);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].onset, d0 + 104);
  EXPECT_EQ(ev[0].peak, d0 + 199);
  EXPECT_NEAR(ev[0].peak_gap, 0.03 * 99, 1e-12);
}

TEST(Decoupling, NoOverlap) {
  RollingSeries a, b;
  a.points.push_back({Date::from_ymd(2022, 1, 1), 0.1});
  b.points.push_back({Date::from_ymd(2022, 1, 2), 0.1});
  EXPECT_THROW(mi_decoupling(a, b), Error);
}
