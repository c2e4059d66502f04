#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "breakscope/hurst.hpp"
#include "breakscope/synth.hpp"

using namespace breakscope;

namespace {

std::vector<double> cumsum(std::vector<double> x) {
  for (std::size_t i = 1; i < x.size(); ++i) x[i] += x[i - 1];
  return x;
}

double slope_of(const std::vector<double>& lx, const std::vector<double>& ly) { return ols(lx, ly).slope; }

}  // namespace

TEST(RsStatistic, AlternatingSequence) {
  std::vector<double> x(64);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 == 0 ? 1.0 : -1.0;
  // each subseries: deviations +1,-1,...; cumulated 1,0,1,0 -> range 1, sd 1
  EXPECT_DOUBLE_EQ(rs_statistic(x, 8), 1.0);
}

TEST(RsStatistic, ConstantIsDegenerate) {
  std::vector<double> x(64, 3.0);
  try {
    rs_statistic(x, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateSubseries);
  }
}

TEST(RsStatistic, NoiseLogLogSlope) {
  const auto x = gen_white_noise(4096, 17);
  std::vector<double> lx, ly;
  for (std::size_t n = 16; n <= 512; n *= 2) {
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(rs_statistic(x, n)));
  }
  const double s = slope_of(lx, ly);
  EXPECT_GE(s, 0.45);
  EXPECT_LE(s, 0.62);
}

TEST(RsStatistic, AffineInvariant) {
  const auto x = gen_white_noise(1000, 2);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.7 * x[i] - 12.0;
  for (std::size_t n : {8, 20, 100, 500}) EXPECT_NEAR(rs_statistic(x, n), rs_statistic(y, n), 1e-9);
}

TEST(ExpectedRs, SmallNByHand) {
  // n = 2: factor (n - 1/2)/n = 3/4, Gamma ratio Gamma(1/2)/(sqrt(pi) Gamma(1)) = 1, sum sqrt(1/1) = 1
  EXPECT_NEAR(expected_rs(2), 0.75, 1e-12);
  // n = 3: (5/6) * Gamma(1)/(sqrt(pi) Gamma(3/2)) * (sqrt(2) + sqrt(1/2))
  const double n3 = (2.5 / 3.0) * (1.0 / (std::sqrt(std::numbers::pi) * std::tgamma(1.5))) *
                    (std::sqrt(2.0) + std::sqrt(0.5));
  EXPECT_NEAR(expected_rs(3), n3, 1e-12);
}

TEST(ExpectedRs, BranchesContinuousAt340) {
  EXPECT_LT(std::abs(expected_rs(341) / expected_rs(340) - 1.0), 0.01);
}

TEST(ExpectedRs, SquareRootGrowth) {
  EXPECT_NEAR(expected_rs(400000) / expected_rs(100000), 2.0, 0.02);
}

TEST(HurstRs, WhiteNoiseCorrected) {
  const auto x = gen_white_noise(8192, 3);
  const auto e = hurst_rs(x, true);
  EXPECT_GE(e.h, 0.45);
  EXPECT_LE(e.h, 0.55);
  EXPECT_EQ(e.method, HurstMethod::rs);
  EXPECT_GE(e.n_scales, 4u);
  EXPECT_EQ(e.curve.scales.size(), e.curve.statistic.size());
  for (std::size_t i = 1; i < e.curve.scales.size(); ++i) EXPECT_LT(e.curve.scales[i - 1], e.curve.scales[i]);
}

TEST(HurstRs, FgnPersistent) {
  const auto x = gen_fgn(0.7, 8192, 4);
  const auto e = hurst_rs(x, true);
  EXPECT_GE(e.h, 0.62);
  EXPECT_LE(e.h, 0.78);
}

TEST(HurstRs, Errors) {
  const auto x = gen_white_noise(100, 1);
  EXPECT_THROW(hurst_rs(x, std::vector<std::size_t>{8, 16}), Error);
  EXPECT_THROW(hurst_rs(std::vector<double>(20, 1.0)), Error);
}

TEST(Ghe, BrownianPath) {
  const auto x = cumsum(gen_white_noise(8192, 5));
  const auto e = ghe(x, 1.0);
  EXPECT_GE(e.h, 0.45);
  EXPECT_LE(e.h, 0.55);
}

TEST(Ghe, FbmAntiPersistent) {
  const auto x = gen_fbm(0.3, 8192, 6);
  const auto e = ghe(x, 1.0);
  EXPECT_GE(e.h, 0.22);
  EXPECT_LE(e.h, 0.38);
}

TEST(Ghe, RampHasSlopeOne) {
  std::vector<double> x(500);
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = static_cast<double>(t);
  const auto e = ghe(x, 1.0);
  EXPECT_NEAR(e.raw, 1.0, 1e-9);
  EXPECT_FALSE(e.clamped);
  EXPECT_NEAR(e.fit_r2, 1.0, 1e-9);
}

TEST(Ghe, ShiftAndScaleInvariant) {
  const auto x = gen_fbm(0.6, 2048, 7);
  std::vector<double> y(x.size()), z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] + 1000.0;
    z[i] = 0.01 * x[i];
  }
  const double h = ghe(x).raw;
  EXPECT_NEAR(ghe(y).raw, h, 1e-9);
  EXPECT_NEAR(ghe(z).raw, h, 1e-9);
}

TEST(Ghe, ConstantAndShort) {
  EXPECT_THROW(ghe(std::vector<double>(500, 2.0)), Error);
  EXPECT_THROW(ghe(std::vector<double>(30, 0.0)), Error);
  EXPECT_THROW(ghe(gen_white_noise(500, 1), -1.0), Error);
}

TEST(Ghe, MonotoneInTrueExponent) {
  double lo = 0, hi = 0;
  for (int s = 0; s < 50; ++s) {
    lo += ghe(gen_fbm(0.3, 2048, 100 + s)).h;
    hi += ghe(gen_fbm(0.7, 2048, 100 + s)).h;
  }
  EXPECT_LT(lo, hi);
}

TEST(RollingGhe, ShortFbmWindowBand) {
  const auto x = gen_fbm(0.7, 200, 21);
  const auto r = rolling_ghe(TimeSeries::from_values("fbm", x), {75, 1});
  ASSERT_EQ(r.points.size(), 126u);
  double m = 0;
  for (const auto& p : r.points) {
    EXPECT_GE(p.value, 0.4);
    EXPECT_LE(p.value, 1.0);
    m += p.value;
  }
  m /= static_cast<double>(r.points.size());
  EXPECT_GE(m, 0.55);
  EXPECT_LE(m, 0.85);
}

TEST(RollingGhe, ConstantGivesOnlyGaps) {
  const auto r = rolling_ghe(TimeSeries::from_values("c", std::vector<double>(100, 1.0)), {75, 1});
  EXPECT_TRUE(r.points.empty());
  EXPECT_EQ(r.gaps.size(), 26u);
}

TEST(RollingGhe, WindowTooShortForTauSet) {
  EXPECT_THROW(rolling_ghe(TimeSeries::from_values("c", gen_white_noise(100, 1)), {40, 1}), Error);
  EXPECT_EQ(window_tau_max_set(75), (std::vector<std::size_t>{5, 6, 7}));
}

TEST(HurstMaps, Examples) {
  EXPECT_DOUBLE_EQ(fractal_dimension(0.5), 1.5);
  EXPECT_DOUBLE_EQ(fractal_dimension(1.0), 1.0);
  EXPECT_NEAR(fractal_dimension(0.2111), 1.7889, 1e-12);
  EXPECT_DOUBLE_EQ(spectral_exponent(0.5), 2.0);
  EXPECT_DOUBLE_EQ(spectral_exponent(0.0), 1.0);
  EXPECT_NEAR(spectral_exponent(0.7), 2.4, 1e-12);
  EXPECT_THROW(fractal_dimension(1.2), Error);
  EXPECT_EQ(classify_efficiency(0.2111), Efficiency::anti_persistent);
  EXPECT_EQ(classify_efficiency(0.5), Efficiency::efficient_band);
  EXPECT_EQ(classify_efficiency(0.5768), Efficiency::persistent);
}

TEST(HurstMaps, AnnualMeans) {
  RollingSeries r;
  r.points = {{Date::from_ymd(2021, 12, 31), 0.2}, {Date::from_ymd(2022, 1, 1), 0.4}, {Date::from_ymd(2022, 6, 1), 0.6}};
  const auto m = annual_means(r);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.at(2021), 0.2);
  EXPECT_DOUBLE_EQ(m.at(2022), 0.5);
}
