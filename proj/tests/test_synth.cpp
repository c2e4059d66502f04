#include <gtest/gtest.h>

#include <cmath>

#include "breakscope/stats.hpp"
#include "breakscope/synth.hpp"

using namespace breakscope;

namespace {

double lag1_autocov(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0;
  for (std::size_t i = 1; i < x.size(); ++i) s += (x[i] - m) * (x[i - 1] - m);
  return s / static_cast<double>(x.size());
}

double lag1_corr(std::span<const double> a, std::span<const double> b) {
  // corr(a_{t-1}, b_t)
  const auto rows = std::vector<std::vector<double>>{{a.begin(), a.end() - 1}, {b.begin() + 1, b.end()}};
  return pearson_correlation_matrix(rows)(0, 1);
}

}  // namespace

TEST(Fgn, HalfIsWhite) {
  const std::size_t n = 8192;
  const auto x = gen_fgn(0.5, n, 1);
  const double r = lag1_autocov(x) / variance(x);
  EXPECT_LT(std::abs(r), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Fgn, Lag1AutocovarianceWithinThreeSe) {
  const double truth = (std::pow(2.0, 1.4) - 2.0) / 2.0;
  EXPECT_NEAR(fgn_autocovariance(0.7, 1), truth, 1e-15);
  EXPECT_NEAR(truth, 0.3195, 1e-4);
  std::vector<double> est;
  for (std::uint64_t s = 0; s < 20; ++s) est.push_back(lag1_autocov(gen_fgn(0.7, 8192, 100 + s)));
  const double se = std::sqrt(variance(est) / static_cast<double>(est.size()));
  EXPECT_LE(std::abs(mean(est) - truth), 3.0 * se + 1e-3);
}

TEST(Fgn, VarianceScalingOracle) {
  // variance of m-block means of fGn scales as m^(2H-2)
  for (double h : {0.3, 0.5, 0.7}) {
    double slope = 0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
      const auto x = gen_fgn(h, 8192, 300 + s);
      std::vector<double> lm, lv;
      for (std::size_t m = 1; m <= 64; m *= 2) {
        std::vector<double> blocks;
        for (std::size_t b = 0; b + m <= x.size(); b += m)
          blocks.push_back(mean(std::span<const double>(x).subspan(b, m)));
        lm.push_back(std::log(static_cast<double>(m)));
        lv.push_back(std::log(variance(blocks)));
      }
      slope += ols(lm, lv).slope / seeds;
    }
    EXPECT_NEAR(slope, 2 * h - 2, 0.05) << "h=" << h;
  }
}

TEST(Fgn, CirculantAndRecursionAgreeInDistribution) {
  double a = 0, b = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    a += lag1_autocov(gen_fgn_circulant(0.3, 1024, s)) / 20;
    b += lag1_autocov(gen_fgn_levinson(0.3, 1024, s)) / 20;
  }
  EXPECT_NEAR(a, fgn_autocovariance(0.3, 1), 0.03);
  EXPECT_NEAR(b, fgn_autocovariance(0.3, 1), 0.03);
  EXPECT_THROW(gen_fgn(1.0, 10, 1), Error);
}

TEST(Fgn, Deterministic) {
  EXPECT_EQ(gen_fgn(0.7, 500, 9), gen_fgn(0.7, 500, 9));
  EXPECT_NE(gen_fgn(0.7, 500, 9), gen_fgn(0.7, 500, 10));
  EXPECT_EQ(gen_white_noise(100, 3), gen_white_noise(100, 3));
}

TEST(VarCoupled, ZeroMatrixIndependent) {
  const auto sys = gen_var_coupled(Eigen::MatrixXd::Zero(3, 3), 1.0, 5000, 1);
  EXPECT_EQ(sys.panel.ids(), (std::vector<std::string>{"X1", "X2", "X3"}));
  EXPECT_EQ(sys.coupling.sum(), 0);
  EXPECT_LT(std::abs(lag1_corr(sys.panel[0].values(), sys.panel[1].values())), 0.05);
}

TEST(VarCoupled, SingleEdgeCrossCorrelation) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(1, 0) = 0.9;
  const auto sys = gen_var_coupled(a, 1.0, 5000, 2);
  // stationary: corr(x1_{t-1}, x2_t) = 0.9 / sqrt(1 + 0.81) ~ 0.669
  const double c = lag1_corr(sys.panel[0].values(), sys.panel[1].values());
  EXPECT_GT(c, 0.5);
  EXPECT_NEAR(c, 0.9 / std::sqrt(1.81), 0.03);
  EXPECT_EQ(sys.coupling(1, 0), 1);
  EXPECT_EQ(sys.coupling(0, 1), 0);
}

TEST(VarCoupled, Unstable) {
  try {
    gen_var_coupled(Eigen::MatrixXd::Identity(2, 2) * 1.1, 1.0, 100, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unstable);
  }
}

TEST(Piecewise, ZeroNoiseIsExactLine) {
  PiecewiseSpec s;
  s.n = 100;
  s.knots = {40};
  s.levels = {1.0, 5.0};
  s.slopes = {0.5, -0.25};
  s.noise_sd = 0.0;
  const auto p = gen_piecewise(s);
  for (std::size_t t = 0; t < 100; ++t) {
    const double want = t < 40 ? 1.0 + 0.5 * t : 5.0 - 0.25 * (static_cast<double>(t) - 40.0);
    EXPECT_DOUBLE_EQ(p.series.values()[t], want);
    EXPECT_EQ(p.season[t], 0.0);
  }
  EXPECT_EQ(p.changepoints, std::vector<std::size_t>{40});
}

TEST(Piecewise, SeasonAdds) {
  PiecewiseSpec s;
  s.n = 50;
  s.levels = {0.0};
  s.slopes = {0.0};
  s.amplitude = 2.0;
  s.period = 7.0;
  s.noise_sd = 0.0;
  const auto p = gen_piecewise(s);
  EXPECT_NEAR(p.series.values()[7], 0.0, 1e-12);
  EXPECT_NEAR(p.series.values()[2], 2.0 * std::sin(4.0 * std::numbers::pi / 7.0), 1e-12);
  s.knots = {60};
  EXPECT_THROW(gen_piecewise(s), Error);
}

TEST(MiOracles, Examples) {
  EXPECT_EQ(gaussian_mi_oracle(0.0), 0.0);
  EXPECT_NEAR(gaussian_mi_oracle(0.5), 0.143841036, 1e-9);
  const DiscreteJoint j({{40, 10}, {10, 40}});
  EXPECT_NEAR(brute_force_mi(j), mutual_information_discrete(j).value, 1e-12);
  EXPECT_THROW(gaussian_mi_oracle(1.0), Error);
}
