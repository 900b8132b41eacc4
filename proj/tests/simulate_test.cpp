// Copyright 2026 The fccf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "fccf/simulate.hpp"

namespace fccf {
namespace {

GpSpec small_spec() {
  GpSpec spec;
  spec.grid = LagGrid(-1.0, 1.0, 11);
  spec.cross_measure_corr = 0.3;
  return spec;
}

TEST(GpSampler, ZeroVarianceReturnsMeanExactly) {
  auto spec = small_spec();
  spec.variance = 0.0;
  spec.mean = Eigen::MatrixXd::Random(2, 11);
  for (const auto& s : simulate_gp_sample(spec, 5, 1)) {
    EXPECT_EQ(s.curves, spec.mean);
  }
}

TEST(GpSampler, DeterministicPerSeedAndIndex) {
  const auto spec = small_spec();
  const GpSampler sampler(spec);
  EXPECT_EQ(sampler.draw(7, 3, "a").curves, sampler.draw(7, 3, "b").curves);
  EXPECT_NE(sampler.draw(7, 3, "a").curves, sampler.draw(7, 4, "a").curves);
  EXPECT_NE(sampler.draw(7, 3, "a").curves, sampler.draw(8, 3, "a").curves);
  const auto batch = simulate_gp_sample(spec, 4, 7);
  EXPECT_EQ(batch[3].curves, sampler.draw(7, 3, "s3").curves);
  EXPECT_EQ(batch[3].session_id, "s3");
}

TEST(GpSampler, SampleMeanConverges) {
  auto spec = small_spec();
  spec.mean = Eigen::MatrixXd::Constant(2, 11, 0.7);
  const GpSampler sampler(spec);
  const int n = 10000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 11);
  for (int i = 0; i < n; ++i) sum += sampler.draw(3, i, "s").curves;
  sum /= n;
  EXPECT_LT((sum - spec.mean).cwiseAbs().maxCoeff(), 4.0 / std::sqrt(n));
}

TEST(GpSampler, SampleCovarianceMatchesKernel) {
  const auto spec = small_spec();
  const GpSampler sampler(spec);
  const Eigen::MatrixXd target = gp_covariance(spec);
  const int n = 5000;
  const auto dim = target.rows();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    const auto c = sampler.draw(5, i, "s").curves;
    const Eigen::Map<const Eigen::VectorXd> v(c.data(), dim);
    acc += v * v.transpose();
  }
  acc /= n;
  // Entry variance is at most 2 for unit-variance Gaussians.
  EXPECT_LT((acc - target).cwiseAbs().maxCoeff(), 5.0 * std::sqrt(2.0 / n));
}

TEST(GpSpec, KernelEntries) {
  auto spec = small_spec();
  const auto k = gp_covariance(spec);
  const double d = 0.2;
  // Column layout is measure-fastest within each lag.
  EXPECT_NEAR(k(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(k(0, 1), 0.3, 1e-15);
  EXPECT_NEAR(k(0, 2), std::exp(-d * d / (2 * 0.25 * 0.25)), 1e-15);
  EXPECT_NEAR(k(0, 3), 0.3 * std::exp(-d * d / (2 * 0.25 * 0.25)), 1e-15);
}

TEST(GpSpec, Validation) {
  auto bad = [](auto mutate) {
    auto spec = small_spec();
    mutate(spec);
    try {
      validate(spec);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::kValidation &&
             std::string(e.what()).find("invalid kernel") == 0;
    }
    return false;
  };
  EXPECT_TRUE(bad([](GpSpec& s) { s.length_scale = 0.0; }));
  EXPECT_TRUE(bad([](GpSpec& s) { s.variance = -1.0; }));
  EXPECT_TRUE(bad([](GpSpec& s) { s.cross_measure_corr = 1.0; }));
  auto wrong_mean = small_spec();
  wrong_mean.mean = Eigen::MatrixXd::Zero(3, 11);
  EXPECT_THROW(validate(wrong_mean), Error);
  EXPECT_NO_THROW(validate(small_spec()));
}

// ---------------------------------------------------------------------------
// VAR(1)

Eigen::Matrix2d summed_stationary(const Eigen::Matrix2d& a,
                                  const Eigen::Matrix2d& sigma) {
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
  for (int k = 0; k < 2000; ++k) {
    g += p * sigma * p.transpose();
    p = a * p;
  }
  return g;
}

TEST(Var1, LyapunovMatchesSeries) {
  Eigen::Matrix2d a;
  a << 0.5, 0.1, -0.2, 0.4;
  Eigen::Matrix2d sigma;
  sigma << 1.0, 0.3, 0.3, 2.0;
  EXPECT_LT((lyapunov_covariance(a, sigma) - summed_stationary(a, sigma))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Var1, TheoryMatchesDirectDefinition) {
  Var1Spec spec;
  spec.a << 0.3, 0.0, 0.5, 0.2;
  spec.sample_rate_hz = 10.0;
  const LagGrid grid(-0.5, 0.5, 11);
  const auto theory = theoretical_var1_ccf(spec, grid);
  const Eigen::Matrix2d g0 = summed_stationary(spec.a, spec.sigma);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int l = static_cast<int>(std::lround(grid[i] * 10.0));
    // Cov(X0_t, X1_{t+l}) = [A^l G0]_{10} for l >= 0,
    // Cov(X0_{t+|l|}, X1_t) = [A^|l| G0]_{01} otherwise.
    Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
    for (int k = 0; k < std::abs(l); ++k) p *= spec.a;
    const Eigen::Matrix2d gl = p * g0;
    const double cov = l >= 0 ? gl(1, 0) : gl(0, 1);
    EXPECT_NEAR(theory.rho[i], cov / std::sqrt(g0(0, 0) * g0(1, 1)), 1e-12);
  }
}

TEST(Var1, WhiteNoiseHasNoCrossCorrelation) {
  Var1Spec spec;
  const auto theory = theoretical_var1_ccf(spec, LagGrid(-3, 3, 7));
  for (double r : theory.rho) EXPECT_EQ(r, 0.0);
}

TEST(Var1, CorrelatedInnovationsOnlyAtLagZero) {
  Var1Spec spec;
  spec.sigma << 1.0, 0.5, 0.5, 1.0;
  const auto theory = theoretical_var1_ccf(spec, LagGrid(-3, 3, 7));
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_NEAR(theory.rho[i], i == 3 ? 0.5 : 0.0, 1e-15);
  }
}

TEST(Var1, Nonstationary) {
  Var1Spec spec;
  spec.a << 1.0, 0.0, 0.0, 0.5;
  try {
    simulate_var1_path(spec, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "nonstationary");
  }
}

TEST(Var1, ZeroInnovationsGiveZeroPath) {
  Var1Spec spec;
  spec.a << 0.5, 0.1, 0.0, 0.3;
  spec.sigma.setZero();
  spec.length = 100;
  const auto path = simulate_var1_path(spec, 2);
  ASSERT_EQ(path.x.size(), 100u);
  for (std::size_t t = 0; t < 100; ++t) {
    EXPECT_EQ(path.x[t], 0.0);
    EXPECT_EQ(path.y[t], 0.0);
  }
}

TEST(Var1, PathDeterminism) {
  Var1Spec spec;
  spec.a << 0.4, 0.0, 0.2, 0.4;
  spec.length = 500;
  const auto a = simulate_var1_path(spec, 3);
  const auto b = simulate_var1_path(spec, 3);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.x, simulate_var1_path(spec, 4).x);
}

TEST(Var1, MarginalVarianceMatchesLyapunov) {
  Var1Spec spec;
  spec.a << 0.5, 0.0, 0.3, 0.4;
  spec.sigma << 1.0, 0.2, 0.2, 0.5;
  spec.length = 100000;
  const auto path = simulate_var1_path(spec, 5);
  const Eigen::Matrix2d g0 = lyapunov_covariance(spec.a, spec.sigma);
  auto variance = [](const std::vector<double>& v) {
    double m = 0.0, s = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return s / v.size();
  };
  EXPECT_NEAR(variance(path.x) / g0(0, 0), 1.0, 0.05);
  EXPECT_NEAR(variance(path.y) / g0(1, 1), 1.0, 0.05);
}

TEST(Var1, EmpiricalCcfMatchesTheory) {
  Var1Spec spec;
  spec.a << 0.4, 0.0, 0.4, 0.3;
  spec.length = 100000;
  spec.sample_rate_hz = 10.0;
  const LagGrid grid(-0.5, 0.5, 11);
  const auto path = simulate_var1_path(spec, 6);
  const auto est = ccf_curve(path.x, path.y, grid, spec.sample_rate_hz);
  const auto theory = theoretical_var1_ccf(spec, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(est.rho[i], theory.rho[i], 0.02) << "lag " << grid[i];
  }
}

TEST(Var1, DefaultBurnIn) {
  Var1Spec spec;
  spec.a << 0.5, 0.0, 0.0, 0.2;
  EXPECT_EQ(default_burn_in(spec), 20u);
}

}  // namespace
}  // namespace fccf
