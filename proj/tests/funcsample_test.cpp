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

#include <algorithm>
#include <random>
#include <vector>

#include "fccf/funcsample.hpp"
#include "test_util.hpp"

namespace fccf {
namespace {

using testing::random_grouped;
using testing::random_sample;

TEST(GroupMean, SingleSampleIsItself) {
  std::mt19937_64 rng(1);
  const auto s = random_sample(2, LagGrid(), rng);
  const std::vector<MultiCurveSample> one = {s};
  EXPECT_EQ(group_mean(one), s.curves);
}

TEST(GroupMean, OppositeCurvesCancel) {
  std::mt19937_64 rng(2);
  auto a = random_sample(2, LagGrid(), rng);
  auto b = a;
  b.curves = -a.curves;
  const std::vector<MultiCurveSample> pair = {a, b};
  EXPECT_TRUE(group_mean(pair).isZero(0.0));
}

TEST(GroupMean, MatchesElementwiseOracle) {
  std::mt19937_64 rng(3);
  std::vector<MultiCurveSample> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(random_sample(3, LagGrid(), rng));
  const auto mean = group_mean(samples);
  for (Eigen::Index k = 0; k < 3; ++k) {
    for (Eigen::Index m = 0; m < 41; ++m) {
      double s = 0.0;
      for (const auto& x : samples) s += x.curves(k, m);
      EXPECT_NEAR(mean(k, m), s / 5.0, 1e-14);
    }
  }
}

TEST(GroupMean, EmptyGroup) {
  const std::vector<MultiCurveSample> none;
  try {
    group_mean(none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty group");
  }
}

TEST(PooledCovariance, RepeatedCurvesGiveZero) {
  std::mt19937_64 rng(4);
  const auto a = random_sample(2, LagGrid(), rng);
  const auto b = random_sample(2, LagGrid(), rng);
  GroupedSample g;
  g.group1 = {a, a, a};
  g.group2 = {b, b};
  const auto cov = pooled_covariance(g);
  EXPECT_LT(cov.full().cwiseAbs().maxCoeff(), 1e-30);
}

TEST(PooledCovariance, UnivariateMatchesTextbookPooledVariance) {
  const auto g = random_grouped(1, 7, 7, LagGrid(), 5);
  const auto cov = pooled_covariance(g);
  for (std::size_t h = 0; h < 41; ++h) {
    auto sample_var = [&](const std::vector<MultiCurveSample>& grp) {
      double mean = 0.0;
      for (const auto& s : grp) mean += s.curves(0, h);
      mean /= grp.size();
      double ss = 0.0;
      for (const auto& s : grp) ss += std::pow(s.curves(0, h) - mean, 2);
      return ss / (grp.size() - 1);
    };
    const double pooled =
        (6.0 * sample_var(g.group1) + 6.0 * sample_var(g.group2)) / 12.0;
    EXPECT_NEAR(cov.block(h, h)(0, 0), pooled, 1e-12);
  }
}

TEST(PooledCovariance, TransposeIdentityIsExact) {
  const auto g = random_grouped(3, 6, 5, LagGrid(-0.5, 0.5, 11), 6);
  const auto cov = pooled_covariance(g);
  for (std::size_t s = 0; s < 11; ++s) {
    for (std::size_t t = 0; t < 11; ++t) {
      EXPECT_EQ(Eigen::MatrixXd(cov.block(s, t)),
                Eigen::MatrixXd(cov.block(t, s).transpose()));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.block(s, s));
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(PooledCovariance, InvariantToWithinGroupOrder) {
  auto g = random_grouped(2, 8, 6, LagGrid(), 7);
  const auto before = pooled_covariance(g).full();
  std::mt19937_64 rng(8);
  std::shuffle(g.group1.begin(), g.group1.end(), rng);
  std::shuffle(g.group2.begin(), g.group2.end(), rng);
  EXPECT_LT((pooled_covariance(g).full() - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PooledCovariance, InvariantToCommonShiftOfOneGroup) {
  auto g = random_grouped(2, 8, 6, LagGrid(), 9);
  const auto before = pooled_covariance(g).full();
  std::mt19937_64 rng(10);
  const auto offset = random_sample(2, LagGrid(), rng).curves;
  for (auto& s : g.group1) s.curves += offset;
  EXPECT_LT((pooled_covariance(g).full() - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PooledCovariance, Errors) {
  auto g = random_grouped(1, 1, 1, LagGrid(), 11);
  try {
    pooled_covariance(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "insufficient sessions");
  }
  g = random_grouped(2, 3, 3, LagGrid(), 12);
  g.group2[1].grid = LagGrid(-1.0, 1.0, 21);
  EXPECT_THROW(pooled_covariance(g), Error);
  g = random_grouped(2, 3, 3, LagGrid(), 12);
  g.group2[1].measures = {"m1", "m0"};
  EXPECT_THROW(pooled_covariance(g), Error);
}

TEST(CovarianceTraceRatio, DetectsScaleMismatch) {
  auto g = random_grouped(2, 30, 30, LagGrid(), 13);
  EXPECT_LT(covariance_trace_ratio(g), 2.0);
  for (auto& s : g.group2) s.curves *= 5.0;
  EXPECT_GT(covariance_trace_ratio(g), 10.0);
}

}  // namespace
}  // namespace fccf
