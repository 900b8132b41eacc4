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

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fccf/ccf.hpp"
#include "fccf/error.hpp"

namespace fccf {

/// One session's p-vector of curves: row k is measure k, column m is lag m.
struct MultiCurveSample {
  std::string session_id;
  LagGrid grid;
  std::vector<std::string> measures;
  Eigen::MatrixXd curves;

  std::size_t dim() const { return measures.size(); }
};

struct GroupedSample {
  std::vector<MultiCurveSample> group1;
  std::vector<MultiCurveSample> group2;

  std::size_t n1() const { return group1.size(); }
  std::size_t n2() const { return group2.size(); }
  std::size_t n() const { return n1() + n2(); }
  const LagGrid& grid() const { return group1.front().grid; }
  const std::vector<std::string>& measures() const {
    return group1.front().measures;
  }
  std::size_t dim() const { return measures().size(); }

  /// Shape checks only; the n > p + 2 requirement is enforced by callers
  /// that invert the covariance.
  void validate() const {
    if (group1.empty() || group2.empty()) throw validation_error("empty group");
    const auto& grid0 = group1.front().grid;
    const auto& meas0 = group1.front().measures;
    if (meas0.empty()) throw validation_error("no measures");
    auto check = [&](const MultiCurveSample& s) {
      if (!(s.grid == grid0)) {
        throw validation_error("session " + s.session_id +
                               ": lag grid differs from the dataset grid");
      }
      if (s.measures != meas0) {
        throw validation_error("session " + s.session_id +
                               ": measure list differs from the dataset");
      }
      if (s.curves.rows() != static_cast<Eigen::Index>(meas0.size()) ||
          s.curves.cols() != static_cast<Eigen::Index>(grid0.size())) {
        throw validation_error("session " + s.session_id +
                               ": curve matrix has the wrong shape");
      }
    };
    for (const auto& s : group1) check(s);
    for (const auto& s : group2) check(s);
  }
};

/// Flattened curves: one row per session, column m*p + k holds measure k at
/// lag m. Lag-major order keeps each p x p covariance block contiguous.
inline Eigen::MatrixXd stack_curves(std::span<const MultiCurveSample> samples) {
  if (samples.empty()) return {};
  const auto p = samples.front().curves.rows();
  const auto m = samples.front().curves.cols();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), p * m);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    // Column-major p x M storage is already lag-major.
    out.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(samples[i].curves.data(), p * m);
  }
  return out;
}

inline Eigen::MatrixXd group_mean(std::span<const MultiCurveSample> samples) {
  if (samples.empty()) throw validation_error("empty group");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(samples.front().curves.rows(),
                                              samples.front().curves.cols());
  for (const auto& s : samples) {
    if (s.curves.rows() != sum.rows() || s.curves.cols() != sum.cols()) {
      throw validation_error("session " + s.session_id +
                             ": curve matrix has the wrong shape");
    }
    sum += s.curves;
  }
  return sum / static_cast<double>(samples.size());
}

inline Eigen::MatrixXd group_mean(const std::vector<MultiCurveSample>& s) {
  return group_mean(std::span<const MultiCurveSample>(s));
}

/// Gamma(s, t) for every pair of grid lags, fully materialized as an
/// (M p) x (M p) symmetric matrix.
class PooledCovFunction {
 public:
  PooledCovFunction() = default;
  PooledCovFunction(LagGrid grid, std::size_t dim, Eigen::MatrixXd full,
                    double data_scale = 0.0)
      : grid_(std::move(grid)),
        dim_(dim),
        full_(std::move(full)),
        data_scale_(data_scale) {}

  const LagGrid& grid() const { return grid_; }
  std::size_t dim() const { return dim_; }

  auto block(std::size_t s, std::size_t t) const {
    const auto p = static_cast<Eigen::Index>(dim_);
    return full_.block(static_cast<Eigen::Index>(s) * p,
                       static_cast<Eigen::Index>(t) * p, p, p);
  }

  const Eigen::MatrixXd& full() const { return full_; }

  // Largest |Y| in the data the estimate came from; 0 when unknown. Used
  // to tell a zero covariance from rounding noise.
  double data_scale() const { return data_scale_; }

 private:
  LagGrid grid_;
  std::size_t dim_ = 0;
  Eigen::MatrixXd full_;
  double data_scale_ = 0.0;
};

namespace detail {

// Residuals Y_ij - mean_i, rows in (group1..., group2...) order.
inline Eigen::MatrixXd within_group_residuals(const Eigen::MatrixXd& g1,
                                              const Eigen::MatrixXd& g2) {
  Eigen::MatrixXd r(g1.rows() + g2.rows(), g1.cols());
  const Eigen::RowVectorXd m1 = g1.colwise().sum() / static_cast<double>(g1.rows());
  const Eigen::RowVectorXd m2 = g2.colwise().sum() / static_cast<double>(g2.rows());
  r.topRows(g1.rows()) = g1.rowwise() - m1;
  r.bottomRows(g2.rows()) = g2.rowwise() - m2;
  return r;
}

}  // namespace detail

/// Gamma_hat(s,t) = 1/(n-2) sum_i sum_j (Y_ij(s) - Ybar_i(s))(Y_ij(t) - Ybar_i(t))^T
inline PooledCovFunction pooled_covariance(const GroupedSample& g) {
  g.validate();
  if (g.n() <= 2) throw validation_error("insufficient sessions");
  const Eigen::MatrixXd y1 = stack_curves(g.group1);
  const Eigen::MatrixXd y2 = stack_curves(g.group2);
  const double scale =
      std::max(y1.cwiseAbs().maxCoeff(), y2.cwiseAbs().maxCoeff());
  const Eigen::MatrixXd r = detail::within_group_residuals(y1, y2);
  const auto d = r.cols();
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(d, d);
  lower.selfadjointView<Eigen::Lower>().rankUpdate(r.transpose());
  // Mirroring the lower triangle makes block(s,t) == block(t,s)^T exactly.
  Eigen::MatrixXd full = lower.selfadjointView<Eigen::Lower>();
  full /= static_cast<double>(g.n() - 2);
  return PooledCovFunction(g.grid(), g.dim(), std::move(full), scale);
}

/// Ratio of the larger to the smaller integrated within-group variance
/// trace. Values far from 1 cast doubt on the common-covariance model.
inline double covariance_trace_ratio(const GroupedSample& g) {
  g.validate();
  auto trace = [](const std::vector<MultiCurveSample>& grp) {
    if (grp.size() < 2) return 0.0;
    const Eigen::MatrixXd x = stack_curves(grp);
    const Eigen::MatrixXd r = x.rowwise() - x.colwise().mean();
    return r.squaredNorm() / static_cast<double>(grp.size() - 1);
  };
  const double t1 = trace(g.group1);
  const double t2 = trace(g.group2);
  const double lo = std::min(t1, t2);
  const double hi = std::max(t1, t2);
  if (hi == 0.0) return 1.0;
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace fccf
