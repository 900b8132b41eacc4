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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fccf/csv.hpp"
#include "fccf/error.hpp"

namespace fccf {

/// Uniform lag grid on [a, b] with M points, in seconds.
class LagGrid {
 public:
  LagGrid() : LagGrid(-1.0, 1.0, 41) {}

  LagGrid(double a, double b, std::size_t m) : a_(a), b_(b) {
    if (!(std::isfinite(a) && std::isfinite(b))) {
      throw validation_error("lag grid bounds must be finite");
    }
    if (m < 1) throw validation_error("lag grid needs at least one point");
    if (m == 1 && a != b) {
      throw validation_error("single-point lag grid needs a == b");
    }
    if (m > 1 && !(a < b)) throw validation_error("lag grid needs a < b");
    values_.resize(m);
    if (m == 1) {
      values_[0] = a;
      return;
    }
    // Weighted form keeps symmetric grids exactly symmetric:
    // values[M-1-i] == -values[i] bit for bit when a == -b.
    const double denom = static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      const double lo = static_cast<double>(m - 1 - i);
      const double hi = static_cast<double>(i);
      values_[i] = (a * lo + b * hi) / denom;
    }
    values_.front() = a;
    values_.back() = b;
  }

  double a() const { return a_; }
  double b() const { return b_; }
  std::size_t size() const { return values_.size(); }
  double delta() const {
    return values_.size() > 1
               ? (b_ - a_) / static_cast<double>(values_.size() - 1)
               : 0.0;
  }
  double width() const { return b_ - a_; }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const LagGrid& x, const LagGrid& y) {
    return x.values_ == y.values_;
  }

 private:
  double a_;
  double b_;
  std::vector<double> values_;
};

enum class CovDivisor {
  kSeriesLength,  // 1/T, the correlogram convention
  kOverlap,       // 1/(T-|l|)
};

struct CcfCurve {
  LagGrid grid;
  std::vector<double> rho;
};

namespace detail {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Sum over t of (x(t)-mx)(y(t+lag)-my), ordered by ascending x index. The
// swapped call (y, x, -lag) visits the same products in the same order,
// which makes ccf swap symmetry exact in floating point.
inline double lagged_cross_sum(std::span<const double> x, double mx,
                               std::span<const double> y, double my,
                               std::int64_t lag) {
  const auto n = static_cast<std::int64_t>(x.size());
  double s = 0.0;
  if (lag >= 0) {
    for (std::int64_t t = 0; t + lag < n; ++t) {
      s += (x[t] - mx) * (y[t + lag] - my);
    }
  } else {
    for (std::int64_t t = -lag; t < n; ++t) {
      s += (y[t + lag] - my) * (x[t] - mx);
    }
  }
  return s;
}

inline double divisor(std::size_t n, std::int64_t lag, CovDivisor d) {
  const auto len = static_cast<double>(n);
  return d == CovDivisor::kSeriesLength
             ? len
             : len - static_cast<double>(lag < 0 ? -lag : lag);
}

}  // namespace detail

/// Sample cross-covariance at an integer lag:
///   (1/T) sum_t (x(t) - mean x)(y(t+lag) - mean y)
/// over the T-|lag| overlapping pairs, with full-sample means.
inline double cross_covariance(std::span<const double> x,
                               std::span<const double> y, std::int64_t lag,
                               CovDivisor div = CovDivisor::kSeriesLength) {
  if (x.size() != y.size()) throw validation_error("series lengths differ");
  if (x.size() < 2) throw validation_error("too short");
  const auto n = static_cast<std::int64_t>(x.size());
  if (lag >= n || lag <= -n) throw validation_error("lag exceeds series");
  const double s =
      detail::lagged_cross_sum(x, detail::mean(x), y, detail::mean(y), lag);
  return s / detail::divisor(x.size(), lag, div);
}

/// Integer sample lag for each grid lag, by nearest-integer rounding.
inline std::vector<std::int64_t> sample_lags(const LagGrid& grid,
                                             double sample_rate_hz,
                                             std::size_t series_length) {
  if (!(sample_rate_hz > 0.0)) {
    throw validation_error("sample rate must be positive");
  }
  std::vector<std::int64_t> lags(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    lags[i] = static_cast<std::int64_t>(std::llround(grid[i] * sample_rate_hz));
    const auto mag = lags[i] < 0 ? -lags[i] : lags[i];
    if (mag >= static_cast<std::int64_t>(series_length)) {
      throw validation_error("lag exceeds series");
    }
    if (i > 0 && lags[i] == lags[i - 1]) {
      throw validation_error("grid too fine for sample rate");
    }
  }
  return lags;
}

/// Cross-correlation curve rho(h) = gamma_xy(l_h) / sqrt(gamma_xx(0) gamma_yy(0))
/// where gamma_xy(l) = Cov{x(t), y(t+l)}.
inline CcfCurve ccf_curve(std::span<const double> x, std::span<const double> y,
                          const LagGrid& grid, double sample_rate_hz,
                          CovDivisor div = CovDivisor::kSeriesLength) {
  if (x.size() != y.size()) throw validation_error("series lengths differ");
  if (x.size() < 2) throw validation_error("too short");
  const auto lags = sample_lags(grid, sample_rate_hz, x.size());
  const double mx = detail::mean(x);
  const double my = detail::mean(y);
  const double vx = detail::lagged_cross_sum(x, mx, x, mx, 0);
  const double vy = detail::lagged_cross_sum(y, my, y, my, 0);
  if (!(vx > 0.0) || !(vy > 0.0)) throw degenerate_error("degenerate series");
  const double n = static_cast<double>(x.size());
  const double scale = std::sqrt((vx / n) * (vy / n));
  CcfCurve out{grid, std::vector<double>(grid.size())};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = detail::lagged_cross_sum(x, mx, y, my, lags[i]);
    out.rho[i] = (s / detail::divisor(x.size(), lags[i], div)) / scale;
  }
  return out;
}

inline std::string write_curve_csv(const CcfCurve& c) {
  std::string out = "lag_seconds,rho\n";
  for (std::size_t i = 0; i < c.grid.size(); ++i) {
    out += csv::format_double(c.grid[i]) + "," +
           csv::format_double(c.rho[i]) + "\n";
  }
  return out;
}

}  // namespace fccf
