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
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fccf/ccf.hpp"
#include "fccf/error.hpp"
#include "fccf/funcsample.hpp"
#include "fccf/parallel.hpp"
#include "fccf/rng.hpp"

namespace fccf {

// Relative ridge / eigenvalue floor for p x p covariance blocks.
inline constexpr double kRidgeEpsilon = 1e-8;

// A covariance block whose largest eigenvalue is below
// (kDegenerateRelative * data scale)^2 carries no information beyond
// floating-point noise in the group means.
inline constexpr double kDegenerateRelative = 1e-12;
inline constexpr double kZeroShiftRelative = 1e-10;

enum class Quadrature {
  kTrapezoid,
  kRiemann,  // plain sum T(h_m) * delta_h
};

inline std::string_view to_string(Quadrature q) {
  return q == Quadrature::kTrapezoid ? "trapezoid" : "riemann";
}

inline std::vector<double> quadrature_weights(const LagGrid& grid,
                                              Quadrature q) {
  const std::size_t m = grid.size();
  if (m < 2) throw validation_error("quadrature needs at least two lags");
  std::vector<double> w(m, grid.delta());
  if (q == Quadrature::kTrapezoid) {
    w.front() *= 0.5;
    w.back() *= 0.5;
  }
  return w;
}

struct PointwiseCurve {
  LagGrid grid;
  std::vector<double> t_values;
};

struct WsCalibration {
  double beta = 0.0;
  double d = 0.0;
  double mean_hat = 0.0;
  double var_hat = 0.0;
};

struct MaxResult {
  double value = 0.0;
  double arg_lag = 0.0;
  std::size_t index = 0;
};

namespace detail {

inline double max_abs(const Eigen::MatrixXd& x) {
  return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

struct BlockSpectrum {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  bool degenerate = false;
};

// Eigendecomposition of a symmetric PSD block. If the block is numerically
// singular (lambda_min <= eps * lambda_max) a ridge eps * mean(diag) * I is
// added first; well-conditioned blocks are used as is.
inline BlockSpectrum block_spectrum(const Eigen::MatrixXd& block,
                                    double scale_ref) {
  BlockSpectrum out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
  double lmax = eig.eigenvalues().maxCoeff();
  double lmin = eig.eigenvalues().minCoeff();
  const double floor_var = std::pow(kDegenerateRelative * scale_ref, 2);
  if (!(lmax > floor_var)) {
    out.degenerate = true;
    return out;
  }
  if (lmin <= kRidgeEpsilon * lmax) {
    const double ridge = kRidgeEpsilon * block.diagonal().mean();
    Eigen::MatrixXd reg = block;
    reg.diagonal().array() += ridge;
    eig.compute(reg);
    lmax = eig.eigenvalues().maxCoeff();
  }
  out.values = eig.eigenvalues().cwiseMax(kRidgeEpsilon * lmax);
  out.vectors = eig.eigenvectors();
  return out;
}

// (n1 n2 / n) * delta^T S^{-1} delta, with the degenerate convention that a
// zero shift against a zero covariance gives 0.
inline double hotelling_form(const Eigen::MatrixXd& s,
                             const Eigen::VectorXd& delta, double weight,
                             double scale_ref, double lag) {
  const auto spec = block_spectrum(s, scale_ref);
  if (spec.degenerate) {
    if (delta.cwiseAbs().maxCoeff() <= kZeroShiftRelative * scale_ref) {
      return 0.0;
    }
    throw degenerate_error("degenerate covariance at lag " +
                           csv::format_double(lag));
  }
  const Eigen::VectorXd proj = spec.vectors.transpose() * delta;
  return weight * (proj.array().square() / spec.values.array()).sum();
}

// Pointwise statistic for a split of the stacked rows into two index sets.
// Shared by the observed, bootstrap and permutation paths.
inline std::vector<double> pointwise_split(const Eigen::MatrixXd& rows,
                                           std::span<const std::size_t> g1,
                                           std::span<const std::size_t> g2,
                                           std::size_t p,
                                           const LagGrid& grid,
                                           double scale_ref) {
  const std::size_t m_count = grid.size();
  const double n1 = static_cast<double>(g1.size());
  const double n2 = static_cast<double>(g2.size());
  const double weight = n1 * n2 / (n1 + n2);
  const double denom = n1 + n2 - 2.0;
  const auto pi = static_cast<Eigen::Index>(p);
  std::vector<double> out(m_count);
  Eigen::VectorXd mean1(pi), mean2(pi), r(pi);
  Eigen::MatrixXd s(pi, pi);
  for (std::size_t m = 0; m < m_count; ++m) {
    const auto col = static_cast<Eigen::Index>(m * p);
    mean1.setZero();
    mean2.setZero();
    for (auto i : g1) mean1 += rows.row(static_cast<Eigen::Index>(i)).segment(col, pi).transpose();
    for (auto i : g2) mean2 += rows.row(static_cast<Eigen::Index>(i)).segment(col, pi).transpose();
    mean1 /= n1;
    mean2 /= n2;
    s.setZero();
    for (auto i : g1) {
      r = rows.row(static_cast<Eigen::Index>(i)).segment(col, pi).transpose() - mean1;
      s.noalias() += r * r.transpose();
    }
    for (auto i : g2) {
      r = rows.row(static_cast<Eigen::Index>(i)).segment(col, pi).transpose() - mean2;
      s.noalias() += r * r.transpose();
    }
    s /= denom;
    out[m] = hotelling_form(s, mean1 - mean2, weight, scale_ref, grid[m]);
  }
  return out;
}

inline double weighted_sum(std::span<const double> values,
                           std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
  return s;
}

inline std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

inline void require_testable(const GroupedSample& g) {
  g.validate();
  if (g.n() <= g.dim() + 2) {
    throw validation_error("need n1 + n2 > p + 2 sessions (have " +
                           std::to_string(g.n()) + " for p = " +
                           std::to_string(g.dim()) + ")");
  }
}

inline double data_scale(const Eigen::MatrixXd& rows) {
  return max_abs(rows);
}

}  // namespace detail

/// T_n(h) = (n1 n2 / n) delta(h)^T Gamma_hat(h,h)^{-1} delta(h), with
/// delta(h) the difference of group mean vectors.
inline PointwiseCurve hotelling_pointwise(const GroupedSample& g,
                                          const PooledCovFunction& cov) {
  detail::require_testable(g);
  const Eigen::MatrixXd mean1 = group_mean(g.group1);
  const Eigen::MatrixXd mean2 = group_mean(g.group2);
  const double n1 = static_cast<double>(g.n1());
  const double n2 = static_cast<double>(g.n2());
  const double weight = n1 * n2 / (n1 + n2);
  const double scale = std::max(detail::max_abs(stack_curves(g.group1)),
                                detail::max_abs(stack_curves(g.group2)));
  PointwiseCurve pw{g.grid(), std::vector<double>(g.grid().size())};
  for (std::size_t m = 0; m < g.grid().size(); ++m) {
    const Eigen::VectorXd delta =
        mean1.col(static_cast<Eigen::Index>(m)) -
        mean2.col(static_cast<Eigen::Index>(m));
    pw.t_values[m] = detail::hotelling_form(cov.block(m, m), delta, weight,
                                            scale, g.grid()[m]);
  }
  return pw;
}

inline PointwiseCurve hotelling_pointwise(const GroupedSample& g) {
  return hotelling_pointwise(g, pooled_covariance(g));
}

/// Integral of T_n over the lag domain by quadrature on the grid.
inline double f_int(const PointwiseCurve& pw,
                    Quadrature q = Quadrature::kTrapezoid) {
  return detail::weighted_sum(pw.t_values, quadrature_weights(pw.grid, q));
}

/// Maximum of T_n over the grid; ties resolve to the smallest lag.
inline MaxResult f_max(const PointwiseCurve& pw) {
  if (pw.t_values.empty()) throw validation_error("empty pointwise curve");
  const auto i = detail::argmax_first(pw.t_values);
  return {pw.t_values[i], pw.grid[i], i};
}

/// Mean/variance matching of the F_int null law by beta * chi2_d, using the
/// standardized covariance Gamma*(s,t) = G(s,s)^{-1/2} G(s,t) G(t,t)^{-1/2}.
inline WsCalibration ws_calibrate(const PooledCovFunction& cov,
                                  const LagGrid& grid,
                                  Quadrature q = Quadrature::kTrapezoid) {
  const double scale_ref = cov.data_scale();
  const std::size_t m_count = grid.size();
  const std::size_t p = cov.dim();
  if (cov.full().rows() != static_cast<Eigen::Index>(m_count * p)) {
    throw validation_error("covariance does not match the lag grid");
  }
  const auto weights = quadrature_weights(grid, q);
  // Row/column scaling: sqrt(w_s) * G(s,s)^{-1/2}, block diagonal.
  std::vector<Eigen::MatrixXd> scaled_root(m_count);
  for (std::size_t s = 0; s < m_count; ++s) {
    const auto spec = detail::block_spectrum(cov.block(s, s), scale_ref);
    if (spec.degenerate) {
      throw degenerate_error("cannot standardize at lag " +
                             csv::format_double(grid[s]));
    }
    scaled_root[s] = std::sqrt(weights[s]) * spec.vectors *
                     spec.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                     spec.vectors.transpose();
  }
  double mean_hat = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < m_count; ++s) {
    for (std::size_t t = s; t < m_count; ++t) {
      const Eigen::MatrixXd star =
          scaled_root[s] * cov.block(s, t) * scaled_root[t];
      if (s == t) {
        mean_hat += star.trace();
        sum_sq += star.squaredNorm();
      } else {
        sum_sq += 2.0 * star.squaredNorm();
      }
    }
  }
  WsCalibration cal;
  cal.mean_hat = mean_hat;
  cal.var_hat = 2.0 * sum_sq;
  if (!(cal.mean_hat > 0.0) || !(cal.var_hat > 0.0)) {
    throw degenerate_error("cannot standardize: zero calibration moments");
  }
  cal.beta = cal.var_hat / (2.0 * cal.mean_hat);
  cal.d = 2.0 * cal.mean_hat * cal.mean_hat / cal.var_hat;
  return cal;
}

enum class WsMoments {
  kFiniteSample,  // asymptotic moments scaled by the exact Gaussian null mean
  kAsymptotic,    // plug-in moments of the limiting chi-square mixture
};

inline std::string_view to_string(WsMoments m) {
  return m == WsMoments::kFiniteSample ? "finite_sample" : "asymptotic";
}

/// E[T_n(h)] / p under the null for Gaussian curves: with an estimated
/// covariance, T_n(h) ~ (n-2)p/(n-p-1) F(p, n-p-1), whose mean exceeds the
/// limiting chi2_p mean by (n-2)/(n-p-3). Requires n > p + 3.
inline double finite_sample_factor(std::size_t n, std::size_t p) {
  if (n <= p + 3) {
    throw validation_error("finite-sample calibration needs n > p + 3");
  }
  return static_cast<double>(n - 2) / static_cast<double>(n - p - 3);
}

/// Scales the approximating law beta * chi2_d by `factor` (beta and both
/// moments change, d does not).
inline WsCalibration scale_calibration(WsCalibration cal, double factor) {
  cal.beta *= factor;
  cal.mean_hat *= factor;
  cal.var_hat *= factor * factor;
  return cal;
}

/// Upper tail P(beta * chi2_d >= value).
inline double ws_pvalue(double value, const WsCalibration& cal) {
  if (!(cal.beta > 0.0) || !(cal.d > 0.0) || !std::isfinite(cal.beta) ||
      !std::isfinite(cal.d)) {
    throw validation_error("invalid calibration");
  }
  if (!(value > 0.0)) return 1.0;
  return boost::math::gamma_q(cal.d / 2.0, value / (2.0 * cal.beta));
}

// ---------------------------------------------------------------------------
// Resampling

struct ResamplingOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  Quadrature quadrature = Quadrature::kTrapezoid;
  // Upper bound on replicates * sessions.
  double work_limit = 1e9;
};

struct BootstrapResult {
  double observed_f_max = 0.0;
  double observed_f_int = 0.0;
  double p_value = 1.0;          // F_max, the calibrated statistic
  double p_value_f_int = 1.0;    // diagnostic only
  std::vector<double> f_max_replicates;
  std::vector<double> f_int_replicates;
};

// Monte Carlo p-value with the add-one correction. Replicates within a
// relative 1e-12 of the observed value count as ties (>=).
inline double add_one_pvalue(double observed, std::span<const double> reps) {
  const double tol = 1e-12 * std::max(1.0, std::abs(observed));
  std::size_t count = 0;
  for (double r : reps) {
    if (r >= observed - tol) ++count;
  }
  return static_cast<double>(1 + count) /
         static_cast<double>(reps.size() + 1);
}

/// Bootstrap calibration of F_max. Subject-effect curves Y_ij - Ybar_i are
/// resampled with replacement within each group (whole p-vector curves, so
/// cross-measure dependence is kept); each bootstrap group is centred on its
/// own bootstrap mean when the pooled covariance is recomputed, and the
/// statistic is evaluated on the residual sample, which satisfies the null.
inline BootstrapResult bootstrap_fmax(const GroupedSample& g,
                                      const ResamplingOptions& opt) {
  detail::require_testable(g);
  if (opt.replicates < 1) throw validation_error("need at least 1 replicate");
  if (g.n1() < 2 || g.n2() < 2) {
    throw validation_error("bootstrap needs at least 2 sessions per group");
  }
  if (static_cast<double>(opt.replicates) * static_cast<double>(g.n()) >
      opt.work_limit) {
    throw budget_error("budget exceeded: " +
                       std::to_string(opt.replicates) + " replicates x " +
                       std::to_string(g.n()) + " sessions");
  }
  const auto& grid = g.grid();
  const std::size_t p = g.dim();
  const Eigen::MatrixXd g1 = stack_curves(g.group1);
  const Eigen::MatrixXd g2 = stack_curves(g.group2);
  Eigen::MatrixXd all(g1.rows() + g2.rows(), g1.cols());
  all << g1, g2;
  const double scale = detail::data_scale(all);
  const Eigen::MatrixXd resid = detail::within_group_residuals(g1, g2);
  const auto weights = quadrature_weights(grid, opt.quadrature);

  std::vector<std::size_t> idx1(g.n1()), idx2(g.n2());
  std::iota(idx1.begin(), idx1.end(), 0);
  std::iota(idx2.begin(), idx2.end(), g.n1());
  const auto observed = detail::pointwise_split(all, idx1, idx2, p, grid, scale);

  BootstrapResult res;
  res.observed_f_max = observed[detail::argmax_first(observed)];
  res.observed_f_int = detail::weighted_sum(observed, weights);
  res.f_max_replicates.resize(opt.replicates);
  res.f_int_replicates.resize(opt.replicates);
  parallel_for(opt.replicates, opt.threads, [&](std::size_t b) {
    Rng rng = make_rng(opt.seed, "bootstrap", b);
    std::uniform_int_distribution<std::size_t> pick1(0, g.n1() - 1);
    std::uniform_int_distribution<std::size_t> pick2(g.n1(), g.n() - 1);
    std::vector<std::size_t> b1(g.n1()), b2(g.n2());
    for (auto& i : b1) i = pick1(rng);
    for (auto& i : b2) i = pick2(rng);
    try {
      const auto t = detail::pointwise_split(resid, b1, b2, p, grid, scale);
      res.f_max_replicates[b] = t[detail::argmax_first(t)];
      res.f_int_replicates[b] = detail::weighted_sum(t, weights);
    } catch (const Error& e) {
      // A resample of repeated rows can have zero spread with a nonzero
      // shift; its statistic is unbounded.
      if (e.kind() != ErrorKind::kDegenerate) throw;
      res.f_max_replicates[b] = std::numeric_limits<double>::infinity();
      res.f_int_replicates[b] = std::numeric_limits<double>::infinity();
    }
  });
  res.p_value = add_one_pvalue(res.observed_f_max, res.f_max_replicates);
  res.p_value_f_int = add_one_pvalue(res.observed_f_int, res.f_int_replicates);
  return res;
}

enum class Statistic { kFInt, kFMax };

struct PermutationResult {
  double observed = 0.0;
  double p_value = 1.0;
  std::vector<double> replicates;
};

/// Value of the chosen global statistic when the stacked rows are split
/// into the given index sets.
inline double split_statistic(const Eigen::MatrixXd& rows,
                              std::span<const std::size_t> g1,
                              std::span<const std::size_t> g2, std::size_t p,
                              const LagGrid& grid, Statistic stat,
                              Quadrature q, double scale_ref) {
  const auto t = detail::pointwise_split(rows, g1, g2, p, grid, scale_ref);
  if (stat == Statistic::kFMax) return t[detail::argmax_first(t)];
  return detail::weighted_sum(t, quadrature_weights(grid, q));
}

/// Label-permutation test: sessions are reassigned to groups uniformly at
/// random with n1 and n2 fixed, and the full statistic is recomputed.
inline PermutationResult permutation_test(const GroupedSample& g,
                                          Statistic stat,
                                          const ResamplingOptions& opt) {
  g.validate();
  if (g.n() < 4) throw validation_error("too few sessions");
  detail::require_testable(g);
  if (opt.replicates < 1) throw validation_error("need at least 1 replicate");
  if (static_cast<double>(opt.replicates) * static_cast<double>(g.n()) >
      opt.work_limit) {
    throw budget_error("budget exceeded: " +
                       std::to_string(opt.replicates) + " permutations x " +
                       std::to_string(g.n()) + " sessions");
  }
  const Eigen::MatrixXd g1 = stack_curves(g.group1);
  const Eigen::MatrixXd g2 = stack_curves(g.group2);
  Eigen::MatrixXd all(g1.rows() + g2.rows(), g1.cols());
  all << g1, g2;
  const double scale = detail::data_scale(all);
  const std::size_t n1 = g.n1();
  std::vector<std::size_t> order(g.n());
  std::iota(order.begin(), order.end(), 0);

  PermutationResult res;
  res.observed = split_statistic(
      all, std::span(order).first(n1), std::span(order).subspan(n1), g.dim(),
      g.grid(), stat, opt.quadrature, scale);
  res.replicates.resize(opt.replicates);
  parallel_for(opt.replicates, opt.threads, [&](std::size_t r) {
    Rng rng = make_rng(opt.seed, "permutation", r);
    std::vector<std::size_t> perm = order;
    std::shuffle(perm.begin(), perm.end(), rng);
    res.replicates[r] = split_statistic(
        all, std::span(perm).first(n1), std::span(perm).subspan(n1), g.dim(),
        g.grid(), stat, opt.quadrature, scale);
  });
  res.p_value = add_one_pvalue(res.observed, res.replicates);
  return res;
}

}  // namespace fccf
