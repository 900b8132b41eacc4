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
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fccf/ccf.hpp"
#include "fccf/error.hpp"
#include "fccf/funcsample.hpp"
#include "fccf/rng.hpp"

namespace fccf {

// ---------------------------------------------------------------------------
// Gaussian-process curve samples

/// Separable GP over (lag, measure): squared-exponential kernel in lag
/// (length scale, variance) times an equicorrelation matrix across measures.
struct GpSpec {
  LagGrid grid;
  std::vector<std::string> measures = {"velocity", "accel_signed"};
  Eigen::MatrixXd mean;  // p x M; empty means zero
  double length_scale = 0.25;
  double variance = 1.0;
  double cross_measure_corr = 0.0;

  std::size_t dim() const { return measures.size(); }
};

inline Eigen::MatrixXd squared_exponential(const LagGrid& grid,
                                           double length_scale,
                                           double variance) {
  const auto m = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index s = 0; s < m; ++s) {
    for (Eigen::Index t = 0; t < m; ++t) {
      const double d = (grid[s] - grid[t]) / length_scale;
      k(s, t) = variance * std::exp(-0.5 * d * d);
    }
  }
  return k;
}

/// Covariance of the lag-major flattened curve (index m*p + k).
inline Eigen::MatrixXd gp_covariance(const GpSpec& spec) {
  const auto p = static_cast<Eigen::Index>(spec.dim());
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(p, p, spec.cross_measure_corr);
  c.diagonal().setOnes();
  const Eigen::MatrixXd k =
      squared_exponential(spec.grid, spec.length_scale, spec.variance);
  return Eigen::kroneckerProduct(k, c).eval();
}

inline void validate(const GpSpec& spec) {
  if (spec.measures.empty()) throw validation_error("invalid kernel: no measures");
  if (!(spec.length_scale > 0.0) || !std::isfinite(spec.length_scale)) {
    throw validation_error("invalid kernel: length scale must be positive");
  }
  if (!(spec.variance >= 0.0) || !std::isfinite(spec.variance)) {
    throw validation_error("invalid kernel: variance must be nonnegative");
  }
  if (!(spec.cross_measure_corr > -1.0 && spec.cross_measure_corr < 1.0)) {
    throw validation_error("invalid kernel: cross-measure correlation must "
                           "lie in (-1, 1)");
  }
  const auto p = static_cast<Eigen::Index>(spec.dim());
  const auto m = static_cast<Eigen::Index>(spec.grid.size());
  if (spec.mean.size() != 0 && (spec.mean.rows() != p || spec.mean.cols() != m)) {
    throw validation_error("mean must be p x M");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gp_covariance(spec),
                                                     Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw validation_error("invalid kernel: covariance is not PSD");
  }
}

/// Draws curves from a validated GpSpec. The factor is computed once.
class GpSampler {
 public:
  explicit GpSampler(GpSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    const auto p = static_cast<Eigen::Index>(spec_.dim());
    const auto m = static_cast<Eigen::Index>(spec_.grid.size());
    if (spec_.mean.size() == 0) spec_.mean = Eigen::MatrixXd::Zero(p, m);
    Eigen::MatrixXd cov = gp_covariance(spec_);
    // Jitter is relative to the kernel scale so that variance 0 gives an
    // exactly zero factor.
    cov.diagonal().array() += 1e-10 * spec_.variance;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
      factor_ = eig.eigenvectors() *
                eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
  }

  const GpSpec& spec() const { return spec_; }

  /// Curve `index` of the stream identified by `seed`.
  MultiCurveSample draw(std::uint64_t seed, std::size_t index,
                        std::string session_id) const {
    Rng rng = make_rng(seed, "gp", index);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(factor_.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    MultiCurveSample s;
    s.session_id = std::move(session_id);
    s.grid = spec_.grid;
    s.measures = spec_.measures;
    s.curves = spec_.mean;
    if (spec_.variance > 0.0) {
      const Eigen::VectorXd noise = factor_ * z;
      s.curves += Eigen::Map<const Eigen::MatrixXd>(
          noise.data(), s.curves.rows(), s.curves.cols());
    }
    return s;
  }

 private:
  GpSpec spec_;
  Eigen::MatrixXd factor_;
};

inline std::vector<MultiCurveSample> simulate_gp_sample(const GpSpec& spec,
                                                        std::size_t n,
                                                        std::uint64_t seed) {
  const GpSampler sampler(spec);
  std::vector<MultiCurveSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(sampler.draw(seed, i, "s" + std::to_string(i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bivariate VAR(1)

/// X_t = A X_{t-1} + e_t, e_t ~ N(0, Sigma). Component 0 plays the role of
/// the first CCF argument, component 1 the second.
struct Var1Spec {
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
  std::size_t length = 1000;
  double sample_rate_hz = 1.0;
  std::optional<std::size_t> burn_in;  // default 10 / (1 - spectral radius)
};

inline double spectral_radius(const Eigen::Matrix2d& a) {
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

inline void validate(const Var1Spec& spec) {
  if (!(spectral_radius(spec.a) < 1.0)) throw validation_error("nonstationary");
  if (!spec.sigma.isApprox(spec.sigma.transpose())) {
    throw validation_error("innovation covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(spec.sigma);
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw validation_error("innovation covariance must be PSD");
  }
  if (!(spec.sample_rate_hz > 0.0)) {
    throw validation_error("sample rate must be positive");
  }
}

/// Stationary covariance: solves Gamma0 = A Gamma0 A^T + Sigma.
inline Eigen::Matrix2d lyapunov_covariance(const Eigen::Matrix2d& a,
                                           const Eigen::Matrix2d& sigma) {
  const Eigen::Matrix4d lhs =
      Eigen::Matrix4d::Identity() - Eigen::kroneckerProduct(a, a).eval();
  const Eigen::Vector4d rhs = Eigen::Map<const Eigen::Vector4d>(sigma.data());
  const Eigen::Vector4d vec = lhs.partialPivLu().solve(rhs);
  Eigen::Matrix2d g = Eigen::Map<const Eigen::Matrix2d>(vec.data());
  return 0.5 * (g + g.transpose());
}

/// Closed-form rho_12(l) = Cov{X0(t), X1(t+l)} / sqrt(var0 var1) on the grid,
/// from Gamma_l = A^l Gamma0 (l >= 0) and Gamma_{-l} = Gamma_l^T.
inline CcfCurve theoretical_var1_ccf(const Var1Spec& spec,
                                     const LagGrid& grid) {
  validate(spec);
  const Eigen::Matrix2d g0 = lyapunov_covariance(spec.a, spec.sigma);
  const auto lags = sample_lags(grid, spec.sample_rate_hz,
                                std::numeric_limits<std::size_t>::max() / 2);
  CcfCurve out{grid, std::vector<double>(grid.size(), 0.0)};
  const double denom = std::sqrt(g0(0, 0) * g0(1, 1));
  if (!(denom > 0.0)) throw degenerate_error("degenerate series");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto l = lags[i] < 0 ? -lags[i] : lags[i];
    Eigen::Matrix2d power = Eigen::Matrix2d::Identity();
    for (std::int64_t k = 0; k < l; ++k) power = spec.a * power;
    const Eigen::Matrix2d gl = power * g0;
    out.rho[i] = (lags[i] >= 0 ? gl(1, 0) : gl(0, 1)) / denom;
  }
  return out;
}

inline std::size_t default_burn_in(const Var1Spec& spec) {
  const double rho = spectral_radius(spec.a);
  return static_cast<std::size_t>(std::ceil(10.0 / (1.0 - rho)));
}

struct VarPath {
  std::vector<double> x;
  std::vector<double> y;
};

inline VarPath simulate_var1_path(const Var1Spec& spec, std::uint64_t seed) {
  validate(spec);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(spec.sigma);
  const Eigen::Matrix2d root =
      eig.eigenvectors() *
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const std::size_t burn = spec.burn_in.value_or(default_burn_in(spec));
  Rng rng = make_rng(seed, "var1", 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  VarPath path;
  path.x.reserve(spec.length);
  path.y.reserve(spec.length);
  Eigen::Vector2d state = Eigen::Vector2d::Zero();
  for (std::size_t t = 0; t < burn + spec.length; ++t) {
    const double z0 = normal(rng);
    const double z1 = normal(rng);
    state = spec.a * state + root * Eigen::Vector2d(z0, z1);
    if (t >= burn) {
      path.x.push_back(state[0]);
      path.y.push_back(state[1]);
    }
  }
  return path;
}

}  // namespace fccf
