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
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fccf/ccf.hpp"
#include "fccf/csv.hpp"
#include "fccf/error.hpp"
#include "fccf/funcsample.hpp"
#include "fccf/globaltests.hpp"
#include "fccf/ingest.hpp"
#include "fccf/rng.hpp"

namespace fccf {

// ---------------------------------------------------------------------------
// Dataset

/// Curves supplied directly instead of raw signals: header
/// `lag_seconds,<measure>...`, one row per lag.
struct PrecomputedCurves {
  std::vector<double> lags;
  std::map<std::string, std::vector<double>> columns;
};

struct DatasetSession {
  std::string id;
  double sample_rate_hz = 0.0;
  std::map<std::string, std::string> labels;
  std::optional<AlignedSignals> signals;
  std::optional<PrecomputedCurves> curves;
};

struct Dataset {
  std::vector<DatasetSession> sessions;

  const DatasetSession& find(const std::string& id) const {
    for (const auto& s : sessions) {
      if (s.id == id) return s;
    }
    throw validation_error("unknown session " + id);
  }
};

inline PrecomputedCurves parse_curve_table(const csv::Table& table,
                                           const std::string& source) {
  if (table.header.size() < 2 || table.header[0] != "lag_seconds") {
    throw validation_error(source + ": expected lag_seconds,<measure>...");
  }
  PrecomputedCurves pc;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    pc.columns[table.header[c]];
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto where = source + ":" + std::to_string(table.line_numbers[r]);
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const auto v = csv::parse_double(table.rows[r][c]);
      if (!v || !std::isfinite(*v)) {
        throw validation_error(where + ": unparseable " + table.header[c]);
      }
      if (c == 0) {
        pc.lags.push_back(*v);
      } else {
        pc.columns[table.header[c]].push_back(*v);
      }
    }
  }
  return pc;
}

inline Dataset load_dataset(const std::filesystem::path& manifest,
                            const TrimWindow& window = {}) {
  Dataset ds;
  for (auto& e : read_manifest(manifest)) {
    std::ifstream probe(e.file);
    if (!probe) throw io_error("cannot open " + e.file.string());
    std::string first;
    std::getline(probe, first);
    probe.close();
    DatasetSession s;
    s.id = e.session_id;
    s.sample_rate_hz = e.sample_rate_hz;
    s.labels = e.labels;
    if (csv::trim(first).starts_with("lag_seconds")) {
      s.curves = parse_curve_table(csv::read_table(e.file), e.file.string());
    } else {
      const auto raw = read_session_csv(e.file, e.session_id,
                                        e.sample_rate_hz, e.labels, window);
      s.signals = align_session(raw);
    }
    ds.sessions.push_back(std::move(s));
  }
  if (ds.sessions.empty()) throw validation_error("manifest lists no sessions");
  return ds;
}

/// CCF of dopamine against one measure for a session.
inline CcfCurve session_curve(const DatasetSession& s, const std::string& measure,
                              const LagGrid& grid,
                              CovDivisor div = CovDivisor::kSeriesLength) {
  if (s.signals) {
    const auto m = parse_measure(measure);
    if (!m) throw validation_error("unknown measure " + measure);
    try {
      return ccf_curve(s.signals->dopamine, s.signals->get(*m), grid,
                       s.sample_rate_hz, div);
    } catch (const Error& e) {
      throw Error(e.kind(), "session " + s.id + ", " + measure + ": " + e.what());
    }
  }
  const auto& pc = *s.curves;
  auto it = pc.columns.find(measure);
  if (it == pc.columns.end() && pc.columns.size() == 1 &&
      pc.columns.begin()->first == "rho") {
    it = pc.columns.begin();
  }
  if (it == pc.columns.end()) {
    throw validation_error("session " + s.id + ": no curve for measure " +
                           measure);
  }
  if (pc.lags.size() != grid.size()) {
    throw validation_error("session " + s.id +
                           ": precomputed curve grid does not match");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(pc.lags[i] - grid[i]) > 1e-9) {
      throw validation_error("session " + s.id +
                             ": precomputed curve grid does not match");
    }
  }
  return CcfCurve{grid, it->second};
}

inline MultiCurveSample session_sample(const DatasetSession& s,
                                       const std::vector<std::string>& measures,
                                       const LagGrid& grid,
                                       CovDivisor div = CovDivisor::kSeriesLength) {
  MultiCurveSample out;
  out.session_id = s.id;
  out.grid = grid;
  out.measures = measures;
  out.curves.resize(static_cast<Eigen::Index>(measures.size()),
                    static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < measures.size(); ++k) {
    const auto c = session_curve(s, measures[k], grid, div);
    for (std::size_t m = 0; m < grid.size(); ++m) {
      out.curves(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) =
          c.rho[m];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factor queries
//
//   factor=level vs level
//   factor=level vs rest
//   ... | stratum=level

struct FactorQuery {
  std::string factor;
  std::string level1;
  std::optional<std::string> level2;  // nullopt means "rest"
  std::optional<std::pair<std::string, std::string>> stratum;

  std::string label() const {
    std::string s = factor + "=" + level1 + " vs " + level2.value_or("rest");
    if (stratum) s += " | " + stratum->first + "=" + stratum->second;
    return s;
  }
};

inline FactorQuery parse_query(std::string_view text) {
  const auto fail = [&](const std::string& why) {
    return validation_error("bad comparison '" + std::string(text) +
                            "': " + why);
  };
  FactorQuery q;
  std::string_view main = text;
  if (const auto bar = text.find('|'); bar != std::string_view::npos) {
    main = text.substr(0, bar);
    const auto strat = csv::trim(text.substr(bar + 1));
    const auto eq = strat.find('=');
    if (eq == std::string_view::npos) throw fail("stratum needs factor=level");
    const auto f = csv::trim(strat.substr(0, eq));
    const auto l = csv::trim(strat.substr(eq + 1));
    if (f.empty() || l.empty()) throw fail("stratum needs factor=level");
    q.stratum = std::make_pair(std::string(f), std::string(l));
  }
  const auto eq = main.find('=');
  if (eq == std::string_view::npos) throw fail("expected factor=level vs level");
  q.factor = std::string(csv::trim(main.substr(0, eq)));
  const auto rhs = main.substr(eq + 1);
  const auto vs = rhs.find(" vs ");
  if (vs == std::string_view::npos) throw fail("missing ' vs '");
  q.level1 = std::string(csv::trim(rhs.substr(0, vs)));
  const auto other = csv::trim(rhs.substr(vs + 4));
  if (q.factor.empty() || q.level1.empty() || other.empty()) {
    throw fail("empty factor or level");
  }
  if (other != "rest") q.level2 = std::string(other);
  return q;
}

struct Split {
  std::vector<std::size_t> group1;
  std::vector<std::size_t> group2;
};

inline Split resolve_query(const FactorQuery& q, const Dataset& ds) {
  const auto label_of = [&](const DatasetSession& s,
                            const std::string& factor) -> const std::string& {
    const auto it = s.labels.find(factor);
    if (it == s.labels.end()) {
      throw validation_error("session " + s.id + " has no factor " + factor);
    }
    return it->second;
  };
  if (q.level2 && *q.level2 == q.level1) {
    throw validation_error(q.label() + ": both sides select the same sessions");
  }
  Split split;
  for (std::size_t i = 0; i < ds.sessions.size(); ++i) {
    const auto& s = ds.sessions[i];
    if (q.stratum && label_of(s, q.stratum->first) != q.stratum->second) {
      continue;
    }
    const auto& level = label_of(s, q.factor);
    if (level == q.level1) {
      split.group1.push_back(i);
    } else if (!q.level2 || level == *q.level2) {
      split.group2.push_back(i);
    }
  }
  if (split.group1.empty() || split.group2.empty()) {
    throw validation_error(q.label() + ": a side selects no sessions");
  }
  return split;
}

// ---------------------------------------------------------------------------
// Comparison

struct Comparison {
  FactorQuery query;
  std::vector<std::string> measures;
};

struct AnalysisOptions {
  LagGrid grid;
  CovDivisor divisor = CovDivisor::kSeriesLength;
  Quadrature quadrature = Quadrature::kTrapezoid;
  WsMoments ws_moments = WsMoments::kFiniteSample;
  double alpha = 0.05;
  std::size_t bootstrap = 1000;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double work_limit = 1e9;
  std::size_t min_group_size = 3;
  double homogeneity_warn_ratio = 4.0;
};

struct PermutationSummary {
  std::size_t replicates = 0;
  double p_int = 1.0;
  double p_max = 1.0;
};

struct TestReport {
  std::string comparison;
  std::vector<std::string> measures;
  std::vector<std::string> group1_sessions;
  std::vector<std::string> group2_sessions;
  double f_int = 0.0;
  double p_int = 1.0;
  double f_max = 0.0;
  double p_max = 1.0;
  double arg_max_lag = 0.0;
  PointwiseCurve pointwise;
  std::optional<WsCalibration> calibration;  // nullopt if covariance is zero
  WsMoments ws_moments = WsMoments::kFiniteSample;
  double calibration_factor = 1.0;
  double p_int_bootstrap = 1.0;
  std::size_t bootstrap_B = 0;
  std::optional<PermutationSummary> permutation;
  std::uint64_t seed = 0;
  Quadrature quadrature = Quadrature::kTrapezoid;
  double alpha = 0.05;
};

struct ComparisonOutcome {
  TestReport report;
  std::vector<std::string> warnings;
};

/// Tests on an already assembled grouped sample. `seed` is used as given.
inline ComparisonOutcome test_grouped(const GroupedSample& g,
                                      const std::string& label,
                                      const AnalysisOptions& opt,
                                      std::uint64_t seed) {
  ComparisonOutcome out;
  auto& r = out.report;
  r.comparison = label;
  r.measures = g.measures();
  for (const auto& s : g.group1) r.group1_sessions.push_back(s.session_id);
  for (const auto& s : g.group2) r.group2_sessions.push_back(s.session_id);
  r.seed = opt.seed;
  r.quadrature = opt.quadrature;
  r.alpha = opt.alpha;
  r.bootstrap_B = opt.bootstrap;

  const auto cov = pooled_covariance(g);
  r.pointwise = hotelling_pointwise(g, cov);
  r.f_int = f_int(r.pointwise, opt.quadrature);
  const auto mx = f_max(r.pointwise);
  r.f_max = mx.value;
  r.arg_max_lag = mx.arg_lag;

  r.ws_moments = opt.ws_moments;
  if (opt.ws_moments == WsMoments::kFiniteSample) {
    if (g.n() > g.dim() + 3) {
      r.calibration_factor = finite_sample_factor(g.n(), g.dim());
    } else {
      r.ws_moments = WsMoments::kAsymptotic;
      out.warnings.push_back(label + ": too few sessions for the finite-sample "
                             "F_int calibration; using asymptotic moments");
    }
  }
  try {
    r.calibration = scale_calibration(
        ws_calibrate(cov, g.grid(), opt.quadrature), r.calibration_factor);
    r.p_int = ws_pvalue(r.f_int, *r.calibration);
  } catch (const Error& e) {
    // A zero covariance is only acceptable when the means coincide too.
    if (e.kind() != ErrorKind::kDegenerate || r.f_int != 0.0) throw;
    r.p_int = 1.0;
    out.warnings.push_back(label + ": covariance is zero; F_int p-value set to 1");
  }

  ResamplingOptions ro;
  ro.replicates = opt.bootstrap;
  ro.seed = seed;
  ro.threads = opt.threads;
  ro.quadrature = opt.quadrature;
  ro.work_limit = opt.work_limit;
  const auto boot = bootstrap_fmax(g, ro);
  r.p_max = boot.p_value;
  r.p_int_bootstrap = boot.p_value_f_int;

  if (opt.permutations > 0) {
    ro.replicates = opt.permutations;
    ro.seed = derive_seed(seed, "permutation", 0);
    PermutationSummary ps;
    ps.replicates = opt.permutations;
    ps.p_int = permutation_test(g, Statistic::kFInt, ro).p_value;
    ps.p_max = permutation_test(g, Statistic::kFMax, ro).p_value;
    r.permutation = ps;
  }

  const double ratio = covariance_trace_ratio(g);
  if (ratio > opt.homogeneity_warn_ratio) {
    out.warnings.push_back(label + ": group covariance traces differ by a "
                           "factor of " + csv::format_double(ratio) +
                           "; the common-covariance model may not hold");
  }
  return out;
}

inline std::uint64_t comparison_seed(std::uint64_t root, const Comparison& c) {
  std::string key = c.query.label() + " @";
  for (const auto& m : c.measures) key += " " + m;
  return derive_seed(root, key, 0);
}

inline std::string measures_label(const std::vector<std::string>& measures) {
  std::string s;
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (i) s += '+';
    s += measures[i];
  }
  return s;
}

/// Full pipeline for one comparison: resolve groups, estimate curves, test.
inline ComparisonOutcome run_comparison(const Dataset& ds, const Comparison& c,
                                        const AnalysisOptions& opt) {
  if (c.measures.empty()) throw validation_error("no measures selected");
  const auto split = resolve_query(c.query, ds);
  if (split.group1.size() < opt.min_group_size ||
      split.group2.size() < opt.min_group_size) {
    throw validation_error(
        c.query.label() + ": underpowered comparison (" +
        std::to_string(split.group1.size()) + " vs " +
        std::to_string(split.group2.size()) + " sessions, need at least " +
        std::to_string(opt.min_group_size) + " per group)");
  }
  GroupedSample g;
  for (auto i : split.group1) {
    g.group1.push_back(session_sample(ds.sessions[i], c.measures, opt.grid,
                                      opt.divisor));
  }
  for (auto i : split.group2) {
    g.group2.push_back(session_sample(ds.sessions[i], c.measures, opt.grid,
                                      opt.divisor));
  }
  return test_grouped(g, c.query.label(), opt, comparison_seed(opt.seed, c));
}

}  // namespace fccf
