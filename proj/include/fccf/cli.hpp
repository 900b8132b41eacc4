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

#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fccf/error.hpp"
#include "fccf/ingest.hpp"
#include "fccf/pipeline.hpp"
#include "fccf/report.hpp"
#include "fccf/scenario.hpp"

namespace fccf::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIoFailure = 2,
  kValidationFailure = 3,
  kDegenerateFailure = 4,
  kBudgetFailure = 5,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return kIoFailure;
    case ErrorKind::kValidation: return kValidationFailure;
    case ErrorKind::kDegenerate: return kDegenerateFailure;
    case ErrorKind::kBudget: return kBudgetFailure;
  }
  return kUsage;
}

inline constexpr const char* kOutDirEnv = "FCCF_OUT_DIR";

inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "fccf_out";
}

struct ComparisonSpec {
  std::string query;
  std::vector<std::string> measures;  // empty: use RunConfig::measures
};

struct RunConfig {
  std::filesystem::path manifest;
  TrimWindow window;
  double lag_min = -1.0;
  double lag_max = 1.0;
  std::size_t grid_size = 41;
  std::vector<std::string> measures = {"velocity", "accel_signed"};
  std::vector<ComparisonSpec> comparisons;
  double alpha = 0.05;
  std::size_t bootstrap = 1000;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
  Quadrature quadrature = Quadrature::kTrapezoid;
  WsMoments ws_moments = WsMoments::kFiniteSample;
  CovDivisor divisor = CovDivisor::kSeriesLength;
  std::filesystem::path out_dir = default_out_dir();
  unsigned threads = 1;
  double work_limit = 1e9;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw validation_error("alpha must lie in (0, 1)");
    }
    if (bootstrap < 1) throw validation_error("bootstrap must be >= 1");
    if (measures.empty()) throw validation_error("no measures");
  }

  LagGrid grid() const { return LagGrid(lag_min, lag_max, grid_size); }
};

inline Quadrature parse_quadrature(const std::string& s) {
  if (s == "trapezoid") return Quadrature::kTrapezoid;
  if (s == "riemann") return Quadrature::kRiemann;
  throw validation_error("quadrature must be 'trapezoid' or 'riemann'");
}

inline WsMoments parse_ws_moments(const std::string& s) {
  if (s == "finite_sample") return WsMoments::kFiniteSample;
  if (s == "asymptotic") return WsMoments::kAsymptotic;
  throw validation_error("ws_moments must be 'finite_sample' or 'asymptotic'");
}

inline CovDivisor parse_divisor(const std::string& s) {
  if (s == "series") return CovDivisor::kSeriesLength;
  if (s == "overlap") return CovDivisor::kOverlap;
  throw validation_error("divisor must be 'series' or 'overlap'");
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& f : csv::split(s)) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

/// Applies a JSON config object on top of `cfg`. Keys mirror the CLI flags.
inline void apply_config_json(const nlohmann::json& j, RunConfig& cfg,
                              const std::filesystem::path& base) {
  if (!j.is_object()) throw validation_error("config: expected an object");
  try {
    if (j.contains("manifest")) {
      std::filesystem::path m = j["manifest"].get<std::string>();
      cfg.manifest = m.is_relative() ? base / m : m;
    }
    if (j.contains("lag_min")) cfg.lag_min = j["lag_min"].get<double>();
    if (j.contains("lag_max")) cfg.lag_max = j["lag_max"].get<double>();
    if (j.contains("grid_size")) cfg.grid_size = j["grid_size"].get<std::size_t>();
    if (j.contains("measures")) {
      cfg.measures = j["measures"].get<std::vector<std::string>>();
    }
    if (j.contains("comparisons")) {
      cfg.comparisons.clear();
      for (const auto& c : j["comparisons"]) {
        if (c.is_string()) {
          cfg.comparisons.push_back({c.get<std::string>(), {}});
        } else {
          ComparisonSpec spec{c.at("query").get<std::string>(), {}};
          if (c.contains("measures")) {
            spec.measures = c["measures"].get<std::vector<std::string>>();
          }
          cfg.comparisons.push_back(std::move(spec));
        }
      }
    }
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("bootstrap")) cfg.bootstrap = j["bootstrap"].get<std::size_t>();
    if (j.contains("permutations")) {
      cfg.permutations = j["permutations"].get<std::size_t>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("quadrature")) {
      cfg.quadrature = parse_quadrature(j["quadrature"].get<std::string>());
    }
    if (j.contains("ws_moments")) {
      cfg.ws_moments = parse_ws_moments(j["ws_moments"].get<std::string>());
    }
    if (j.contains("divisor")) {
      cfg.divisor = parse_divisor(j["divisor"].get<std::string>());
    }
    if (j.contains("out")) {
      std::filesystem::path o = j["out"].get<std::string>();
      cfg.out_dir = o.is_relative() ? base / o : o;
    }
    if (j.contains("threads")) cfg.threads = j["threads"].get<unsigned>();
    if (j.contains("work_limit")) cfg.work_limit = j["work_limit"].get<double>();
    if (j.contains("window")) {
      const auto& w = j["window"];
      if (w.contains("start")) cfg.window.start = w["start"].get<double>();
      if (w.contains("end")) cfg.window.end = w["end"].get<double>();
      if (w.contains("last_seconds")) {
        cfg.window.last_seconds = w["last_seconds"].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("config: ") + e.what());
  }
}

inline void load_config_file(const std::filesystem::path& path,
                             RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("config: " + path.string() + ": " + e.what());
  }
  apply_config_json(j, cfg,
                    path.has_parent_path() ? path.parent_path() : ".");
}

inline AnalysisOptions analysis_options(const RunConfig& cfg) {
  AnalysisOptions opt;
  opt.grid = cfg.grid();
  opt.divisor = cfg.divisor;
  opt.quadrature = cfg.quadrature;
  opt.ws_moments = cfg.ws_moments;
  opt.alpha = cfg.alpha;
  opt.bootstrap = cfg.bootstrap;
  opt.permutations = cfg.permutations;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.work_limit = cfg.work_limit;
  return opt;
}

/// Runs every comparison and writes, under cfg.out_dir:
///   results.csv                 one row per comparison
///   NN_<slug>.json              full report
///   NN_<slug>_pointwise.csv     lag_seconds,t_n
inline int cmd_test(const RunConfig& cfg, std::ostream& err = std::cerr) {
  try {
    if (cfg.comparisons.empty()) {
      err << "error: nothing to do (no comparisons given)\n";
      return kUsage;
    }
    cfg.validate();
    const auto opt = analysis_options(cfg);
    const auto ds = load_dataset(cfg.manifest, cfg.window);
    std::vector<TestReport> reports;
    for (std::size_t i = 0; i < cfg.comparisons.size(); ++i) {
      const auto& spec = cfg.comparisons[i];
      Comparison c{parse_query(spec.query),
                   spec.measures.empty() ? cfg.measures : spec.measures};
      auto outcome = run_comparison(ds, c, opt);
      for (const auto& w : outcome.warnings) err << "warning: " << w << "\n";
      char prefix[16];
      std::snprintf(prefix, sizeof(prefix), "%02zu_", i + 1);
      const auto stem = std::string(prefix) +
                        slugify(c.query.label() + " " + measures_label(c.measures));
      csv::write_file(cfg.out_dir / (stem + ".json"),
                      to_json_text(outcome.report));
      csv::write_file(cfg.out_dir / (stem + "_pointwise.csv"),
                      pointwise_csv(outcome.report.pointwise));
      reports.push_back(std::move(outcome.report));
    }
    csv::write_file(cfg.out_dir / "results.csv", results_csv(reports));
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}

inline int cmd_simulate(const std::filesystem::path& scenario,
                        const std::filesystem::path& out_dir,
                        std::ostream& err = std::cerr) {
  try {
    const auto sc = read_scenario(scenario);
    write_scenario_dataset(sc, out_dir);
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}

struct CcfRequest {
  std::filesystem::path manifest;
  std::string session;
  std::string measure = "velocity";
  std::filesystem::path out;
  double lag_min = -1.0;
  double lag_max = 1.0;
  std::size_t grid_size = 41;
  CovDivisor divisor = CovDivisor::kSeriesLength;
  TrimWindow window;
};

/// Writes the dopamine-vs-measure correlogram of one session.
inline int cmd_ccf(const CcfRequest& req, std::ostream& err = std::cerr) {
  try {
    const auto ds = load_dataset(req.manifest, req.window);
    const auto& s = ds.find(req.session);
    const auto curve =
        session_curve(s, req.measure,
                      LagGrid(req.lag_min, req.lag_max, req.grid_size),
                      req.divisor);
    csv::write_file(req.out, write_curve_csv(curve));
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}

}  // namespace fccf::cli
