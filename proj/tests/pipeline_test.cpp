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
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fccf/pipeline.hpp"
#include "fccf/report.hpp"
#include "fccf/scenario.hpp"
#include "test_util.hpp"

namespace fccf {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fccf_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset labelled(const std::vector<std::pair<std::string, std::string>>& rs) {
  Dataset ds;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    DatasetSession s;
    s.id = "s" + std::to_string(i);
    s.labels = {{"region", rs[i].first}, {"sex", rs[i].second}};
    ds.sessions.push_back(s);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Queries

TEST(Query, ParseForms) {
  const auto a = parse_query("region=NAc vs DMS");
  EXPECT_EQ(a.factor, "region");
  EXPECT_EQ(a.level1, "NAc");
  EXPECT_EQ(a.level2, "DMS");
  EXPECT_FALSE(a.stratum);
  EXPECT_EQ(a.label(), "region=NAc vs DMS");

  const auto b = parse_query(" region = NAc vs rest | sex = F ");
  EXPECT_FALSE(b.level2);
  ASSERT_TRUE(b.stratum);
  EXPECT_EQ(b.stratum->first, "sex");
  EXPECT_EQ(b.stratum->second, "F");
  EXPECT_EQ(b.label(), "region=NAc vs rest | sex=F");
}

TEST(Query, ParseErrors) {
  for (const char* bad : {"region NAc vs DMS", "region=NAc DMS", "=a vs b",
                          "region=NAc vs ", "region=a vs b | sex"}) {
    EXPECT_THROW(parse_query(bad), Error) << bad;
  }
}

TEST(Query, ResolveLevelsRestAndStratum) {
  const auto ds = labelled({{"NAc", "F"}, {"DMS", "F"}, {"DLS", "M"},
                            {"NAc", "M"}, {"DMS", "M"}, {"NAc", "F"}});
  auto s = resolve_query(parse_query("region=NAc vs DMS"), ds);
  EXPECT_EQ(s.group1, (std::vector<std::size_t>{0, 3, 5}));
  EXPECT_EQ(s.group2, (std::vector<std::size_t>{1, 4}));
  s = resolve_query(parse_query("region=NAc vs rest"), ds);
  EXPECT_EQ(s.group2, (std::vector<std::size_t>{1, 2, 4}));
  s = resolve_query(parse_query("region=NAc vs rest | sex=F"), ds);
  EXPECT_EQ(s.group1, (std::vector<std::size_t>{0, 5}));
  EXPECT_EQ(s.group2, (std::vector<std::size_t>{1}));
}

TEST(Query, ResolveErrors) {
  const auto ds = labelled({{"NAc", "F"}, {"DMS", "F"}});
  EXPECT_THROW(resolve_query(parse_query("region=NAc vs NAc"), ds), Error);
  EXPECT_THROW(resolve_query(parse_query("region=NAc vs VTA"), ds), Error);
  EXPECT_THROW(resolve_query(parse_query("depth=1 vs 2"), ds), Error);
}

// ---------------------------------------------------------------------------
// Dataset loading

constexpr const char* kCurveScenario = R"({
  "seed": 11,
  "grid": {"a": -1, "b": 1, "m": 21},
  "measures": ["velocity", "accel_signed"],
  "kernel": {"length_scale": 0.25, "variance": 0.04, "cross_measure_corr": 0.3},
  "groups": [
    {"name": "nac", "n": 12, "labels": {"region": "NAc"}, "mean": 0.5},
    {"name": "dms", "n": 12, "labels": {"region": "DMS"}},
    {"name": "dls", "n": 2, "labels": {"region": "DLS"}}
  ]
})";

TEST(Dataset, CurveFilesRoundTrip) {
  const auto dir = fresh_dir("roundtrip");
  const auto sc = parse_scenario(nlohmann::json::parse(kCurveScenario));
  write_scenario_dataset(sc, dir);
  const auto ds = load_dataset(dir / "manifest.csv");
  ASSERT_EQ(ds.sessions.size(), 26u);
  const GpSampler sampler(sc.groups[1].gp);
  const auto expect = sampler.draw(derive_seed(11, "group", 1), 4, "dms_004");
  const auto got = session_sample(ds.find("dms_004"), sc.measures, sc.grid);
  EXPECT_EQ(got.session_id, "dms_004");
  EXPECT_LT((got.curves - expect.curves).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(ds.find("dms_004").labels.at("region"), "DMS");
}

TEST(Dataset, CurveGridMismatchIsRejected) {
  const auto dir = fresh_dir("mismatch");
  write_scenario_dataset(parse_scenario(nlohmann::json::parse(kCurveScenario)),
                         dir);
  const auto ds = load_dataset(dir / "manifest.csv");
  EXPECT_THROW(session_sample(ds.sessions[0], {"velocity"}, LagGrid()), Error);
  EXPECT_THROW(session_sample(ds.sessions[0], {"position"}, LagGrid(-1, 1, 21)),
               Error);
}

TEST(Dataset, RawSessionsGiveCcfCurves) {
  const auto dir = fresh_dir("raw");
  const auto sc = parse_scenario(nlohmann::json::parse(R"({
    "seed": 3, "mode": "paths", "sample_rate_hz": 20, "length": 4000,
    "grid": {"a": -0.5, "b": 0.5, "m": 11},
    "groups": [{"name": "a", "n": 2, "labels": {"g": "x"},
                "var1": {"a": [[0.3, 0], [0.4, 0.2]]}}]
  })"));
  write_scenario_dataset(sc, dir);
  const auto ds = load_dataset(dir / "manifest.csv");
  const auto& s = ds.sessions[0];
  ASSERT_TRUE(s.signals);
  const auto self = session_curve(s, "dopamine", sc.grid);
  EXPECT_NEAR(self.rho[5], 1.0, 1e-12);
  const auto vel = session_curve(s, "velocity", sc.grid);
  for (double r : vel.rho) EXPECT_LE(std::abs(r), 1.0 + 1e-12);
}

// ---------------------------------------------------------------------------
// Comparisons

AnalysisOptions quick_options(const LagGrid& grid) {
  AnalysisOptions opt;
  opt.grid = grid;
  opt.bootstrap = 199;
  opt.seed = 5;
  return opt;
}

TEST(Comparison, InjectedEffectIsDetected) {
  const auto dir = fresh_dir("effect");
  const auto sc = parse_scenario(nlohmann::json::parse(kCurveScenario));
  write_scenario_dataset(sc, dir);
  const auto ds = load_dataset(dir / "manifest.csv");
  const Comparison c{parse_query("region=NAc vs DMS"), sc.measures};
  const auto out = run_comparison(ds, c, quick_options(sc.grid));
  const auto& r = out.report;
  EXPECT_LT(r.p_int, 0.01);
  EXPECT_LT(r.p_max, 0.01);
  EXPECT_EQ(r.group1_sessions.size(), 12u);
  EXPECT_EQ(r.group2_sessions.size(), 12u);
  EXPECT_EQ(r.comparison, "region=NAc vs DMS");
}

TEST(Comparison, UnderpoweredGroupIsRejected) {
  const auto dir = fresh_dir("underpowered");
  const auto sc = parse_scenario(nlohmann::json::parse(kCurveScenario));
  write_scenario_dataset(sc, dir);
  const auto ds = load_dataset(dir / "manifest.csv");
  const Comparison c{parse_query("region=DLS vs NAc"), sc.measures};
  try {
    run_comparison(ds, c, quick_options(sc.grid));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("underpowered comparison"),
              std::string::npos);
  }
}

TEST(Comparison, ReportInvariants) {
  const auto g = testing::random_grouped(2, 9, 7, LagGrid(), 21, 0.2);
  auto opt = quick_options(g.grid());
  opt.permutations = 99;
  const auto r = test_grouped(g, "x", opt, 77).report;
  const auto& pw = r.pointwise;
  ASSERT_EQ(pw.t_values.size(), 41u);
  for (double t : pw.t_values) EXPECT_GE(t, 0.0);
  EXPECT_EQ(r.f_max, *std::max_element(pw.t_values.begin(), pw.t_values.end()));
  EXPECT_LE(r.f_int, 2.0 * r.f_max);
  for (double p : {r.p_int, r.p_max, r.p_int_bootstrap, r.permutation->p_int,
                   r.permutation->p_max}) {
    EXPECT_GT(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_EQ(r.ws_moments, WsMoments::kFiniteSample);
  EXPECT_DOUBLE_EQ(r.calibration_factor, finite_sample_factor(16, 2));
  ASSERT_TRUE(r.calibration);
  EXPECT_NEAR(r.p_int, ws_pvalue(r.f_int, *r.calibration), 0.0);
}

TEST(Comparison, SmallSampleFallsBackToAsymptoticMoments) {
  const auto g = testing::random_grouped(2, 3, 2, LagGrid(), 22);
  const auto out = test_grouped(g, "small", quick_options(g.grid()), 1);
  EXPECT_EQ(out.report.ws_moments, WsMoments::kAsymptotic);
  EXPECT_EQ(out.report.calibration_factor, 1.0);
  EXPECT_FALSE(out.warnings.empty());
}

TEST(Comparison, HeterogeneousGroupsWarn) {
  auto g = testing::random_grouped(2, 8, 8, LagGrid(), 23);
  for (auto& s : g.group1) s.curves *= 4.0;
  const auto out = test_grouped(g, "het", quick_options(g.grid()), 1);
  bool warned = false;
  for (const auto& w : out.warnings) {
    warned |= w.find("common-covariance") != std::string::npos;
  }
  EXPECT_TRUE(warned);
}

TEST(Comparison, SeedDependsOnLabelAndMeasures) {
  const Comparison a{parse_query("r=x vs y"), {"velocity"}};
  const Comparison b{parse_query("r=x vs y"), {"position"}};
  const Comparison c{parse_query("r=x vs rest"), {"velocity"}};
  EXPECT_EQ(comparison_seed(1, a), comparison_seed(1, a));
  EXPECT_NE(comparison_seed(1, a), comparison_seed(1, b));
  EXPECT_NE(comparison_seed(1, a), comparison_seed(1, c));
  EXPECT_NE(comparison_seed(1, a), comparison_seed(2, a));
}

// ---------------------------------------------------------------------------
// Report serialization

TEST(Report, JsonFieldsAndCsv) {
  const auto g = testing::random_grouped(2, 6, 6, LagGrid(-1, 1, 5), 24, 0.1);
  const auto r = test_grouped(g, "r=x vs y", quick_options(g.grid()), 3).report;
  const auto j = nlohmann::json::parse(to_json_text(r));
  for (const char* key :
       {"comparison", "measures", "n1", "n2", "f_int", "p_int", "f_max",
        "p_max", "arg_max_lag", "calibration", "bootstrap_B", "seed",
        "pointwise"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["n1"], 6);
  EXPECT_EQ(j["pointwise"]["t_n"].size(), 5u);
  EXPECT_EQ(j["f_max"].get<double>(), r.f_max);
  EXPECT_TRUE(j["permutation"].is_null());

  const auto table = results_csv({r, r});
  EXPECT_EQ(table.rfind(kResultsHeader, 0), 0u);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_EQ(pointwise_csv(r.pointwise).substr(0, 18), "lag_seconds,t_n\n-1");
  EXPECT_EQ(slugify("region=NAc vs rest | sex=F"), "region_nac_vs_rest_sex_f");
}

}  // namespace
}  // namespace fccf
