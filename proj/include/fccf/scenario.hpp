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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fccf/ccf.hpp"
#include "fccf/csv.hpp"
#include "fccf/error.hpp"
#include "fccf/ingest.hpp"
#include "fccf/simulate.hpp"

namespace fccf {

// Simulation scenario, read from JSON:
//
// {
//   "seed": 7,
//   "mode": "curves",                 // or "paths"
//   "grid": {"a": -1, "b": 1, "m": 41},
//   "measures": ["velocity", "accel_signed"],
//   "sample_rate_hz": 20,
//   "kernel": {"length_scale": 0.25, "variance": 0.01, "cross_measure_corr": 0.3},
//   "groups": [
//     {"name": "nac", "n": 12, "labels": {"region": "NAc", "sex": "F"},
//      "mean": 0.1},
//     ...
//   ]
// }
//
// In "curves" mode each session is a GP draw written as a precomputed curve
// file. "mean" is a number, a p x M nested array, or
// {"offset": c, "bump": {"height": h, "center": h0, "width": w}}; a group
// may override "kernel". In "paths" mode each group carries
// "var1": {"a": [[..],[..]], "sigma": [[..],[..]]} and "length"; component
// 0 is written as dopamine and component 1 is integrated into position so
// that the derived velocity reproduces it.

enum class ScenarioMode { kCurves, kPaths };

struct ScenarioGroup {
  std::string name;
  std::size_t n = 0;
  std::map<std::string, std::string> labels;
  GpSpec gp;
  Var1Spec var1;
};

struct Scenario {
  ScenarioMode mode = ScenarioMode::kCurves;
  std::uint64_t seed = 0;
  LagGrid grid;
  std::vector<std::string> measures = {"velocity", "accel_signed"};
  double sample_rate_hz = 20.0;
  std::vector<ScenarioGroup> groups;
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void schema_fail(const std::string& where,
                                     const std::string& why) {
  throw validation_error("scenario: " + where + ": " + why);
}

inline double get_number(const json& j, const std::string& key,
                         const std::string& where, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) schema_fail(where + "." + key, "expected a number");
  return j[key].get<double>();
}

inline std::size_t get_count(const json& j, const std::string& key,
                             const std::string& where,
                             std::optional<std::size_t> fallback) {
  if (!j.contains(key)) {
    if (!fallback) schema_fail(where + "." + key, "required");
    return *fallback;
  }
  if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 1) {
    schema_fail(where + "." + key, "expected a positive integer");
  }
  return j[key].get<std::size_t>();
}

inline Eigen::Matrix2d get_matrix2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_array() || !j[1].is_array() ||
      j[0].size() != 2 || j[1].size() != 2) {
    schema_fail(where, "expected a 2x2 nested array");
  }
  Eigen::Matrix2d m;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      if (!j[r][c].is_number()) schema_fail(where, "expected numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

inline void read_kernel(const json& j, const std::string& where, GpSpec& gp) {
  if (!j.is_object()) schema_fail(where, "expected an object");
  gp.length_scale = get_number(j, "length_scale", where, gp.length_scale);
  gp.variance = get_number(j, "variance", where, gp.variance);
  gp.cross_measure_corr =
      get_number(j, "cross_measure_corr", where, gp.cross_measure_corr);
}

inline Eigen::MatrixXd read_mean(const json& j, const std::string& where,
                                 const LagGrid& grid, std::size_t p) {
  const auto rows = static_cast<Eigen::Index>(p);
  const auto cols = static_cast<Eigen::Index>(grid.size());
  if (j.is_number()) return Eigen::MatrixXd::Constant(rows, cols, j.get<double>());
  if (j.is_array()) {
    if (j.size() != p) schema_fail(where, "expected p rows");
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t k = 0; k < p; ++k) {
      if (!j[k].is_array() || j[k].size() != grid.size()) {
        schema_fail(where, "each row needs M values");
      }
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!j[k][i].is_number()) schema_fail(where, "expected numbers");
        m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
            j[k][i].get<double>();
      }
    }
    return m;
  }
  if (j.is_object()) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(
        rows, cols, get_number(j, "offset", where, 0.0));
    if (j.contains("bump")) {
      const auto& b = j["bump"];
      const auto bw = where + ".bump";
      if (!b.is_object()) schema_fail(bw, "expected an object");
      const double height = get_number(b, "height", bw, 0.0);
      const double center = get_number(b, "center", bw, 0.0);
      const double width = get_number(b, "width", bw, 0.1);
      if (!(width > 0.0)) schema_fail(bw + ".width", "must be positive");
      for (Eigen::Index i = 0; i < cols; ++i) {
        const double z = (grid[static_cast<std::size_t>(i)] - center) / width;
        m.col(i).array() += height * std::exp(-0.5 * z * z);
      }
    }
    return m;
  }
  schema_fail(where, "expected a number, nested array or object");
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& j) {
  using detail::schema_fail;
  if (!j.is_object()) schema_fail("root", "expected an object");
  Scenario sc;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      schema_fail("seed", "expected an integer");
    }
    sc.seed = j["seed"].get<std::uint64_t>();
  }
  const std::string mode = j.value("mode", "curves");
  if (mode == "curves") {
    sc.mode = ScenarioMode::kCurves;
  } else if (mode == "paths") {
    sc.mode = ScenarioMode::kPaths;
  } else {
    schema_fail("mode", "expected 'curves' or 'paths'");
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (!g.is_object()) schema_fail("grid", "expected an object");
    sc.grid = LagGrid(detail::get_number(g, "a", "grid", -1.0),
                      detail::get_number(g, "b", "grid", 1.0),
                      detail::get_count(g, "m", "grid", 41));
  }
  if (j.contains("measures")) {
    if (!j["measures"].is_array() || j["measures"].empty()) {
      schema_fail("measures", "expected a non-empty array of names");
    }
    sc.measures.clear();
    for (const auto& m : j["measures"]) {
      if (!m.is_string()) schema_fail("measures", "expected strings");
      sc.measures.push_back(m.get<std::string>());
    }
  }
  sc.sample_rate_hz = detail::get_number(j, "sample_rate_hz", "root", 20.0);
  if (!(sc.sample_rate_hz > 0.0)) schema_fail("sample_rate_hz", "must be positive");

  GpSpec base;
  base.grid = sc.grid;
  base.measures = sc.measures;
  if (j.contains("kernel")) detail::read_kernel(j["kernel"], "kernel", base);
  const std::size_t default_length =
      j.contains("length") ? detail::get_count(j, "length", "root", 0) : 20000;

  if (!j.contains("groups") || !j["groups"].is_array() || j["groups"].empty()) {
    schema_fail("groups", "expected a non-empty array");
  }
  std::set<std::string> names;
  for (std::size_t gi = 0; gi < j["groups"].size(); ++gi) {
    const auto& gj = j["groups"][gi];
    const auto where = "groups[" + std::to_string(gi) + "]";
    if (!gj.is_object()) schema_fail(where, "expected an object");
    ScenarioGroup grp;
    grp.name = gj.value("name", "g" + std::to_string(gi));
    if (!names.insert(grp.name).second) schema_fail(where + ".name", "duplicate");
    grp.n = detail::get_count(gj, "n", where, std::nullopt);
    if (!gj.contains("labels") || !gj["labels"].is_object() ||
        gj["labels"].empty()) {
      schema_fail(where + ".labels", "expected a non-empty object");
    }
    for (const auto& [k, v] : gj["labels"].items()) {
      if (!v.is_string()) schema_fail(where + ".labels." + k, "expected a string");
      grp.labels[k] = v.get<std::string>();
    }
    if (sc.mode == ScenarioMode::kCurves) {
      grp.gp = base;
      if (gj.contains("kernel")) {
        detail::read_kernel(gj["kernel"], where + ".kernel", grp.gp);
      }
      grp.gp.mean = gj.contains("mean")
                        ? detail::read_mean(gj["mean"], where + ".mean",
                                            sc.grid, sc.measures.size())
                        : Eigen::MatrixXd::Zero(
                              static_cast<Eigen::Index>(sc.measures.size()),
                              static_cast<Eigen::Index>(sc.grid.size()));
      validate(grp.gp);
    } else {
      if (!gj.contains("var1") || !gj["var1"].is_object()) {
        schema_fail(where + ".var1", "required in paths mode");
      }
      const auto& v = gj["var1"];
      if (!v.contains("a")) schema_fail(where + ".var1.a", "required");
      grp.var1.a = detail::get_matrix2(v["a"], where + ".var1.a");
      if (v.contains("sigma")) {
        grp.var1.sigma = detail::get_matrix2(v["sigma"], where + ".var1.sigma");
      }
      grp.var1.length = detail::get_count(gj, "length", where, default_length);
      grp.var1.sample_rate_hz = sc.sample_rate_hz;
      validate(grp.var1);
    }
    sc.groups.push_back(std::move(grp));
  }
  return sc;
}

inline Scenario read_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error("scenario: " + path.string() + ": " + e.what());
  }
  return parse_scenario(j);
}

inline std::string curve_file_csv(const MultiCurveSample& s) {
  std::string out = "lag_seconds";
  for (const auto& m : s.measures) out += "," + m;
  out += '\n';
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    out += csv::format_double(s.grid[i]);
    for (Eigen::Index k = 0; k < s.curves.rows(); ++k) {
      out += "," + csv::format_double(s.curves(k, static_cast<Eigen::Index>(i)));
    }
    out += '\n';
  }
  return out;
}

/// Turns a VAR(1) path into a raw session: dopamine = x, and position is the
/// running sum of y / rate so that derive_velocity recovers y.
inline Session session_from_path(const VarPath& path, double sample_rate_hz,
                                 std::string id,
                                 std::map<std::string, std::string> labels) {
  Session s;
  s.id = std::move(id);
  s.sample_rate_hz = sample_rate_hz;
  s.labels = std::move(labels);
  s.dopamine = path.x;
  s.position.resize(path.x.size());
  double pos = 0.0;
  for (std::size_t t = 0; t < path.x.size(); ++t) {
    s.position[t] = pos;
    pos += path.y[t] / sample_rate_hz;
  }
  return s;
}

inline std::string session_name(const ScenarioGroup& g, std::size_t j) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03zu", j);
  return g.name + "_" + buf;
}

/// Writes manifest.csv and sessions/<id>.csv under `out_dir`.
inline std::vector<ManifestEntry> write_scenario_dataset(
    const Scenario& sc, const std::filesystem::path& out_dir) {
  std::vector<ManifestEntry> entries;
  std::set<std::string> factor_set;
  std::vector<std::string> factors;
  for (const auto& g : sc.groups) {
    for (const auto& [k, v] : g.labels) {
      if (factor_set.insert(k).second) factors.push_back(k);
    }
  }
  for (std::size_t gi = 0; gi < sc.groups.size(); ++gi) {
    const auto& g = sc.groups[gi];
    const auto group_seed = derive_seed(sc.seed, "group", gi);
    std::optional<GpSampler> sampler;
    if (sc.mode == ScenarioMode::kCurves) sampler.emplace(g.gp);
    for (std::size_t j = 0; j < g.n; ++j) {
      const auto id = session_name(g, j);
      const auto rel = std::filesystem::path("sessions") / (id + ".csv");
      std::string contents;
      if (sampler) {
        contents = curve_file_csv(sampler->draw(group_seed, j, id));
      } else {
        const auto path = simulate_var1_path(g.var1, derive_seed(group_seed, "path", j));
        contents = write_session_csv(
            session_from_path(path, sc.sample_rate_hz, id, g.labels));
      }
      csv::write_file(out_dir / rel, contents);
      entries.push_back({id, rel, sc.sample_rate_hz, g.labels});
    }
  }
  csv::write_file(out_dir / "manifest.csv", write_manifest(entries, factors));
  return entries;
}

}  // namespace fccf
