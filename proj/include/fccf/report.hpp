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

#include <cctype>
#include <string>
#include <vector>

#include "fccf/csv.hpp"
#include "fccf/pipeline.hpp"

namespace fccf {

inline nlohmann::ordered_json to_json(const TestReport& r) {
  nlohmann::ordered_json j;
  j["comparison"] = r.comparison;
  j["measures"] = r.measures;
  j["n1"] = r.group1_sessions.size();
  j["n2"] = r.group2_sessions.size();
  j["group1_sessions"] = r.group1_sessions;
  j["group2_sessions"] = r.group2_sessions;
  j["f_int"] = r.f_int;
  j["p_int"] = r.p_int;
  j["f_max"] = r.f_max;
  j["p_max"] = r.p_max;
  j["arg_max_lag"] = r.arg_max_lag;
  j["alpha"] = r.alpha;
  j["reject_int"] = r.p_int < r.alpha;
  j["reject_max"] = r.p_max < r.alpha;
  j["quadrature"] = std::string(to_string(r.quadrature));
  if (r.calibration) {
    j["calibration"] = {{"beta", r.calibration->beta},
                        {"d", r.calibration->d},
                        {"mean_hat", r.calibration->mean_hat},
                        {"var_hat", r.calibration->var_hat}};
  } else {
    j["calibration"] = nullptr;
  }
  j["ws_moments"] = std::string(to_string(r.ws_moments));
  j["calibration_factor"] = r.calibration_factor;
  j["bootstrap_B"] = r.bootstrap_B;
  j["p_int_bootstrap"] = r.p_int_bootstrap;
  if (r.permutation) {
    j["permutation"] = {{"R", r.permutation->replicates},
                        {"p_int", r.permutation->p_int},
                        {"p_max", r.permutation->p_max}};
  } else {
    j["permutation"] = nullptr;
  }
  j["seed"] = r.seed;
  j["pointwise"] = {{"lag_seconds", r.pointwise.grid.values()},
                    {"t_n", r.pointwise.t_values}};
  return j;
}

inline std::string to_json_text(const TestReport& r) {
  return to_json(r).dump(2) + "\n";
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace detail

inline const char* kResultsHeader = "comparison,measures,f_int,p_int,f_max,p_max\n";

inline std::string results_row(const TestReport& r) {
  return detail::csv_field(r.comparison) + "," +
         detail::csv_field(measures_label(r.measures)) + "," +
         csv::format_double(r.f_int) + "," + csv::format_double(r.p_int) +
         "," + csv::format_double(r.f_max) + "," +
         csv::format_double(r.p_max) + "\n";
}

inline std::string results_csv(const std::vector<TestReport>& reports) {
  std::string out = kResultsHeader;
  for (const auto& r : reports) out += results_row(r);
  return out;
}

inline std::string pointwise_csv(const PointwiseCurve& pw) {
  std::string out = "lag_seconds,t_n\n";
  for (std::size_t i = 0; i < pw.grid.size(); ++i) {
    out += csv::format_double(pw.grid[i]) + "," +
           csv::format_double(pw.t_values[i]) + "\n";
  }
  return out;
}

/// Lower-case slug for file names.
inline std::string slugify(const std::string& s) {
  std::string out;
  bool pending = false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      if (pending && !out.empty()) out += '_';
      pending = false;
      out += static_cast<char>(std::tolower(c));
    } else {
      pending = true;
    }
  }
  return out.empty() ? "comparison" : out;
}

}  // namespace fccf
