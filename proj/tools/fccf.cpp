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

// Command-line front end: `fccf test`, `fccf simulate`, `fccf ccf`.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "fccf/cli.hpp"

namespace {

void add_window_flags(CLI::App* cmd, fccf::TrimWindow& w) {
  cmd->add_option("--window-start", w.start, "Drop samples with t < START (s)");
  cmd->add_option("--window-end", w.end, "Drop samples with t >= END (s)");
  cmd->add_option("--window-last", w.last_seconds,
                  "Keep only the final SECONDS of each session");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fccf::cli;
  CLI::App app{"Two-sample tests on multivariate cross-correlation curves"};
  app.require_subcommand(1);

  // test
  auto* test = app.add_subcommand("test", "Run group comparisons");
  RunConfig flags;
  std::string config_path, quadrature, divisor, measures, ws_moments;
  std::vector<std::string> comparisons;
  std::optional<double> window_start, window_end, window_last;
  std::string out_dir;
  test->add_option("--config", config_path, "JSON config (flags override it)");
  auto* o_manifest = test->add_option("--manifest", flags.manifest, "Manifest CSV");
  auto* o_compare = test->add_option("--compare", comparisons,
                                     "Comparison, e.g. 'region=NAc vs DS'")
                        ->allow_extra_args(false);
  auto* o_measures = test->add_option("--measures", measures,
                                      "Comma-separated measures");
  auto* o_lag_min = test->add_option("--lag-min", flags.lag_min);
  auto* o_lag_max = test->add_option("--lag-max", flags.lag_max);
  auto* o_grid = test->add_option("--grid-size", flags.grid_size);
  auto* o_alpha = test->add_option("--alpha", flags.alpha);
  auto* o_boot = test->add_option("--bootstrap", flags.bootstrap);
  auto* o_perm = test->add_option("--permutations", flags.permutations,
                                  "Permutation cross-check size (0 = off)");
  auto* o_seed = test->add_option("--seed", flags.seed);
  auto* o_quad = test->add_option("--quadrature", quadrature, "trapezoid|riemann");
  auto* o_div = test->add_option("--divisor", divisor, "series|overlap");
  auto* o_ws = test->add_option("--ws-moments", ws_moments,
                                "finite_sample|asymptotic");
  auto* o_out = test->add_option("--out", out_dir, "Output directory");
  auto* o_threads = test->add_option("--threads", flags.threads);
  auto* o_limit = test->add_option("--work-limit", flags.work_limit);
  test->add_option("--window-start", window_start);
  test->add_option("--window-end", window_end);
  test->add_option("--window-last", window_last);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string scenario_path, sim_out;
  sim->add_option("--scenario", scenario_path)->required();
  sim->add_option("--out", sim_out)->required();

  // ccf
  auto* ccf = app.add_subcommand("ccf", "Export one session's correlogram");
  CcfRequest req;
  std::string ccf_divisor = "series";
  ccf->add_option("--manifest", req.manifest)->required();
  ccf->add_option("--session", req.session)->required();
  ccf->add_option("--measure", req.measure);
  ccf->add_option("--out", req.out)->required();
  ccf->add_option("--lag-min", req.lag_min);
  ccf->add_option("--lag-max", req.lag_max);
  ccf->add_option("--grid-size", req.grid_size);
  ccf->add_option("--divisor", ccf_divisor);
  add_window_flags(ccf, req.window);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(scenario_path, sim_out);

    if (*ccf) {
      req.divisor = fccf::cli::parse_divisor(ccf_divisor);
      return cmd_ccf(req);
    }

    RunConfig cfg;
    if (!config_path.empty()) load_config_file(config_path, cfg);
    if (*o_manifest) cfg.manifest = flags.manifest;
    if (*o_compare) {
      cfg.comparisons.clear();
      for (const auto& c : comparisons) cfg.comparisons.push_back({c, {}});
    }
    if (*o_measures) cfg.measures = split_list(measures);
    if (*o_lag_min) cfg.lag_min = flags.lag_min;
    if (*o_lag_max) cfg.lag_max = flags.lag_max;
    if (*o_grid) cfg.grid_size = flags.grid_size;
    if (*o_alpha) cfg.alpha = flags.alpha;
    if (*o_boot) cfg.bootstrap = flags.bootstrap;
    if (*o_perm) cfg.permutations = flags.permutations;
    if (*o_seed) cfg.seed = flags.seed;
    if (*o_quad) cfg.quadrature = parse_quadrature(quadrature);
    if (*o_div) cfg.divisor = parse_divisor(divisor);
    if (*o_ws) cfg.ws_moments = parse_ws_moments(ws_moments);
    if (*o_out) cfg.out_dir = out_dir;
    if (*o_threads) cfg.threads = flags.threads;
    if (*o_limit) cfg.work_limit = flags.work_limit;
    if (window_start) cfg.window.start = window_start;
    if (window_end) cfg.window.end = window_end;
    if (window_last) cfg.window.last_seconds = window_last;
    if (cfg.manifest.empty() && !cfg.comparisons.empty()) {
      std::cerr << "error: --manifest is required\n";
      return kUsage;
    }
    return cmd_test(cfg);
  } catch (const fccf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  }
}
