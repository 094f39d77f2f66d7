// Copyright 2026 The vecfl Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vecfl/config.hpp"
#include "vecfl/log.hpp"
#include "vecfl/metrics.hpp"
#include "vecfl/simulator.hpp"

namespace fs = std::filesystem;

namespace {

vecfl::ExperimentResult run_one(const vecfl::SimConfig& cfg, const fs::path& dir) {
  vecfl::log::info("running scheme=" + cfg.scheme + " seed=" + std::to_string(cfg.seed) + " w1=" +
                   vecfl::fmt_num(cfg.w1) + " K=" + std::to_string(cfg.participants) + " -> " + dir.string());
  auto res = vecfl::run_experiment(cfg);
  vecfl::emit_metrics(res, dir);
  return res;
}

std::string comparison_table(const std::string& key_name, const std::vector<std::string>& keys,
                             const std::vector<vecfl::ExperimentResult>& results) {
  std::ostringstream os;
  os << key_name << ',' << vecfl::kSummaryHeader << ",avg_q\n";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    os << keys[i] << ',' << vecfl::summary_line(results[i].summary) << ',' << vecfl::fmt_num(results[i].avg_level())
       << '\n';
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicular federated learning with adaptive gradient quantization"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheme;
  std::optional<std::size_t> episodes;
  std::optional<std::string> out;
  std::vector<double> sweep_w1;
  std::vector<std::size_t> participants;

  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--scheme", scheme, "dqn-gradq | ada-gradq | fix2 | fix6 | fix10 | random");
  app.add_option("--episodes", episodes, "training episodes (overrides T)");
  app.add_option("--out", out, "output directory");
  app.add_option("--sweep-w1", sweep_w1, "comma-separated time weights, one run each")->delimiter(',');
  app.add_option("--participants", participants, "comma-separated participant counts, one run each")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) std::cerr << app.help();
    return app.exit(e);
  }

  try {
    vecfl::SimConfig cfg = config_path.empty() ? vecfl::SimConfig{} : vecfl::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (scheme) cfg.scheme = *scheme;
    if (episodes) cfg.T = *episodes;
    if (out) cfg.out = *out;
    cfg.validate();
    const fs::path root = cfg.out;

    if (!sweep_w1.empty() && !participants.empty()) {
      std::cerr << "error: --sweep-w1 and --participants are mutually exclusive\n";
      return 2;
    }
    if (!sweep_w1.empty()) {
      std::vector<std::string> keys;
      std::vector<vecfl::ExperimentResult> results;
      for (double w : sweep_w1) {
        vecfl::SimConfig c = cfg;
        c.w1 = w;
        if (c.weight_sum_convention) c.w2 = 1.0 - w;
        c.validate();
        keys.push_back(vecfl::fmt_num(w));
        results.push_back(run_one(c, root / ("w1_" + keys.back())));
      }
      vecfl::write_atomic(root / "sweep.csv", comparison_table("w1_grid", keys, results));
    } else if (!participants.empty()) {
      std::vector<std::string> keys;
      std::vector<vecfl::ExperimentResult> results;
      for (std::size_t k : participants) {
        vecfl::SimConfig c = cfg;
        c.participants = k;
        c.validate();
        keys.push_back(std::to_string(k));
        results.push_back(run_one(c, root / ("K_" + keys.back())));
      }
      vecfl::write_atomic(root / "participants.csv", comparison_table("K_grid", keys, results));
    } else {
      run_one(cfg, root);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
