/* Copyright 2026 The biasmatrix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// biasmatrix: audit text-to-image prompts for bias, build the
// intersectional-sensitivity matrix and run priority-weighted mitigation.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "biasmatrix/commands.hpp"
#include "biasmatrix/errors.hpp"
#include "biasmatrix/model.hpp"

namespace {

struct Flags {
  std::vector<std::string> configs;
  std::string backend;
  std::optional<std::uint64_t> seed;
  std::optional<int> budget;
  std::optional<double> epsilon;
  std::optional<std::string> priority;
  std::optional<std::string> ideal;
  std::optional<std::string> transport;
  std::string out = "out";
  std::optional<std::string> store;
  bool frozen_matrix = false;
  std::vector<double> error_rates;
  std::vector<double> keep_fractions;
  std::optional<int> sweep_seeds;
  std::optional<std::uint64_t> sweep_seed;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.configs, "Audit config JSON (repeatable)")->required();
  cmd->add_option("--backend", f.backend,
                  "synthetic[:analytic|:sampled], replay[:dir] or remote[:endpoint]");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--budget", f.budget, "Images per prompt set")->check(CLI::PositiveNumber);
  cmd->add_option("--ideal", f.ideal, "JSON file of ideal distributions per axis");
  cmd->add_option("--transport", f.transport, "Ground metric")
      ->check(CLI::IsMember({"ordinal", "nominal"}));
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--store", f.store, "Annotation store directory (default <out>/annotations)");
}

biasmatrix::RunOptions to_options(const Flags& f) {
  biasmatrix::RunOptions o;
  for (const auto& c : f.configs) o.config_paths.emplace_back(c);
  o.backend = f.backend;
  o.seed = f.seed;
  o.budget = f.budget;
  o.epsilon = f.epsilon;
  o.priority = f.priority;
  if (f.ideal) o.ideal = *f.ideal;
  if (f.transport) o.transport = biasmatrix::parse_transport(*f.transport);
  o.out = f.out;
  if (f.store) o.store = *f.store;
  o.frozen_matrix = f.frozen_matrix;
  if (!f.error_rates.empty()) o.sweep.error_rates = f.error_rates;
  if (!f.keep_fractions.empty()) o.sweep.keep_fractions = f.keep_fractions;
  if (f.sweep_seeds) o.sweep.seeds = *f.sweep_seeds;
  if (f.sweep_seed) {
    o.sweep.seed = *f.sweep_seed;
    o.sweep_seed_set = true;
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias audit and intersectional mitigation for text-to-image models"};
  app.require_subcommand(1);
  Flags f;

  auto* audit = app.add_subcommand("audit", "Audit one prompt and write the sensitivity matrix");
  add_common(audit, f);

  auto* mitigate = app.add_subcommand("mitigate", "Run the greedy mitigation loop");
  add_common(mitigate, f);
  mitigate->add_option("--priority", f.priority, "Priority weights, e.g. gender=0.5,age=0.5");
  mitigate->add_option("--epsilon", f.epsilon, "Stop threshold on the priority bias score");
  mitigate->add_flag("--frozen-matrix", f.frozen_matrix,
                     "Reuse the first sensitivity matrix for every step");

  auto* validate = app.add_subcommand("validate",
                                      "Correlate predicted and measured post-mitigation IS");
  add_common(validate, f);

  auto* robustness = app.add_subcommand("robustness", "Perturb annotations and re-derive IS");
  add_common(robustness, f);
  robustness->add_option("--error-rates", f.error_rates, "Answer error rates")->delimiter(',');
  robustness->add_option("--keep-fractions", f.keep_fractions, "Subsample keep fractions")
      ->delimiter(',');
  robustness->add_option("--sweep-seeds", f.sweep_seeds, "Seeds per level")
      ->check(CLI::PositiveNumber);
  robustness->add_option("--sweep-seed", f.sweep_seed, "Base seed for perturbations");

  std::string manifest;
  std::optional<std::string> replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run a recorded run and compare outputs");
  replay->add_option("manifest", manifest, "manifest.json of the recorded run")->required();
  replay->add_option("--out", replay_out, "Output directory (default <run>/replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : biasmatrix::kExitConfigError;
  }

  if (replay->parsed()) {
    try {
      std::optional<std::filesystem::path> out;
      if (replay_out) out = *replay_out;
      return biasmatrix::cmd_replay(manifest, out, std::cerr);
    } catch (const biasmatrix::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return biasmatrix::kExitConfigError;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return biasmatrix::kExitBackendError;
    }
  }

  biasmatrix::RunOptions options;
  try {
    options = to_options(f);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return biasmatrix::kExitConfigError;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return biasmatrix::run_command(name, options, std::cerr);
}
