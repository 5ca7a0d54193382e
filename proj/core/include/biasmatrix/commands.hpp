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

// Subcommand implementations behind the command-line tool. Each command
// writes its outputs plus a manifest.json into the output directory and
// returns a process exit code.

#ifndef BIASMATRIX_COMMANDS_HPP_
#define BIASMATRIX_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasmatrix/metrics.hpp"
#include "biasmatrix/model.hpp"

namespace biasmatrix {

enum ExitCode : int {
  kExitOk = 0,
  kExitNotConverged = 2,
  kExitConfigError = 3,
  kExitBackendError = 4,
};

struct RunOptions {
  std::vector<std::filesystem::path> config_paths;
  // Already-resolved config documents; used instead of config_paths when set.
  std::vector<nlohmann::json> config_docs;
  std::string backend;  // empty: the config's backend kind
  std::optional<std::uint64_t> seed;
  std::optional<int> budget;
  std::optional<double> epsilon;
  std::optional<std::string> priority;
  std::optional<std::filesystem::path> ideal;
  std::optional<Transport> transport;
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> store;  // default <out>/annotations
  bool frozen_matrix = false;
  SweepSpec sweep;
  bool sweep_seed_set = false;
};

int cmd_audit(const RunOptions& options, std::ostream& log);
int cmd_mitigate(const RunOptions& options, std::ostream& log);
int cmd_validate(const RunOptions& options, std::ostream& log);
int cmd_robustness(const RunOptions& options, std::ostream& log);

// Re-runs the command recorded in `manifest` against its stored annotations
// (or the analytic world) and checks every output digest. Returns 0 when all
// outputs are bit-identical.
int cmd_replay(const std::filesystem::path& manifest,
               const std::optional<std::filesystem::path>& out, std::ostream& log);

// Dispatches by name and maps exceptions to exit codes.
int run_command(const std::string& name, const RunOptions& options, std::ostream& log);

}  // namespace biasmatrix

#endif  // BIASMATRIX_COMMANDS_HPP_
