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

#include <benchmark/benchmark.h>

#include "biasmatrix/audit.hpp"
#include "biasmatrix/mitigation.hpp"
#include "biasmatrix/report.hpp"

namespace {

using namespace biasmatrix;

void BM_RunIntermit(benchmark::State& state) {
  const auto config = validate_config(
      load_config(std::filesystem::path(BIASMATRIX_CONFIG_DIR) / "announcer.json"));
  const auto priority = PriorityVector::make(config.priority, config);
  auto handle = open_backend("", config, std::nullopt);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_intermit(config, priority, *handle.auditor));
  }
}
BENCHMARK(BM_RunIntermit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
