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

#include <random>
#include <vector>

#include "biasmatrix/audit.hpp"
#include "biasmatrix/counterfactuals.hpp"
#include "biasmatrix/metrics.hpp"
#include "biasmatrix/report.hpp"
#include "biasmatrix/synthetic.hpp"

namespace {

using namespace biasmatrix;

std::vector<double> simplex(std::size_t k, std::mt19937_64& gen) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& v : p) s += (v = expo(gen));
  for (auto& v : p) v /= s;
  return p;
}

void BM_Wasserstein1(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto p = simplex(k, gen);
  const auto q = simplex(k, gen);
  for (auto _ : state) {
    benchmark::DoNotOptimize(wasserstein1(p, q, true));
    benchmark::DoNotOptimize(wasserstein1(p, q, false));
  }
}
BENCHMARK(BM_Wasserstein1)->Arg(2)->Arg(6)->Arg(16);

AuditConfig nurse(const char* mode) {
  auto doc = nlohmann::json::parse(
      read_file(std::filesystem::path(BIASMATRIX_CONFIG_DIR) / "nurse.json"));
  doc["backend"]["world"]["mode"] = mode;
  return validate_config(config_from_json(doc, BIASMATRIX_CONFIG_DIR));
}

void BM_AnalyticDistribution(benchmark::State& state) {
  const auto config = nurse("analytic");
  auto handle = open_backend("", config, std::nullopt);
  const auto set = pm_mitigate(initial_prompt_set(config), config.axis("gender_bias"), 48);
  for (auto _ : state) {
    for (const auto& axis : config.axes) {
      benchmark::DoNotOptimize(analytic_distribution(*handle.world, set, axis));
    }
  }
}
BENCHMARK(BM_AnalyticDistribution);

void BM_BuildMatrix(benchmark::State& state) {
  const auto config = nurse(state.range(0) ? "analytic" : "sampled");
  auto handle = open_backend("", config, std::nullopt);
  for (auto _ : state) {
    const auto audit = audit_prompt_set(config, initial_prompt_set(config), *handle.auditor);
    benchmark::DoNotOptimize(build_matrix(audit.data, config));
  }
}
BENCHMARK(BM_BuildMatrix)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
