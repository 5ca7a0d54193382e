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

// Turns prompt sets into attribute distributions: the generate-then-annotate
// pipeline over any Backend, the exact analytic path over a SyntheticWorld,
// and the per-step audit that gathers everything a sensitivity matrix needs.

#ifndef BIASMATRIX_AUDIT_HPP_
#define BIASMATRIX_AUDIT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasmatrix/counterfactuals.hpp"
#include "biasmatrix/metrics.hpp"
#include "biasmatrix/model.hpp"
#include "biasmatrix/protocol.hpp"
#include "biasmatrix/store.hpp"
#include "biasmatrix/synthetic.hpp"

namespace biasmatrix {

struct AnnotationStats {
  std::size_t images = 0;
  std::size_t without_person = 0;
  std::size_t off_list_answers = 0;

  AnnotationStats& operator+=(const AnnotationStats& other) {
    images += other.images;
    without_person += other.without_person;
    off_list_answers += other.off_list_answers;
    return *this;
  }
};

// Generates `budget` images for the set (split per allocate_budget) and
// annotates each: the person question first, then one question per axis
// for images with a person. Failed calls are retried up to `retries` times;
// after that the whole set fails with BackendError. Records come back
// sorted by image id.
std::vector<AnnotationRecord> generate_and_annotate(const PromptSet& prompt_set,
                                                    std::span<const BiasAxis> axes, int budget,
                                                    std::uint64_t seed, Backend& backend,
                                                    int retries = 2,
                                                    AnnotationStats* stats = nullptr);

struct SetAudit {
  std::map<std::string, AttributeDistribution> distributions;
  std::vector<AnnotationRecord> records;
  bool has_records = false;
  double person_rate = 1.0;
};

class Auditor {
 public:
  virtual ~Auditor() = default;
  virtual SetAudit audit_set(const PromptSet& prompt_set) = 0;
  // "analytic" or "sampled"
  virtual std::string mode() const = 0;
};

class AnalyticAuditor : public Auditor {
 public:
  explicit AnalyticAuditor(const SyntheticWorld& world) : world_(world) {}
  SetAudit audit_set(const PromptSet& prompt_set) override;
  std::string mode() const override { return "analytic"; }

 private:
  const SyntheticWorld& world_;
};

// Seeds each set's generation from (config seed, provenance label).
class BackendAuditor : public Auditor {
 public:
  BackendAuditor(Backend& backend, const AuditConfig& config)
      : backend_(backend), config_(config) {}
  SetAudit audit_set(const PromptSet& prompt_set) override;
  std::string mode() const override { return "sampled"; }
  const AnnotationStats& stats() const { return stats_; }

 private:
  Backend& backend_;
  const AuditConfig& config_;
  AnnotationStats stats_;
};

struct Audit {
  AuditData data;
  AuditRecords records;
  bool has_records = false;
  double person_rate = 1.0;  // of the current prompt set's images
};

// Audits `current` and, when `with_counterfactuals`, every axis's
// counterfactual sets (split instead of expanded for mitigated axes).
Audit audit_prompt_set(const AuditConfig& config, const PromptSet& current, Auditor& auditor,
                       bool with_counterfactuals = true);

// Owns whatever a backend flag resolves to.
struct BackendHandle {
  std::unique_ptr<SyntheticWorld> world;
  std::unique_ptr<Backend> backend;
  std::unique_ptr<AnnotationStore> store;
  std::unique_ptr<RecordingBackend> recorder;
  std::unique_ptr<Auditor> auditor;
  std::string id;
  bool analytic = false;
};

// Resolves a backend flag:
//   synthetic[:analytic|:sampled]   world from config.backend.world
//   replay[:<dir>]                  stored log (default: `store_dir`)
//   remote[:<endpoint>]             endpoint, else config.backend.endpoint,
//                                   else $BIASMATRIX_ENDPOINT
// An empty flag falls back to config.backend.kind. Non-analytic, non-replay
// backends are recorded into `store_dir` when one is given.
BackendHandle open_backend(const std::string& flag, const AuditConfig& config,
                           const std::optional<std::filesystem::path>& store_dir);

}  // namespace biasmatrix

#endif  // BIASMATRIX_AUDIT_HPP_
