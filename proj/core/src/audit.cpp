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

#include "biasmatrix/audit.hpp"

#include <algorithm>
#include <cstdlib>

#include "biasmatrix/errors.hpp"
#include "biasmatrix/hashing.hpp"
#include "biasmatrix/remote.hpp"

namespace biasmatrix {

namespace {

template <class Fn>
auto with_retries(int retries, Fn&& fn) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const BackendError&) {
      if (attempt >= retries) throw;
    }
  }
}

std::string ask(Backend& backend, int retries, const std::string& image_id,
                const std::string& question, const std::vector<std::string>& choices) {
  return with_retries(retries, [&] {
    return backend.annotate(AnnotateRequest{image_id, question, choices}).answer;
  });
}

}  // namespace

std::vector<AnnotationRecord> generate_and_annotate(const PromptSet& prompt_set,
                                                    std::span<const BiasAxis> axes, int budget,
                                                    std::uint64_t seed, Backend& backend,
                                                    int retries, AnnotationStats* stats) {
  const auto counts = allocate_budget(prompt_set, budget, axes);
  const std::vector<std::string> yes_no{kYes, kNo};
  std::vector<Question> questions;
  questions.reserve(axes.size());
  for (const auto& axis : axes) questions.push_back(question_for(axis));

  AnnotationStats local;
  std::vector<AnnotationRecord> records;
  records.reserve(static_cast<std::size_t>(budget));
  for (std::size_t v = 0; v < prompt_set.variants.size(); ++v) {
    const auto& variant = prompt_set.variants[v];
    GenerateRequest request{render_prompt(variant, axes), counts[v], seed, variant.modifiers};
    const auto ids = with_retries(retries, [&] {
      auto response = backend.generate(request);
      if (response.image_ids.size() != static_cast<std::size_t>(request.count)) {
        throw BackendError("protocol violation: asked for " + std::to_string(request.count) +
                           " images, got " + std::to_string(response.image_ids.size()));
      }
      return response.image_ids;
    });

    for (const auto& id : ids) {
      AnnotationRecord record;
      record.image_id = id;
      record.prompt_variant = variant;
      ++local.images;
      const std::string person = ask(backend, retries, id, kPersonQuestion, yes_no);
      record.person_present = person == kYes;
      if (!record.person_present) {
        ++local.without_person;
        records.push_back(std::move(record));
        continue;
      }
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& axis = axes[a];
        const auto& q = questions[a];
        if (axis.compound()) {
          std::string category = q.fallback;
          for (const auto& sub : q.sub_questions) {
            const std::string answer = ask(backend, retries, id, sub.question, yes_no);
            if (answer == kYes) {
              category = sub.category;
              break;
            }
            if (answer != kNo) {
              category.clear();
              record.off_list[axis.id] = answer;
              ++local.off_list_answers;
              break;
            }
          }
          if (!category.empty()) record.attributes[axis.id] = category;
        } else {
          const std::string answer = ask(backend, retries, id, q.text, q.choices);
          if (axis.index_of(answer) != kNotFound) {
            record.attributes[axis.id] = answer;
          } else {
            record.off_list[axis.id] = answer;
            ++local.off_list_answers;
          }
        }
      }
      records.push_back(std::move(record));
    }
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const AnnotationRecord& a, const AnnotationRecord& b) {
                     return a.image_id < b.image_id;
                   });
  if (stats) *stats += local;
  return records;
}

SetAudit AnalyticAuditor::audit_set(const PromptSet& prompt_set) {
  SetAudit out;
  for (const auto& axis : world_.axes()) {
    out.distributions[axis.id] = analytic_distribution(world_, prompt_set, axis);
  }
  out.person_rate = world_.person_rate();
  return out;
}

SetAudit BackendAuditor::audit_set(const PromptSet& prompt_set) {
  SetAudit out;
  const auto label = prompt_set.provenance.label();
  out.records = generate_and_annotate(prompt_set, config_.axes, config_.image_budget,
                                      derive_seed(config_.seed, label), backend_,
                                      config_.backend.retries, &stats_);
  out.has_records = true;
  std::size_t persons = 0;
  for (const auto& r : out.records) persons += r.person_present ? 1 : 0;
  out.person_rate = out.records.empty()
                        ? 0.0
                        : static_cast<double>(persons) / static_cast<double>(out.records.size());
  for (const auto& axis : config_.axes) {
    try {
      out.distributions[axis.id] = empirical_distribution(out.records, axis);
    } catch (const DataError& e) {
      throw DataError("prompt set " + label + ": " + e.what());
    }
  }
  return out;
}

Audit audit_prompt_set(const AuditConfig& config, const PromptSet& current, Auditor& auditor,
                       bool with_counterfactuals) {
  Audit audit;
  auto init = auditor.audit_set(current);
  audit.data.initial = std::move(init.distributions);
  audit.has_records = init.has_records;
  audit.person_rate = init.person_rate;
  audit.records.initial = std::move(init.records);
  if (!with_counterfactuals) return audit;

  for (const auto& axis : config.axes) {
    auto& per_category = audit.data.counterfactual[axis.id];
    auto& record_sets = audit.records.counterfactual[axis.id];
    for (const auto& set : counterfactual_sets(current, axis)) {
      auto result = auditor.audit_set(set);
      per_category.push_back(std::move(result.distributions));
      record_sets.push_back(std::move(result.records));
    }
  }
  if (!audit.has_records) audit.records.counterfactual.clear();
  return audit;
}

BackendHandle open_backend(const std::string& flag, const AuditConfig& config,
                           const std::optional<std::filesystem::path>& store_dir) {
  std::string kind = flag.empty() ? config.backend.kind : flag;
  std::string arg;
  if (const auto colon = kind.find(':'); colon != std::string::npos) {
    arg = kind.substr(colon + 1);
    kind.resize(colon);
  }

  BackendHandle handle;
  const std::string hash = config_hash(config);
  if (kind == "synthetic") {
    handle.world = std::make_unique<SyntheticWorld>(
        SyntheticWorld::from_json(config.backend.world, config.axes));
    if (arg == "analytic") {
      handle.world->set_mode(SyntheticWorld::Mode::kAnalytic);
    } else if (arg == "sampled") {
      handle.world->set_mode(SyntheticWorld::Mode::kSampled);
    } else if (!arg.empty()) {
      throw ConfigError("unknown synthetic mode '" + arg + "'");
    }
    handle.analytic = handle.world->mode() == SyntheticWorld::Mode::kAnalytic;
    handle.id = handle.analytic ? "synthetic:analytic" : "synthetic:sampled";
    if (handle.analytic) {
      handle.auditor = std::make_unique<AnalyticAuditor>(*handle.world);
      return handle;
    }
    handle.backend = std::make_unique<SyntheticBackend>(*handle.world);
  } else if (kind == "replay") {
    std::filesystem::path dir =
        arg.empty() ? store_dir.value_or(std::filesystem::path("annotations")) : std::filesystem::path(arg);
    handle.backend = std::make_unique<ReplayBackend>(dir, hash);
    handle.id = "replay";
    handle.auditor = std::make_unique<BackendAuditor>(*handle.backend, config);
    return handle;
  } else if (kind == "remote") {
    std::string endpoint = arg.empty() ? config.backend.endpoint : arg;
    if (endpoint.empty()) {
      if (const char* env = std::getenv("BIASMATRIX_ENDPOINT")) endpoint = env;
    }
    if (endpoint.empty()) {
      throw ConfigError("remote backend needs an endpoint (flag, config, or BIASMATRIX_ENDPOINT)");
    }
    handle.backend = std::make_unique<RemoteBackend>(endpoint, config.backend.timeout_ms);
    handle.id = "remote:" + endpoint;
  } else {
    throw ConfigError("unknown backend '" + flag + "'");
  }

  Backend* active = handle.backend.get();
  if (store_dir) {
    handle.store = std::make_unique<AnnotationStore>(*store_dir, hash);
    handle.recorder = std::make_unique<RecordingBackend>(*handle.backend, *handle.store);
    active = handle.recorder.get();
  }
  handle.auditor = std::make_unique<BackendAuditor>(*active, config);
  return handle;
}

}  // namespace biasmatrix
