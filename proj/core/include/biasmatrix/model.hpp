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

// Domain types shared by every stage of an audit: bias axes, prompt
// variants, attribute distributions, annotation records, the sensitivity
// matrix, and the audit configuration.

#ifndef BIASMATRIX_MODEL_HPP_
#define BIASMATRIX_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace biasmatrix {

inline constexpr std::size_t kNotFound = static_cast<std::size_t>(-1);
inline constexpr double kSimplexTolerance = 1e-9;

// One yes/no question of a compound axis. A "yes" assigns `category`.
struct SubQuestion {
  std::string category;
  std::string question;

  friend bool operator==(const SubQuestion&, const SubQuestion&) = default;
};

// A categorical dimension of variation with its ordered categories.
//
// Prompt fragments use '~' as the placeholder for the subject noun: "male ~"
// renders as an adjective, "~ working indoors" as a trailing clause. A
// fragment without '~' is appended after the subject.
//
// Compound axes (e.g. disability) are annotated through a list of yes/no
// sub-questions; the first "yes" wins and all "no" yields `fallback`.
struct BiasAxis {
  std::string id;
  std::vector<std::string> categories;
  std::vector<std::string> prompt_fragments;
  std::string question;
  bool ordinal = true;
  std::vector<SubQuestion> sub_questions;
  std::string fallback;

  std::size_t size() const { return categories.size(); }
  bool compound() const { return !sub_questions.empty(); }
  std::size_t index_of(std::string_view category) const;

  friend bool operator==(const BiasAxis&, const BiasAxis&) = default;
};

// axis-id -> forced category label.
using Modifiers = std::map<std::string, std::string>;

// A prompt variant: base prompt plus forced attributes and a share of the
// image budget. No modifiers means the initial prompt.
struct PromptSpec {
  std::string base_prompt;
  Modifiers modifiers;
  double weight = 1.0;

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

struct AttributeDistribution {
  std::string axis_id;
  std::vector<double> probs;
  std::size_t n_samples = 0;  // 0 for analytic distributions

  friend bool operator==(const AttributeDistribution&,
                         const AttributeDistribution&) = default;
};

struct IdealDistribution {
  std::string axis_id;
  std::vector<double> probs;

  friend bool operator==(const IdealDistribution&,
                         const IdealDistribution&) = default;
};

// One generated image with its extracted attributes. Answers outside the
// axis's choice list land in `off_list` and never enter a distribution.
struct AnnotationRecord {
  std::string image_id;
  PromptSpec prompt_variant;
  bool person_present = true;
  std::map<std::string, std::string> attributes;
  std::map<std::string, std::string> off_list;

  friend bool operator==(const AnnotationRecord&,
                         const AnnotationRecord&) = default;
};

struct BiasDeviation {
  std::string axis_id;
  double w = 0.0;      // raw Wasserstein-1 distance to the ideal
  double w_bar = 0.0;  // normalized to [0, 1]

  friend bool operator==(const BiasDeviation&, const BiasDeviation&) = default;
};

struct SensitivityEntry {
  std::string intervened;
  std::string measured;
  double is_value = 0.0;  // == w_init.w_bar - w_intervened.w_bar
  BiasDeviation w_init;
  BiasDeviation w_intervened;

  friend bool operator==(const SensitivityEntry&,
                         const SensitivityEntry&) = default;
};

// Rows are intervened axes, columns measured axes; entries are row-major.
struct SensitivityMatrix {
  std::vector<std::string> row_axes;
  std::vector<std::string> col_axes;
  std::vector<SensitivityEntry> entries;

  std::size_t rows() const { return row_axes.size(); }
  std::size_t cols() const { return col_axes.size(); }
  const SensitivityEntry& at(std::size_t row, std::size_t col) const {
    return entries[row * col_axes.size() + col];
  }
  double value(std::size_t row, std::size_t col) const {
    return at(row, col).is_value;
  }
  std::size_t row_index(std::string_view axis_id) const;
  std::size_t col_index(std::string_view axis_id) const;

  friend bool operator==(const SensitivityMatrix&,
                         const SensitivityMatrix&) = default;
};

enum class Transport { kOrdinal, kNominal };

std::string_view to_string(Transport transport);
Transport parse_transport(std::string_view text);

// Where images and answers come from. `kind` is "synthetic", "replay" or
// "remote"; `world` carries the synthetic world document.
struct BackendDescriptor {
  std::string kind = "synthetic";
  std::string endpoint;
  nlohmann::json world = nlohmann::json::object();
  int retries = 2;
  int timeout_ms = 60000;

  friend bool operator==(const BackendDescriptor&,
                         const BackendDescriptor&) = default;
};

struct AuditConfig {
  std::vector<BiasAxis> axes;
  std::string base_prompt;
  std::map<std::string, IdealDistribution> ideal;
  int image_budget = 48;
  std::uint64_t seed = 0;
  double epsilon = 0.35;
  Transport transport = Transport::kOrdinal;
  BackendDescriptor backend;
  // Optional default priority (axis-id -> weight) for mitigation runs.
  std::map<std::string, double> priority;

  const BiasAxis& axis(std::string_view id) const;
  std::size_t axis_index(std::string_view id) const;
  // Declared ordinal flag combined with the run's transport mode.
  bool ordinal(const BiasAxis& axis) const {
    return transport == Transport::kOrdinal && axis.ordinal;
  }

  friend bool operator==(const AuditConfig&, const AuditConfig&) = default;
};

inline constexpr int kDefaultImageBudget = 48;
inline constexpr double kDefaultEpsilon = 0.35;

// Checks every cross-reference and fills defaults (uniform ideals, budget,
// epsilon). Throws ConfigError listing every problem found.
AuditConfig validate_config(AuditConfig config);

// Parses a config document. An "axis_bank" member names a JSON file with an
// "axes" array, resolved against `base_dir`; inline "axes" entries override
// bank entries with the same id. The result is not yet validated.
AuditConfig config_from_json(const nlohmann::json& doc,
                             const std::filesystem::path& base_dir = {});
AuditConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const AuditConfig& config);
nlohmann::json to_json(const BiasAxis& axis);
BiasAxis axis_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const PromptSpec& spec);
PromptSpec prompt_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const AnnotationRecord& record);
AnnotationRecord record_from_json(const nlohmann::json& doc);

// Hex FNV-1a of the canonical config document.
std::string config_hash(const AuditConfig& config);

// Loads an ideal-distribution override file: {"axis-id": [p0, p1, ...]}.
std::map<std::string, IdealDistribution> load_ideals(
    const std::filesystem::path& path);

bool is_probability_vector(std::span<const double> probs,
                           double tolerance = kSimplexTolerance);
std::vector<double> uniform_probs(std::size_t k);

}  // namespace biasmatrix

#endif  // BIASMATRIX_MODEL_HPP_
