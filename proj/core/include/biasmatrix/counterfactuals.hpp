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

#ifndef BIASMATRIX_COUNTERFACTUALS_HPP_
#define BIASMATRIX_COUNTERFACTUALS_HPP_

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasmatrix/model.hpp"

namespace biasmatrix {

inline constexpr char kPersonQuestion[] = "Is there a person in the image (yes or no)?";
inline constexpr char kYes[] = "yes";
inline constexpr char kNo[] = "no";

struct Provenance {
  enum class Kind { kInitial, kCounterfactual, kMitigated };

  Kind kind = Kind::kInitial;
  // Set for counterfactual sets.
  std::string axis_id;
  std::string category;
  // Axes mitigated so far, in mitigation order.
  std::vector<std::string> history;

  // Stable text key, e.g. "mit[environment_bias]/cf[gender_bias=male]".
  std::string label() const;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct PromptSet {
  std::vector<PromptSpec> variants;
  Provenance provenance;

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

PromptSet initial_prompt_set(const AuditConfig& config);

// Renders a variant to prompt text. Adjective fragments ("male ~") go before
// the subject and clause fragments ("~ working indoors") after it, each in
// axis declaration order; then whitespace and a/an articles are normalized.
// The subject is the text after the last standalone "a"/"an" of the base
// prompt, or the whole base prompt when it has no article.
std::string render_prompt(const PromptSpec& spec, std::span<const BiasAxis> axes);

struct CounterfactualExpansion {
  std::vector<PromptSet> sets;  // one per category, in category order
  bool degenerate = false;      // every category has the same fragment
};

// Forces each category of `axis` onto every variant of `base`, keeping the
// relative weights. Throws DataError if any variant already forces `axis`.
CounterfactualExpansion expand_counterfactuals(const PromptSet& base,
                                               const BiasAxis& axis);

// Splits a set whose variants all force `axis` into one subset per category
// (weights renormalized). This is the counterfactual split of an axis that
// has already been mitigated. Throws DataError if a category has no variant.
std::vector<PromptSet> partition_by_axis(const PromptSet& base,
                                         const BiasAxis& axis);

// Counterfactual sets for row `axis`: expansion when the axis is free,
// partition when every variant already forces it.
std::vector<PromptSet> counterfactual_sets(const PromptSet& base,
                                           const BiasAxis& axis);

// Prompt-modification mitigation: cross product of the variants of `base`
// with the categories of `axis`, weights split equally. Throws DataError if
// `axis` is already mitigated and BudgetError if the result has more
// variants than `image_budget`.
PromptSet pm_mitigate(const PromptSet& base, const BiasAxis& axis,
                      int image_budget);

// Images per variant. Shares follow the weights, floor-rounded; leftover
// images go one each to the lexicographically first rendered prompts.
std::vector<int> allocate_budget(const PromptSet& set, int budget,
                                 std::span<const BiasAxis> axes);

struct Question {
  std::string text;                   // full question (simple axes)
  std::vector<std::string> choices;   // the axis's categories
  std::vector<SubQuestion> sub_questions;  // compound axes, asked in order
  std::string fallback;               // compound axes: every answer "no"
};

Question question_for(const BiasAxis& axis);

nlohmann::json to_json(const Provenance& provenance);
nlohmann::json to_json(const PromptSet& set, std::span<const BiasAxis> axes);

}  // namespace biasmatrix

#endif  // BIASMATRIX_COUNTERFACTUALS_HPP_
