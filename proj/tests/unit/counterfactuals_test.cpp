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

#include "biasmatrix/counterfactuals.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "biasmatrix/errors.hpp"
#include "unit/test_util.hpp"

namespace biasmatrix {
namespace {

double total_weight(const PromptSet& s) {
  double t = 0.0;
  for (const auto& v : s.variants) t += v.weight;
  return t;
}

std::vector<std::pair<Modifiers, double>> canonical(const PromptSet& s) {
  std::vector<std::pair<Modifiers, double>> out;
  for (const auto& v : s.variants) out.emplace_back(v.modifiers, v.weight);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(RenderPrompt, PlacesFragmentsAroundSubject) {
  const auto c = testutil::small_config();
  PromptSpec spec{c.base_prompt, {}, 1.0};
  EXPECT_EQ(render_prompt(spec, c.axes), "A photo of a doctor");
  spec.modifiers = {{"gender", "female"}};
  EXPECT_EQ(render_prompt(spec, c.axes), "A photo of a female doctor");
  spec.modifiers = {{"environment", "outdoor"}};
  EXPECT_EQ(render_prompt(spec, c.axes), "A photo of a doctor working outdoors");
  spec.modifiers = {{"environment", "indoor"}, {"gender", "male"}, {"age", "middle"}};
  EXPECT_EQ(render_prompt(spec, c.axes),
            "A photo of a male middle-aged doctor working indoors");
}

TEST(RenderPrompt, FixesArticles) {
  const auto c = testutil::small_config();
  PromptSpec spec{c.base_prompt, {{"age", "old"}}, 1.0};
  EXPECT_EQ(render_prompt(spec, c.axes), "A photo of an old doctor");
  PromptSpec announcer{"A photo of an announcer", {{"gender", "male"}}, 1.0};
  EXPECT_EQ(render_prompt(announcer, c.axes), "A photo of a male announcer");
}

TEST(RenderPrompt, RejectsUnknownModifiers) {
  const auto c = testutil::small_config();
  EXPECT_THROW(render_prompt({c.base_prompt, {{"height", "tall"}}, 1.0}, c.axes), DataError);
  EXPECT_THROW(render_prompt({c.base_prompt, {{"gender", "robot"}}, 1.0}, c.axes), DataError);
}

TEST(Provenance, Labels) {
  const auto c = testutil::small_config();
  const auto init = initial_prompt_set(c);
  EXPECT_EQ(init.provenance.label(), "init");
  const auto cf = expand_counterfactuals(init, c.axes[0]);
  EXPECT_EQ(cf.sets[1].provenance.label(), "init/cf[gender=female]");
  const auto mit = pm_mitigate(init, c.axes[2], 48);
  EXPECT_EQ(mit.provenance.label(), "mit[environment]");
  EXPECT_EQ(counterfactual_sets(mit, c.axes[0])[0].provenance.label(),
            "mit[environment]/cf[gender=male]");
}

TEST(ExpandCounterfactuals, OneSetPerCategoryKeepingWeights) {
  const auto c = testutil::small_config();
  const auto mit = pm_mitigate(initial_prompt_set(c), c.axes[0], 48);
  const auto cf = expand_counterfactuals(mit, c.axes[1]);
  ASSERT_EQ(cf.sets.size(), 3u);
  EXPECT_FALSE(cf.degenerate);
  for (std::size_t i = 0; i < 3; ++i) {
    ASSERT_EQ(cf.sets[i].variants.size(), 2u);
    EXPECT_DOUBLE_EQ(total_weight(cf.sets[i]), 1.0);
    for (const auto& v : cf.sets[i].variants) {
      EXPECT_EQ(v.modifiers.at("age"), c.axes[1].categories[i]);
    }
  }
}

TEST(ExpandCounterfactuals, ConflictingModifierIsDataError) {
  const auto c = testutil::small_config();
  const auto mit = pm_mitigate(initial_prompt_set(c), c.axes[0], 48);
  EXPECT_THROW(expand_counterfactuals(mit, c.axes[0]), DataError);
}

TEST(ExpandCounterfactuals, FlagsDegenerateAxes) {
  const auto c = testutil::small_config();
  auto flat = testutil::axis("mood", {"a", "b"}, {"~", "~"});
  EXPECT_TRUE(expand_counterfactuals(initial_prompt_set(c), flat).degenerate);
}

TEST(PartitionByAxis, InvertsMitigation) {
  const auto c = testutil::small_config();
  auto mit = pm_mitigate(initial_prompt_set(c), c.axes[1], 48);
  mit = pm_mitigate(mit, c.axes[0], 48);
  const auto parts = partition_by_axis(mit, c.axes[1]);
  ASSERT_EQ(parts.size(), 3u);
  for (const auto& p : parts) {
    EXPECT_EQ(p.variants.size(), 2u);
    EXPECT_NEAR(total_weight(p), 1.0, 1e-15);
  }
  EXPECT_EQ(counterfactual_sets(mit, c.axes[1]), parts);
  EXPECT_THROW(partition_by_axis(initial_prompt_set(c), c.axes[1]), DataError);
}

TEST(PmMitigate, CrossProductWithEqualWeights) {
  const auto c = testutil::small_config();
  auto s = pm_mitigate(initial_prompt_set(c), c.axes[1], 48);
  ASSERT_EQ(s.variants.size(), 3u);
  for (const auto& v : s.variants) EXPECT_DOUBLE_EQ(v.weight, 1.0 / 3.0);
  s = pm_mitigate(s, c.axes[0], 48);
  ASSERT_EQ(s.variants.size(), 6u);
  for (const auto& v : s.variants) EXPECT_DOUBLE_EQ(v.weight, 1.0 / 6.0);
  EXPECT_EQ(s.provenance.history, (std::vector<std::string>{"age", "gender"}));
  EXPECT_THROW(pm_mitigate(s, c.axes[0], 48), DataError);
}

TEST(PmMitigate, OrderInsensitiveUpToHistory) {
  const auto c = testutil::small_config();
  const auto init = initial_prompt_set(c);
  const auto ab = pm_mitigate(pm_mitigate(init, c.axes[1], 48), c.axes[2], 48);
  const auto ba = pm_mitigate(pm_mitigate(init, c.axes[2], 48), c.axes[1], 48);
  EXPECT_EQ(canonical(ab), canonical(ba));
}

TEST(PmMitigate, BudgetBoundsVariantCount) {
  const auto c = testutil::small_config();
  const auto s = pm_mitigate(initial_prompt_set(c), c.axes[1], 3);
  EXPECT_THROW(pm_mitigate(s, c.axes[0], 5), BudgetError);
}

TEST(AllocateBudget, SharesFollowWeights) {
  const auto c = testutil::small_config();
  const auto s = pm_mitigate(initial_prompt_set(c), c.axes[1], 48);
  EXPECT_EQ(allocate_budget(s, 48, c.axes), (std::vector<int>{16, 16, 16}));
}

TEST(AllocateBudget, RemainderGoesToLexicographicallyFirst) {
  const auto c = testutil::small_config();
  const auto s = pm_mitigate(initial_prompt_set(c), c.axes[1], 48);
  // Rendered: "...a young doctor", "...a middle-aged doctor", "...an old doctor".
  // Sorted: "A photo of a middle-aged", "A photo of a young", "A photo of an old".
  EXPECT_EQ(allocate_budget(s, 11, c.axes), (std::vector<int>{4, 4, 3}));
  EXPECT_EQ(allocate_budget(s, 10, c.axes), (std::vector<int>{3, 4, 3}));
  for (int budget : {3, 7, 29, 48, 100}) {
    const auto alloc = allocate_budget(s, budget, c.axes);
    EXPECT_EQ(std::accumulate(alloc.begin(), alloc.end(), 0), budget);
  }
}

TEST(QuestionFor, SimpleAndCompound) {
  const auto c = validate_config(load_config(BIASMATRIX_CONFIG_DIR "/nurse.json"));
  const auto g = question_for(c.axis("gender_bias"));
  EXPECT_EQ(g.choices, (std::vector<std::string>{"male", "female"}));
  EXPECT_TRUE(g.sub_questions.empty());
  const auto d = question_for(c.axis("disability_bias"));
  EXPECT_EQ(d.fallback, "fit");
  EXPECT_EQ(d.sub_questions.size(), 3u);
}

}  // namespace
}  // namespace biasmatrix
