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

#include "biasmatrix/model.hpp"

#include <fstream>

#include <gtest/gtest.h>

#include "biasmatrix/errors.hpp"
#include "unit/test_util.hpp"

namespace biasmatrix {
namespace {

using nlohmann::json;

TEST(ValidateConfig, FillsUniformIdealsAndQuestions) {
  const auto c = testutil::small_config();
  ASSERT_EQ(c.ideal.size(), 3u);
  EXPECT_EQ(c.ideal.at("age").probs, uniform_probs(3));
  EXPECT_EQ(c.axis("gender").question, "What is the gender (male, female) of the person?");
}

TEST(ValidateConfig, StripsBiasSuffixInDefaultQuestion) {
  AuditConfig c;
  c.base_prompt = "A photo of a nurse";
  c.axes = {testutil::axis("gender_bias", {"male", "female"})};
  EXPECT_EQ(validate_config(c).axes[0].question,
            "What is the gender (male, female) of the person?");
}

TEST(ValidateConfig, RejectsFragmentArityMismatch) {
  auto c = testutil::small_config();
  c.axes[1].prompt_fragments.pop_back();
  try {
    validate_config(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("arity mismatch"), std::string::npos);
  }
}

TEST(ValidateConfig, ReportsEveryProblem) {
  auto c = testutil::small_config();
  c.base_prompt.clear();
  c.image_budget = 0;
  c.ideal["age"].probs = {0.5, 0.5, 0.5};
  c.priority["missing"] = 1.0;
  try {
    validate_config(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("base_prompt"), std::string::npos);
    EXPECT_NE(what.find("image_budget"), std::string::npos);
    EXPECT_NE(what.find("not a probability vector"), std::string::npos);
    EXPECT_NE(what.find("unknown axis 'missing'"), std::string::npos);
  }
}

TEST(ValidateConfig, RejectsBadAxes) {
  auto dup = testutil::small_config();
  dup.axes.push_back(dup.axes[0]);
  EXPECT_THROW(validate_config(dup), ConfigError);

  auto single = testutil::small_config();
  single.axes[0].categories = {"male"};
  single.axes[0].prompt_fragments = {"male ~"};
  EXPECT_THROW(validate_config(single), ConfigError);

  auto question = testutil::small_config();
  question.axes[0].question = "Who is it?";
  EXPECT_THROW(validate_config(question), ConfigError);
}

TEST(ValidateConfig, CompoundAxisMustCoverCategories) {
  auto c = testutil::small_config();
  BiasAxis d = testutil::axis("disability", {"fit", "blind", "wheelchair"});
  d.sub_questions = {{"blind", "Is the person blind (yes or no)?"}};
  d.fallback = "fit";
  c.axes.push_back(d);
  EXPECT_THROW(validate_config(c), ConfigError);
  c.axes.back().sub_questions.push_back({"wheelchair", "Is the person in a wheelchair?"});
  EXPECT_NO_THROW(validate_config(c));
}

TEST(ValidateConfig, BudgetMustCoverLargestAxis) {
  auto c = testutil::small_config();
  c.image_budget = 2;
  EXPECT_THROW(validate_config(c), ConfigError);
}

TEST(ConfigJson, RoundTrips) {
  auto c = testutil::small_config();
  c.priority = {{"gender", 0.5}, {"age", 0.5}};
  c.transport = Transport::kNominal;
  c.backend.world = {{"mode", "analytic"}};
  const auto back = validate_config(config_from_json(to_json(c)));
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(ConfigJson, HashChangesWithContent) {
  auto a = testutil::small_config();
  auto b = a;
  b.seed = a.seed + 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(ConfigJson, MalformedDocumentsAreConfigErrors) {
  EXPECT_THROW(config_from_json(json::array()), ConfigError);
  EXPECT_THROW(config_from_json(json{{"axes", json{{"id", 3}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"base_prompt", "x"}, {"transport", "euclid"}}),
               ConfigError);
}

TEST(ConfigJson, AxisBankResolvesRelativeToConfig) {
  const auto c = validate_config(load_config(BIASMATRIX_CONFIG_DIR "/nurse.json"));
  EXPECT_EQ(c.axes.size(), 8u);
  EXPECT_EQ(c.axes[0].id, "gender_bias");
  EXPECT_TRUE(c.axis("disability_bias").compound());
  EXPECT_EQ(c.axis("disability_bias").fallback, "fit");
  EXPECT_EQ(c.priority.size(), 3u);
}

TEST(ConfigJson, AxisIdsSelectAndOrder) {
  json doc = {{"base_prompt", "A photo of a chef"},
              {"axis_bank", BIASMATRIX_CONFIG_DIR "/../core/data/occupation_axes.json"},
              {"axis_ids", {"age_bias", "gender_bias"}}};
  const auto c = validate_config(config_from_json(doc));
  ASSERT_EQ(c.axes.size(), 2u);
  EXPECT_EQ(c.axes[0].id, "age_bias");
  doc["axis_ids"] = {"height_bias"};
  EXPECT_THROW(config_from_json(doc), ConfigError);
}

TEST(LoadConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(LoadIdeals, ReadsOverrides) {
  testutil::TempDir dir;
  std::ofstream(dir.path() / "ideal.json") << R"({"gender": [0.3, 0.7]})";
  const auto ideals = load_ideals(dir.path() / "ideal.json");
  ASSERT_TRUE(ideals.contains("gender"));
  EXPECT_EQ(ideals.at("gender").probs, (std::vector<double>{0.3, 0.7}));
  std::ofstream(dir.path() / "bad.json") << R"({"gender": "even"})";
  EXPECT_THROW(load_ideals(dir.path() / "bad.json"), ConfigError);
}

TEST(RecordJson, RoundTrips) {
  AnnotationRecord r;
  r.image_id = "img-1";
  r.prompt_variant = {"A photo of a doctor", {{"gender", "female"}}, 0.5};
  r.person_present = true;
  r.attributes = {{"age", "old"}};
  r.off_list = {{"gender", "purple"}};
  EXPECT_EQ(record_from_json(to_json(r)), r);
}

TEST(Transport, ParsesKnownNames) {
  EXPECT_EQ(parse_transport("ordinal"), Transport::kOrdinal);
  EXPECT_EQ(parse_transport("nominal"), Transport::kNominal);
  EXPECT_THROW(parse_transport("l2"), ConfigError);
  EXPECT_EQ(std::string(to_string(Transport::kNominal)), "nominal");
}

TEST(ProbabilityVector, Checks) {
  EXPECT_TRUE(is_probability_vector(std::vector<double>{0.25, 0.75}));
  EXPECT_FALSE(is_probability_vector(std::vector<double>{0.5, 0.6}));
  EXPECT_FALSE(is_probability_vector(std::vector<double>{-0.1, 1.1}));
  EXPECT_FALSE(is_probability_vector(std::vector<double>{}));
}

}  // namespace
}  // namespace biasmatrix
