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

#include <gtest/gtest.h>

#include "biasmatrix/errors.hpp"
#include "unit/test_util.hpp"

namespace biasmatrix {
namespace {

// Answers from a fixed question -> answer table; logs every question asked.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::map<std::string, std::string> answers)
      : answers_(std::move(answers)) {}

  GenerateResponse generate(const GenerateRequest& request) override {
    GenerateResponse r;
    for (int i = 0; i < request.count; ++i) {
      r.image_ids.push_back("img-" + std::to_string(100 - next_++));
    }
    return r;
  }
  AnnotateResponse annotate(const AnnotateRequest& request) override {
    asked.push_back(request.question);
    const auto it = answers_.find(request.question);
    return {it == answers_.end() ? std::string(kUnknownAnswer) : it->second};
  }
  std::string id() const override { return "scripted"; }

  std::vector<std::string> asked;

 private:
  std::map<std::string, std::string> answers_;
  int next_ = 0;
};

AuditConfig compound_config() {
  auto c = testutil::small_config();
  BiasAxis d = testutil::axis("disability", {"fit", "blind", "wheelchair"});
  d.sub_questions = {{"blind", "Is the person blind (yes or no)?"},
                     {"wheelchair", "Is the person in a wheelchair (yes or no)?"}};
  d.fallback = "fit";
  c.axes.push_back(d);
  return validate_config(c);
}

std::map<std::string, std::string> base_answers(const AuditConfig& c) {
  return {{kPersonQuestion, kYes},
          {c.axes[0].question, "female"},
          {c.axes[1].question, "old"},
          {c.axes[2].question, "outdoor"}};
}

TEST(GenerateAndAnnotate, PersonQuestionFirstThenAxes) {
  const auto c = compound_config();
  auto answers = base_answers(c);
  answers["Is the person blind (yes or no)?"] = kNo;
  answers["Is the person in a wheelchair (yes or no)?"] = kNo;
  ScriptedBackend b(answers);
  const auto records = generate_and_annotate(initial_prompt_set(c), c.axes, 2, 1, b);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(b.asked[0], kPersonQuestion);
  EXPECT_EQ(b.asked[1], c.axes[0].question);
  EXPECT_EQ(records[0].attributes.at("disability"), "fit");
  EXPECT_EQ(records[0].attributes.at("gender"), "female");
  EXPECT_TRUE(std::is_sorted(records.begin(), records.end(),
                             [](const auto& x, const auto& y) { return x.image_id < y.image_id; }));
}

TEST(GenerateAndAnnotate, CompoundAxisFirstYesWins) {
  const auto c = compound_config();
  auto answers = base_answers(c);
  answers["Is the person blind (yes or no)?"] = kYes;
  answers["Is the person in a wheelchair (yes or no)?"] = kYes;
  ScriptedBackend b(answers);
  const auto records = generate_and_annotate(initial_prompt_set(c), c.axes, 1, 1, b);
  EXPECT_EQ(records[0].attributes.at("disability"), "blind");
  EXPECT_EQ(std::count(b.asked.begin(), b.asked.end(),
                       "Is the person in a wheelchair (yes or no)?"),
            0);
}

TEST(GenerateAndAnnotate, OffListAnswersAreExcluded) {
  const auto c = compound_config();
  auto answers = base_answers(c);
  answers[c.axes[1].question] = "ancient";
  ScriptedBackend b(answers);  // sub-questions answered UNKNOWN
  AnnotationStats stats;
  const auto records = generate_and_annotate(initial_prompt_set(c), c.axes, 3, 1, b, 0, &stats);
  EXPECT_EQ(stats.off_list_answers, 6u);
  EXPECT_EQ(records[0].off_list.at("age"), "ancient");
  EXPECT_EQ(records[0].off_list.at("disability"), kUnknownAnswer);
  EXPECT_FALSE(records[0].attributes.contains("age"));
}

TEST(GenerateAndAnnotate, ImagesWithoutPersonSkipAttributes) {
  const auto c = compound_config();
  auto answers = base_answers(c);
  answers[kPersonQuestion] = kNo;
  ScriptedBackend b(answers);
  AnnotationStats stats;
  const auto records = generate_and_annotate(initial_prompt_set(c), c.axes, 5, 1, b, 0, &stats);
  EXPECT_EQ(stats.without_person, 5u);
  EXPECT_EQ(b.asked.size(), 5u);
  for (const auto& r : records) EXPECT_TRUE(r.attributes.empty());
}

TEST(GenerateAndAnnotate, ShortGenerationIsProtocolViolation) {
  class Short : public ScriptedBackend {
   public:
    Short() : ScriptedBackend({}) {}
    GenerateResponse generate(const GenerateRequest&) override { return {{"only-one"}}; }
  } b;
  const auto c = testutil::small_config();
  EXPECT_THROW(generate_and_annotate(initial_prompt_set(c), c.axes, 3, 1, b, 0), BackendError);
}

TEST(BackendAuditor, EmptyDistributionNamesThePromptSet) {
  const auto c = testutil::small_config();
  auto answers = base_answers(c);
  answers[kPersonQuestion] = kNo;
  ScriptedBackend b(answers);
  BackendAuditor auditor(b, c);
  try {
    auditor.audit_set(initial_prompt_set(c));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("init"), std::string::npos);
  }
}

TEST(AuditPromptSet, AnalyticCoversEveryAxis) {
  auto c = testutil::small_config();
  c.backend.world = {{"mode", "analytic"}};
  auto handle = open_backend("", c, std::nullopt);
  EXPECT_TRUE(handle.analytic);
  EXPECT_EQ(handle.id, "synthetic:analytic");
  const auto audit = audit_prompt_set(c, initial_prompt_set(c), *handle.auditor);
  EXPECT_FALSE(audit.has_records);
  EXPECT_EQ(audit.data.initial.size(), 3u);
  EXPECT_EQ(audit.data.counterfactual.at("age").size(), 3u);
  const auto s = build_matrix(audit.data, c);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (i != j) EXPECT_EQ(s.value(i, j), 0.0);
    }
  }
}

TEST(AuditPromptSet, SampledKeepsRecordsPerCounterfactual) {
  const auto c = testutil::small_config();
  auto handle = open_backend("synthetic:sampled", c, std::nullopt);
  const auto audit = audit_prompt_set(c, initial_prompt_set(c), *handle.auditor);
  EXPECT_TRUE(audit.has_records);
  EXPECT_EQ(audit.records.initial.size(), 48u);
  EXPECT_EQ(audit.records.counterfactual.at("gender").size(), 2u);
  EXPECT_EQ(audit.records.counterfactual.at("gender")[1].size(), 48u);
  for (const auto& r : audit.records.counterfactual.at("gender")[1]) {
    EXPECT_EQ(r.prompt_variant.modifiers.at("gender"), "female");
  }
}

TEST(OpenBackend, FlagValidation) {
  const auto c = testutil::small_config();
  EXPECT_THROW(open_backend("synthetic:dream", c, std::nullopt), ConfigError);
  EXPECT_THROW(open_backend("carrier-pigeon", c, std::nullopt), ConfigError);
  ::unsetenv("BIASMATRIX_ENDPOINT");
  EXPECT_THROW(open_backend("remote", c, std::nullopt), ConfigError);
  testutil::TempDir dir;
  EXPECT_THROW(open_backend("replay:" + dir.path().string(), c, std::nullopt), BackendError);
}

TEST(OpenBackend, RecordsAndReplaysSampledRuns) {
  const auto c = testutil::small_config();
  testutil::TempDir dir;
  Audit recorded;
  {
    auto handle = open_backend("synthetic:sampled", c, dir.path());
    recorded = audit_prompt_set(c, initial_prompt_set(c), *handle.auditor);
  }
  auto replay = open_backend("replay:" + dir.path().string(), c, std::nullopt);
  EXPECT_EQ(replay.id, "replay");
  const auto again = audit_prompt_set(c, initial_prompt_set(c), *replay.auditor);
  EXPECT_EQ(again.records.initial, recorded.records.initial);
  EXPECT_EQ(build_matrix(again.data, c), build_matrix(recorded.data, c));
}

}  // namespace
}  // namespace biasmatrix
