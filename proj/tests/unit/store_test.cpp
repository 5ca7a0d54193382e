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

#include "biasmatrix/store.hpp"

#include <fstream>

#include <gtest/gtest.h>

#include "biasmatrix/errors.hpp"
#include "biasmatrix/synthetic.hpp"
#include "unit/test_util.hpp"

namespace biasmatrix {
namespace {

TEST(Store, RecordThenReplay) {
  testutil::TempDir dir;
  const auto c = testutil::small_config();
  SyntheticBackend live(SyntheticWorld::independent(c.axes));
  GenerateResponse generated;
  AnnotateResponse answered;
  const GenerateRequest g{"A photo of a doctor", 3, 8, {{"gender", "male"}}};
  {
    AnnotationStore store(dir.path(), "cafe");
    RecordingBackend recorder(live, store);
    generated = recorder.generate(g);
    answered = recorder.annotate({generated.image_ids[1], c.axes[1].question, c.axes[1].categories});
    EXPECT_EQ(store.path(), store_file(dir.path(), "cafe"));
  }
  ReplayBackend replay(dir.path(), "cafe");
  EXPECT_EQ(replay.generate(g), generated);
  EXPECT_EQ(replay.annotate({generated.image_ids[1], c.axes[1].question, {}}), answered);
  EXPECT_EQ(replay.generate_entries(), 1u);
  EXPECT_EQ(replay.annotate_entries(), 1u);
  EXPECT_THROW(replay.generate({"A photo of a doctor", 4, 8, {}}), BackendError);
  EXPECT_THROW(replay.annotate({"nope", c.axes[1].question, {}}), BackendError);
}

TEST(Store, AppendOnlyFirstOccurrenceWins) {
  testutil::TempDir dir;
  {
    AnnotationStore store(dir.path(), "beef");
    store.record(AnnotateRequest{"img", "q?", {}}, AnnotateResponse{"first"});
  }
  {
    AnnotationStore store(dir.path(), "beef");
    store.record(AnnotateRequest{"img", "q?", {}}, AnnotateResponse{"second"});
  }
  ReplayBackend replay(dir.path(), "beef");
  EXPECT_EQ(replay.annotate({"img", "q?", {}}).answer, "first");
  std::ifstream in(store_file(dir.path(), "beef"));
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 2);
}

TEST(Store, MissingOrCorruptStoreIsBackendError) {
  testutil::TempDir dir;
  EXPECT_THROW(ReplayBackend(dir.path(), "none"), BackendError);
  std::ofstream(store_file(dir.path(), "bad")) << "{not json\n";
  EXPECT_THROW(ReplayBackend(dir.path(), "bad"), BackendError);
}

TEST(Store, IgnoresLinesOfOtherConfigs) {
  testutil::TempDir dir;
  std::ofstream(store_file(dir.path(), "aaaa"))
      << R"({"type":"annotate","config":"bbbb","image_id":"i","question":"q","answer":"x"})"
      << "\n";
  ReplayBackend replay(dir.path(), "aaaa");
  EXPECT_EQ(replay.annotate_entries(), 0u);
}

}  // namespace
}  // namespace biasmatrix
