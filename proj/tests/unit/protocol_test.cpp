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

#include "biasmatrix/protocol.hpp"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "biasmatrix/errors.hpp"
#include "biasmatrix/synthetic.hpp"

namespace biasmatrix {
namespace {

using nlohmann::json;

TEST(Protocol, MessagesRoundTrip) {
  const std::vector<Message> messages = {
      GenerateRequest{"A photo of a nurse", 4, 9, {{"gender_bias", "male"}}},
      GenerateRequest{"A photo of a nurse", 1, 18446744073709551615ULL, {}},
      GenerateResponse{{"a", "b"}},
      AnnotateRequest{"a", "Is there a person in the image (yes or no)?", {"yes", "no"}},
      AnnotateResponse{kUnknownAnswer},
      ErrorResponse{"boom"},
  };
  for (const auto& m : messages) {
    const auto line = serialize_line(m);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(parse_line(line), m) << line;
  }
}

TEST(Protocol, WireFieldNames) {
  const auto doc = to_json(Message{GenerateRequest{"p", 2, 3, {}}});
  EXPECT_EQ(doc.at("type"), "generate");
  EXPECT_EQ(doc.at("prompt"), "p");
  EXPECT_EQ(doc.at("count"), 2);
  EXPECT_EQ(doc.at("seed"), 3);
  EXPECT_EQ(to_json(Message{AnnotateResponse{"x"}}).at("type"), "annotated");
  EXPECT_EQ(to_json(Message{ErrorResponse{"x"}}).at("message"), "x");
}

TEST(Protocol, ModifiersAreOptional) {
  const auto m = parse_line(R"({"type":"generate","prompt":"p","count":1,"seed":2})");
  EXPECT_TRUE(std::get<GenerateRequest>(m).modifiers.empty());
}

TEST(Protocol, MalformedLinesAreBackendErrors) {
  EXPECT_THROW(parse_line("not json"), BackendError);
  EXPECT_THROW(parse_line("[]"), BackendError);
  EXPECT_THROW(parse_line(R"({"type":"teleport"})"), BackendError);
  EXPECT_THROW(parse_line(R"({"type":"generate","prompt":"p","seed":1})"), BackendError);
  EXPECT_THROW(parse_line(R"({"type":"generate","prompt":"p","count":0,"seed":1})"),
               BackendError);
  EXPECT_THROW(parse_line(R"({"type":"annotated","answer":3})"), BackendError);
}

class ThrowingBackend : public Backend {
 public:
  GenerateResponse generate(const GenerateRequest&) override { throw BackendError("gpu on fire"); }
  AnnotateResponse annotate(const AnnotateRequest&) override { return {"yes"}; }
  std::string id() const override { return "throwing"; }
};

TEST(HandleRequestLine, ErrorsBecomeErrorObjects) {
  ThrowingBackend b;
  auto reply = json::parse(handle_request_line(b, R"({"type":"generate","prompt":"p","count":1,"seed":1})"));
  EXPECT_EQ(reply.at("type"), "error");
  EXPECT_EQ(reply.at("message"), "gpu on fire");
  reply = json::parse(handle_request_line(b, R"({"type":"annotated","answer":"x"})"));
  EXPECT_EQ(reply.at("type"), "error");
  reply = json::parse(handle_request_line(b, R"({"type":"annotate","image_id":"i","question":"q"})"));
  EXPECT_EQ(reply, (json{{"type", "annotated"}, {"answer", "yes"}}));
}

// The golden transcripts are served in-process here; the stdio server is
// checked against the same files by a separate ctest entry.
TEST(GoldenTranscripts, InProcessSyntheticServer) {
  const std::filesystem::path dir = BIASMATRIX_TEST_DATA "/transcripts";
  const auto config = validate_config(load_config(BIASMATRIX_TEST_DATA "/stub_world.json"));
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".jsonl") continue;
    ++files;
    SyntheticBackend server(SyntheticWorld::from_json(config.backend.world, config.axes));
    std::ifstream in(entry.path());
    std::string line;
    std::string request;
    int exchanges = 0;
    while (std::getline(in, line)) {
      if (line.rfind("> ", 0) == 0) {
        request = line.substr(2);
      } else if (line.rfind("< ", 0) == 0) {
        const auto expected = json::parse(line.substr(2));
        const auto actual = json::parse(handle_request_line(server, request));
        if (expected.at("type") == "error") {
          EXPECT_EQ(actual.at("type"), "error") << entry.path() << ": " << request;
          EXPECT_FALSE(actual.at("message").get<std::string>().empty());
        } else {
          EXPECT_EQ(actual, expected) << entry.path() << ": " << request;
        }
        ++exchanges;
      }
    }
    EXPECT_GT(exchanges, 0) << entry.path();
  }
  EXPECT_EQ(files, 4);
}

}  // namespace
}  // namespace biasmatrix
