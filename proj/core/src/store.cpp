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

#include <tuple>

#include "biasmatrix/errors.hpp"

namespace biasmatrix {

using nlohmann::json;

std::filesystem::path store_file(const std::filesystem::path& dir,
                                 const std::string& config_hash) {
  return dir / (config_hash + ".jsonl");
}

AnnotationStore::AnnotationStore(const std::filesystem::path& dir, std::string config_hash)
    : path_(store_file(dir, config_hash)), config_hash_(std::move(config_hash)) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  out_.open(path_, std::ios::app);
  if (!out_) throw BackendError("cannot open annotation store '" + path_.string() + "'");
}

// Flushed per line so a crashed run still leaves a replayable prefix.
void AnnotationStore::append(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw BackendError("write to annotation store '" + path_.string() + "' failed");
}

void AnnotationStore::record(const GenerateRequest& request,
                             const GenerateResponse& response) {
  json line = to_json(Message{request});
  line["config"] = config_hash_;
  line["image_ids"] = response.image_ids;
  append(line.dump());
}

void AnnotationStore::record(const AnnotateRequest& request,
                             const AnnotateResponse& response) {
  json line = to_json(Message{request});
  line["config"] = config_hash_;
  line["answer"] = response.answer;
  append(line.dump());
}

GenerateResponse RecordingBackend::generate(const GenerateRequest& request) {
  auto response = inner_.generate(request);
  store_.record(request, response);
  return response;
}

AnnotateResponse RecordingBackend::annotate(const AnnotateRequest& request) {
  auto response = inner_.annotate(request);
  store_.record(request, response);
  return response;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& dir,
                             const std::string& config_hash) {
  const auto path = store_file(dir, config_hash);
  std::ifstream in(path);
  if (!in) throw BackendError("no annotation store at '" + path.string() + "'");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json doc = json::parse(line);
      if (doc.value("config", std::string{}) != config_hash) continue;
      const auto type = doc.at("type").get<std::string>();
      if (type == "generate") {
        generated_.try_emplace(
            {doc.at("prompt").get<std::string>(), doc.at("seed").get<std::uint64_t>(),
             doc.at("count").get<int>()},
            doc.at("image_ids").get<std::vector<std::string>>());
      } else if (type == "annotate") {
        answers_.try_emplace(
            {doc.at("image_id").get<std::string>(), doc.at("question").get<std::string>()},
            doc.at("answer").get<std::string>());
      }
    } catch (const json::exception& e) {
      throw BackendError(path.string() + ":" + std::to_string(number) +
                         ": malformed store line: " + e.what());
    }
  }
}

GenerateResponse ReplayBackend::generate(const GenerateRequest& request) {
  const auto it = generated_.find({request.prompt, request.seed, request.count});
  if (it == generated_.end()) {
    throw BackendError("replay miss: no stored generation for '" + request.prompt + "'");
  }
  return {it->second};
}

AnnotateResponse ReplayBackend::annotate(const AnnotateRequest& request) {
  const auto it = answers_.find({request.image_id, request.question});
  if (it == answers_.end()) {
    throw BackendError("replay miss: no stored answer for image '" + request.image_id + "'");
  }
  return {it->second};
}

}  // namespace biasmatrix
