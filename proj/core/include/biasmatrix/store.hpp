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

// Append-only JSON-lines annotation store and the backends built on it.
// One file per config hash under the store directory; each line is a
// generate or annotate exchange tagged with that hash.

#ifndef BIASMATRIX_STORE_HPP_
#define BIASMATRIX_STORE_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include "biasmatrix/protocol.hpp"

namespace biasmatrix {

std::filesystem::path store_file(const std::filesystem::path& dir,
                                 const std::string& config_hash);

class AnnotationStore {
 public:
  AnnotationStore(const std::filesystem::path& dir, std::string config_hash);

  void record(const GenerateRequest& request, const GenerateResponse& response);
  void record(const AnnotateRequest& request, const AnnotateResponse& response);
  const std::filesystem::path& path() const { return path_; }

 private:
  void append(const std::string& line);

  std::filesystem::path path_;
  std::string config_hash_;
  std::ofstream out_;
};

// Forwards to `inner` and appends every successful exchange to `store`.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(Backend& inner, AnnotationStore& store) : inner_(inner), store_(store) {}

  GenerateResponse generate(const GenerateRequest& request) override;
  AnnotateResponse annotate(const AnnotateRequest& request) override;
  std::string id() const override { return inner_.id(); }

 private:
  Backend& inner_;
  AnnotationStore& store_;
};

// Answers strictly from a stored log; any request not in the log is a
// BackendError. Makes no network or model calls.
class ReplayBackend : public Backend {
 public:
  ReplayBackend(const std::filesystem::path& dir, const std::string& config_hash);

  GenerateResponse generate(const GenerateRequest& request) override;
  AnnotateResponse annotate(const AnnotateRequest& request) override;
  std::string id() const override { return "replay"; }

  std::size_t generate_entries() const { return generated_.size(); }
  std::size_t annotate_entries() const { return answers_.size(); }

 private:
  // (prompt, seed, count) -> ids; first occurrence wins.
  std::map<std::tuple<std::string, std::uint64_t, int>, std::vector<std::string>> generated_;
  // (image id, question) -> answer
  std::map<std::pair<std::string, std::string>, std::string> answers_;
};

}  // namespace biasmatrix

#endif  // BIASMATRIX_STORE_HPP_
