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

// Wire protocol between the audit engine and image generation / annotation
// backends. Every message is one UTF-8 JSON object per line with a "type"
// member:
//
//   {"type":"generate","prompt":..,"count":N,"seed":S,"modifiers":{..}}
//   {"type":"generated","image_ids":[..]}
//   {"type":"annotate","image_id":..,"question":..,"choices":[..]}
//   {"type":"annotated","answer":..}
//   {"type":"error","message":..}
//
// "modifiers" is an optional hint naming the attributes the prompt forces;
// model-backed servers may ignore it. Over HTTP the request objects are
// POSTed to /generate and /annotate and the response is the body.

#ifndef BIASMATRIX_PROTOCOL_HPP_
#define BIASMATRIX_PROTOCOL_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasmatrix/model.hpp"

namespace biasmatrix {

inline constexpr char kUnknownAnswer[] = "UNKNOWN";

struct GenerateRequest {
  std::string prompt;
  int count = 0;
  std::uint64_t seed = 0;
  Modifiers modifiers;

  friend bool operator==(const GenerateRequest&, const GenerateRequest&) = default;
};

struct GenerateResponse {
  std::vector<std::string> image_ids;

  friend bool operator==(const GenerateResponse&, const GenerateResponse&) = default;
};

struct AnnotateRequest {
  std::string image_id;
  std::string question;
  std::vector<std::string> choices;

  friend bool operator==(const AnnotateRequest&, const AnnotateRequest&) = default;
};

struct AnnotateResponse {
  std::string answer;

  friend bool operator==(const AnnotateResponse&, const AnnotateResponse&) = default;
};

struct ErrorResponse {
  std::string message;

  friend bool operator==(const ErrorResponse&, const ErrorResponse&) = default;
};

using Message = std::variant<GenerateRequest, GenerateResponse, AnnotateRequest,
                             AnnotateResponse, ErrorResponse>;

nlohmann::json to_json(const Message& message);
// Throws BackendError on anything that is not a well-formed message.
Message message_from_json(const nlohmann::json& doc);
std::string serialize_line(const Message& message);
Message parse_line(std::string_view line);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenerateResponse generate(const GenerateRequest& request) = 0;
  virtual AnnotateResponse annotate(const AnnotateRequest& request) = 0;
  // Short identifier recorded in run manifests.
  virtual std::string id() const = 0;
};

// Server-side dispatch of one request line. Malformed requests and backend
// failures become error objects; the caller keeps the connection open.
std::string handle_request_line(Backend& backend, std::string_view line);

}  // namespace biasmatrix

#endif  // BIASMATRIX_PROTOCOL_HPP_
