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

#include "biasmatrix/errors.hpp"

namespace biasmatrix {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

json to_json(const Message& message) {
  return std::visit(
      Overloaded{
          [](const GenerateRequest& m) {
            json doc = {{"type", "generate"},
                        {"prompt", m.prompt},
                        {"count", m.count},
                        {"seed", m.seed}};
            if (!m.modifiers.empty()) doc["modifiers"] = m.modifiers;
            return doc;
          },
          [](const GenerateResponse& m) {
            return json{{"type", "generated"}, {"image_ids", m.image_ids}};
          },
          [](const AnnotateRequest& m) {
            return json{{"type", "annotate"},
                        {"image_id", m.image_id},
                        {"question", m.question},
                        {"choices", m.choices}};
          },
          [](const AnnotateResponse& m) {
            return json{{"type", "annotated"}, {"answer", m.answer}};
          },
          [](const ErrorResponse& m) {
            return json{{"type", "error"}, {"message", m.message}};
          },
      },
      message);
}

Message message_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) {
    throw BackendError("protocol violation: message without a \"type\" string");
  }
  const auto type = doc["type"].get<std::string>();
  try {
    if (type == "generate") {
      GenerateRequest m;
      m.prompt = doc.at("prompt").get<std::string>();
      m.count = doc.at("count").get<int>();
      m.seed = doc.at("seed").get<std::uint64_t>();
      m.modifiers = doc.value("modifiers", Modifiers{});
      if (m.count <= 0) throw BackendError("protocol violation: count must be positive");
      return m;
    }
    if (type == "generated") {
      return GenerateResponse{doc.at("image_ids").get<std::vector<std::string>>()};
    }
    if (type == "annotate") {
      AnnotateRequest m;
      m.image_id = doc.at("image_id").get<std::string>();
      m.question = doc.at("question").get<std::string>();
      m.choices = doc.value("choices", std::vector<std::string>{});
      return m;
    }
    if (type == "annotated") {
      return AnnotateResponse{doc.at("answer").get<std::string>()};
    }
    if (type == "error") {
      return ErrorResponse{doc.value("message", std::string("unspecified error"))};
    }
  } catch (const json::exception& e) {
    throw BackendError("protocol violation in '" + type + "' message: " + e.what());
  }
  throw BackendError("protocol violation: unknown message type '" + type + "'");
}

std::string serialize_line(const Message& message) { return to_json(message).dump(); }

Message parse_line(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("protocol violation: invalid JSON: ") + e.what());
  }
  return message_from_json(doc);
}

std::string handle_request_line(Backend& backend, std::string_view line) {
  try {
    const Message request = parse_line(line);
    if (const auto* g = std::get_if<GenerateRequest>(&request)) {
      return serialize_line(backend.generate(*g));
    }
    if (const auto* a = std::get_if<AnnotateRequest>(&request)) {
      return serialize_line(backend.annotate(*a));
    }
    return serialize_line(ErrorResponse{"expected a generate or annotate request"});
  } catch (const std::exception& e) {
    return serialize_line(ErrorResponse{e.what()});
  }
}

}  // namespace biasmatrix
