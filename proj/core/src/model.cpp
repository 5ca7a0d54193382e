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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "biasmatrix/errors.hpp"
#include "biasmatrix/hashing.hpp"

namespace biasmatrix {

using nlohmann::json;

std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  h = fnv1a64("/", h);
  return fnv1a64(label, h);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling keeps the draw unbiased for any n.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::size_t BiasAxis::index_of(std::string_view category) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == category) return i;
  }
  return kNotFound;
}

std::size_t SensitivityMatrix::row_index(std::string_view axis_id) const {
  for (std::size_t i = 0; i < row_axes.size(); ++i) {
    if (row_axes[i] == axis_id) return i;
  }
  return kNotFound;
}

std::size_t SensitivityMatrix::col_index(std::string_view axis_id) const {
  for (std::size_t i = 0; i < col_axes.size(); ++i) {
    if (col_axes[i] == axis_id) return i;
  }
  return kNotFound;
}

std::string_view to_string(Transport transport) {
  return transport == Transport::kOrdinal ? "ordinal" : "nominal";
}

Transport parse_transport(std::string_view text) {
  if (text == "ordinal") return Transport::kOrdinal;
  if (text == "nominal") return Transport::kNominal;
  throw ConfigError("unknown transport mode '" + std::string(text) +
                    "' (expected ordinal or nominal)");
}

const BiasAxis& AuditConfig::axis(std::string_view id) const {
  const std::size_t i = axis_index(id);
  if (i == kNotFound) throw ConfigError("unknown axis '" + std::string(id) + "'");
  return axes[i];
}

std::size_t AuditConfig::axis_index(std::string_view id) const {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i].id == id) return i;
  }
  return kNotFound;
}

bool is_probability_vector(std::span<const double> probs, double tolerance) {
  if (probs.empty()) return false;
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tolerance;
}

std::vector<double> uniform_probs(std::size_t k) {
  return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

namespace {

std::string choice_list(const std::vector<std::string>& categories) {
  std::string out = "(";
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (i) out += ", ";
    out += categories[i];
  }
  return out + ")";
}

void check_axis(const BiasAxis& axis, std::vector<std::string>& problems) {
  const std::string where = "axis '" + axis.id + "': ";
  if (axis.id.empty()) problems.push_back("axis with empty id");
  if (axis.categories.size() < 2) {
    problems.push_back(where + "axis needs >= 2 categories");
  }
  std::set<std::string> seen;
  for (const auto& c : axis.categories) {
    if (c.empty()) problems.push_back(where + "empty category label");
    if (!seen.insert(c).second) {
      problems.push_back(where + "duplicate category '" + c + "'");
    }
  }
  if (axis.prompt_fragments.size() != axis.categories.size()) {
    problems.push_back(where + "category/fragment arity mismatch (" +
                       std::to_string(axis.categories.size()) + " categories, " +
                       std::to_string(axis.prompt_fragments.size()) +
                       " fragments)");
  }
  if (axis.compound()) {
    if (axis.index_of(axis.fallback) == kNotFound) {
      problems.push_back(where + "fallback '" + axis.fallback +
                         "' is not a category");
    }
    std::set<std::string> covered{axis.fallback};
    for (const auto& sub : axis.sub_questions) {
      if (axis.index_of(sub.category) == kNotFound) {
        problems.push_back(where + "sub-question category '" + sub.category +
                           "' is not a category");
      }
      if (sub.question.empty()) {
        problems.push_back(where + "empty sub-question");
      }
      if (!covered.insert(sub.category).second) {
        problems.push_back(where + "category '" + sub.category +
                           "' assigned twice");
      }
    }
    if (covered.size() != axis.categories.size()) {
      problems.push_back(where +
                         "sub-questions plus fallback must cover every category");
    }
  } else if (!axis.question.empty() &&
             axis.question.find(choice_list(axis.categories)) ==
                 std::string::npos) {
    problems.push_back(where + "question must list the choices " +
                       choice_list(axis.categories));
  }
}

}  // namespace

AuditConfig validate_config(AuditConfig config) {
  std::vector<std::string> problems;
  if (config.base_prompt.empty()) problems.push_back("base_prompt is empty");
  if (config.axes.empty()) problems.push_back("no axes declared");

  std::set<std::string> ids;
  std::size_t max_k = 0;
  for (auto& axis : config.axes) {
    if (!ids.insert(axis.id).second) {
      problems.push_back("duplicate axis id '" + axis.id + "'");
    }
    check_axis(axis, problems);
    max_k = std::max(max_k, axis.categories.size());
    if (!axis.compound() && axis.question.empty()) {
      std::string name = axis.id;
      if (const auto pos = name.rfind("_bias");
          pos != std::string::npos && pos + 5 == name.size()) {
        name.resize(pos);
      }
      axis.question = "What is the " + name + " " + choice_list(axis.categories) +
                      " of the person?";
    }
  }

  for (const auto& [axis_id, ideal] : config.ideal) {
    const std::size_t i = config.axis_index(axis_id);
    if (i == kNotFound) {
      problems.push_back("ideal references unknown axis '" + axis_id + "'");
      continue;
    }
    if (ideal.axis_id != axis_id) {
      problems.push_back("ideal for '" + axis_id + "' carries axis id '" +
                         ideal.axis_id + "'");
    }
    if (ideal.probs.size() != config.axes[i].size()) {
      problems.push_back("ideal for '" + axis_id + "' has " +
                         std::to_string(ideal.probs.size()) +
                         " entries, axis has " +
                         std::to_string(config.axes[i].size()));
    } else if (!is_probability_vector(ideal.probs)) {
      problems.push_back("ideal for '" + axis_id +
                         "' is not a probability vector");
    }
  }

  for (const auto& [axis_id, weight] : config.priority) {
    if (config.axis_index(axis_id) == kNotFound) {
      problems.push_back("priority references unknown axis '" + axis_id + "'");
    }
    if (!(weight >= 0.0) || !std::isfinite(weight)) {
      problems.push_back("priority weight for '" + axis_id +
                         "' must be a non-negative number");
    }
  }

  if (config.image_budget <= 0) {
    problems.push_back("image_budget must be positive");
  } else if (static_cast<std::size_t>(config.image_budget) < max_k) {
    problems.push_back("image_budget " + std::to_string(config.image_budget) +
                       " is smaller than the largest axis (" +
                       std::to_string(max_k) + " categories)");
  }
  if (!(config.epsilon > 0.0 && config.epsilon < 1.0)) {
    problems.push_back("epsilon must lie in (0, 1)");
  }
  const auto& kind = config.backend.kind;
  if (kind != "synthetic" && kind != "replay" && kind != "remote") {
    problems.push_back("unknown backend kind '" + kind + "'");
  }
  if (config.backend.retries < 0) {
    problems.push_back("backend retries must be >= 0");
  }

  if (!problems.empty()) {
    std::string message = "invalid config:";
    for (const auto& p : problems) message += "\n  - " + p;
    throw ConfigError(message);
  }

  for (const auto& axis : config.axes) {
    if (!config.ideal.contains(axis.id)) {
      config.ideal[axis.id] = IdealDistribution{axis.id, uniform_probs(axis.size())};
    }
  }
  return config;
}

// --- JSON ------------------------------------------------------------------

json to_json(const BiasAxis& axis) {
  json doc = {{"id", axis.id},
              {"categories", axis.categories},
              {"fragments", axis.prompt_fragments},
              {"question", axis.question},
              {"ordinal", axis.ordinal}};
  if (axis.compound()) {
    json subs = json::array();
    for (const auto& s : axis.sub_questions) {
      subs.push_back({{"category", s.category}, {"question", s.question}});
    }
    doc["sub_questions"] = std::move(subs);
    doc["fallback"] = axis.fallback;
  }
  return doc;
}

BiasAxis axis_from_json(const json& doc) {
  try {
    BiasAxis axis;
    axis.id = doc.at("id").get<std::string>();
    axis.categories = doc.at("categories").get<std::vector<std::string>>();
    axis.prompt_fragments =
        doc.value("fragments", std::vector<std::string>{});
    axis.question = doc.value("question", std::string{});
    axis.ordinal = doc.value("ordinal", true);
    if (doc.contains("sub_questions")) {
      for (const auto& s : doc.at("sub_questions")) {
        axis.sub_questions.push_back(
            {s.at("category").get<std::string>(), s.at("question").get<std::string>()});
      }
      axis.fallback = doc.at("fallback").get<std::string>();
    }
    return axis;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed axis: ") + e.what());
  }
}

json to_json(const PromptSpec& spec) {
  return {{"base_prompt", spec.base_prompt},
          {"modifiers", spec.modifiers},
          {"weight", spec.weight}};
}

PromptSpec prompt_spec_from_json(const json& doc) {
  PromptSpec spec;
  spec.base_prompt = doc.at("base_prompt").get<std::string>();
  spec.modifiers = doc.value("modifiers", Modifiers{});
  spec.weight = doc.value("weight", 1.0);
  return spec;
}

json to_json(const AnnotationRecord& record) {
  json doc = {{"image_id", record.image_id},
              {"prompt_variant", to_json(record.prompt_variant)},
              {"person_present", record.person_present},
              {"attributes", record.attributes}};
  if (!record.off_list.empty()) doc["off_list"] = record.off_list;
  return doc;
}

AnnotationRecord record_from_json(const json& doc) {
  AnnotationRecord record;
  record.image_id = doc.at("image_id").get<std::string>();
  record.prompt_variant = prompt_spec_from_json(doc.at("prompt_variant"));
  record.person_present = doc.at("person_present").get<bool>();
  record.attributes =
      doc.value("attributes", std::map<std::string, std::string>{});
  record.off_list = doc.value("off_list", std::map<std::string, std::string>{});
  return record;
}

json to_json(const AuditConfig& config) {
  json axes = json::array();
  for (const auto& axis : config.axes) axes.push_back(to_json(axis));
  json ideal = json::object();
  for (const auto& [id, d] : config.ideal) ideal[id] = d.probs;
  json backend = {{"kind", config.backend.kind},
                  {"endpoint", config.backend.endpoint},
                  {"retries", config.backend.retries},
                  {"timeout_ms", config.backend.timeout_ms},
                  {"world", config.backend.world}};
  json doc = {{"base_prompt", config.base_prompt},
              {"axes", std::move(axes)},
              {"ideal", std::move(ideal)},
              {"image_budget", config.image_budget},
              {"seed", config.seed},
              {"epsilon", config.epsilon},
              {"transport", std::string(to_string(config.transport))},
              {"backend", std::move(backend)}};
  if (!config.priority.empty()) doc["priority"] = config.priority;
  return doc;
}

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

AuditConfig config_from_json(const json& doc,
                             const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  AuditConfig config;
  try {
    if (doc.contains("axis_bank")) {
      auto bank_path = std::filesystem::path(doc.at("axis_bank").get<std::string>());
      if (bank_path.is_relative()) bank_path = base_dir / bank_path;
      const json bank = read_json_file(bank_path);
      std::vector<std::string> wanted;
      if (doc.contains("axis_ids")) {
        wanted = doc.at("axis_ids").get<std::vector<std::string>>();
      }
      std::vector<BiasAxis> bank_axes;
      for (const auto& a : bank.at("axes")) bank_axes.push_back(axis_from_json(a));
      if (wanted.empty()) {
        config.axes = std::move(bank_axes);
      } else {
        for (const auto& id : wanted) {
          auto it = std::find_if(bank_axes.begin(), bank_axes.end(),
                                 [&](const BiasAxis& a) { return a.id == id; });
          if (it == bank_axes.end()) {
            throw ConfigError("axis '" + id + "' not in bank " + bank_path.string());
          }
          config.axes.push_back(*it);
        }
      }
    }
    if (doc.contains("axes")) {
      for (const auto& a : doc.at("axes")) {
        BiasAxis axis = axis_from_json(a);
        auto it = std::find_if(config.axes.begin(), config.axes.end(),
                               [&](const BiasAxis& b) { return b.id == axis.id; });
        if (it != config.axes.end() && doc.contains("axis_bank")) {
          *it = std::move(axis);
        } else {
          config.axes.push_back(std::move(axis));
        }
      }
    }
    config.base_prompt = doc.value("base_prompt", std::string{});
    if (doc.contains("ideal")) {
      for (const auto& [id, probs] : doc.at("ideal").items()) {
        config.ideal[id] = IdealDistribution{id, probs.get<std::vector<double>>()};
      }
    }
    config.image_budget = doc.value("image_budget", kDefaultImageBudget);
    config.seed = doc.value("seed", std::uint64_t{0});
    config.epsilon = doc.value("epsilon", kDefaultEpsilon);
    config.transport = parse_transport(doc.value("transport", std::string("ordinal")));
    if (doc.contains("backend")) {
      const json& b = doc.at("backend");
      config.backend.kind = b.value("kind", std::string("synthetic"));
      config.backend.endpoint = b.value("endpoint", std::string{});
      config.backend.retries = b.value("retries", 2);
      config.backend.timeout_ms = b.value("timeout_ms", 60000);
      config.backend.world = b.value("world", json::object());
    }
    if (doc.contains("priority")) {
      config.priority = doc.at("priority").get<std::map<std::string, double>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return config;
}

AuditConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

std::string config_hash(const AuditConfig& config) {
  return to_hex(fnv1a64(to_json(config).dump()));
}

std::map<std::string, IdealDistribution> load_ideals(
    const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw ConfigError("ideal file must be a JSON object");
  std::map<std::string, IdealDistribution> out;
  try {
    for (const auto& [id, probs] : doc.items()) {
      out[id] = IdealDistribution{id, probs.get<std::vector<double>>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ideal file: ") + e.what());
  }
  return out;
}

}  // namespace biasmatrix
