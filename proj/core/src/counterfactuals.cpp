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
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "biasmatrix/errors.hpp"

namespace biasmatrix {

using nlohmann::json;

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_article(std::string_view word) {
  const std::string w = lower(word);
  return w == "a" || w == "an";
}

bool starts_with_vowel(std::string_view word) {
  if (word.empty()) return false;
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word.front())));
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

void fix_articles(std::vector<std::string>& words) {
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if (!is_article(words[i])) continue;
    const bool upper = std::isupper(static_cast<unsigned char>(words[i][0])) != 0;
    std::string article = starts_with_vowel(words[i + 1]) ? "an" : "a";
    if (upper) article[0] = 'A';
    words[i] = std::move(article);
  }
}

struct FragmentParts {
  std::string before;
  std::string after;
};

FragmentParts split_fragment(const std::string& fragment) {
  const auto pos = fragment.find('~');
  if (pos == std::string::npos) return {"", fragment};
  return {fragment.substr(0, pos), fragment.substr(pos + 1)};
}

void append_words(std::vector<std::string>& out, std::string_view text) {
  for (auto& w : split_words(text)) out.push_back(std::move(w));
}

bool forces(const PromptSpec& spec, const std::string& axis_id) {
  return spec.modifiers.contains(axis_id);
}

}  // namespace

std::string Provenance::label() const {
  std::string out;
  if (history.empty()) {
    out = "init";
  } else {
    out = "mit[";
    for (std::size_t i = 0; i < history.size(); ++i) {
      if (i) out += ',';
      out += history[i];
    }
    out += ']';
  }
  if (kind == Kind::kCounterfactual) {
    out += "/cf[" + axis_id + "=" + category + "]";
  }
  return out;
}

PromptSet initial_prompt_set(const AuditConfig& config) {
  PromptSet set;
  set.variants.push_back(PromptSpec{config.base_prompt, {}, 1.0});
  return set;
}

std::string render_prompt(const PromptSpec& spec, std::span<const BiasAxis> axes) {
  const auto base = split_words(spec.base_prompt);
  std::size_t subject_start = 0;
  for (std::size_t i = base.size(); i-- > 0;) {
    if (is_article(base[i])) {
      subject_start = i + 1;
      break;
    }
  }

  std::vector<std::string> pre;
  std::vector<std::string> post;
  for (const auto& [axis_id, category] : spec.modifiers) {
    const auto it = std::find_if(axes.begin(), axes.end(),
                                 [&](const BiasAxis& a) { return a.id == axis_id; });
    if (it == axes.end()) {
      throw DataError("modifier references unknown axis '" + axis_id + "'");
    }
    if (it->index_of(category) == kNotFound) {
      throw DataError("modifier '" + category + "' is not a category of '" +
                      axis_id + "'");
    }
  }
  for (const auto& axis : axes) {
    const auto it = spec.modifiers.find(axis.id);
    if (it == spec.modifiers.end()) continue;
    const auto parts = split_fragment(axis.prompt_fragments[axis.index_of(it->second)]);
    append_words(pre, parts.before);
    append_words(post, parts.after);
  }

  std::vector<std::string> words(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(subject_start));
  words.insert(words.end(), pre.begin(), pre.end());
  words.insert(words.end(), base.begin() + static_cast<std::ptrdiff_t>(subject_start), base.end());
  words.insert(words.end(), post.begin(), post.end());
  fix_articles(words);

  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

CounterfactualExpansion expand_counterfactuals(const PromptSet& base,
                                               const BiasAxis& axis) {
  if (base.variants.empty()) throw DataError("empty prompt set");
  for (const auto& v : base.variants) {
    if (forces(v, axis.id)) {
      throw DataError("conflicting modifier: axis '" + axis.id +
                      "' is already forced in the base prompt set");
    }
  }
  CounterfactualExpansion out;
  out.degenerate = std::adjacent_find(axis.prompt_fragments.begin(),
                                      axis.prompt_fragments.end(),
                                      std::not_equal_to<>()) ==
                   axis.prompt_fragments.end();
  for (const auto& category : axis.categories) {
    PromptSet set;
    set.provenance.kind = Provenance::Kind::kCounterfactual;
    set.provenance.axis_id = axis.id;
    set.provenance.category = category;
    set.provenance.history = base.provenance.history;
    for (const auto& v : base.variants) {
      PromptSpec spec = v;
      spec.modifiers[axis.id] = category;
      set.variants.push_back(std::move(spec));
    }
    out.sets.push_back(std::move(set));
  }
  return out;
}

std::vector<PromptSet> partition_by_axis(const PromptSet& base, const BiasAxis& axis) {
  std::vector<PromptSet> out;
  for (const auto& category : axis.categories) {
    PromptSet set;
    set.provenance.kind = Provenance::Kind::kCounterfactual;
    set.provenance.axis_id = axis.id;
    set.provenance.category = category;
    set.provenance.history = base.provenance.history;
    double total = 0.0;
    for (const auto& v : base.variants) {
      const auto it = v.modifiers.find(axis.id);
      if (it == v.modifiers.end()) {
        throw DataError("cannot partition on '" + axis.id +
                        "': a variant does not force it");
      }
      if (it->second == category) {
        set.variants.push_back(v);
        total += v.weight;
      }
    }
    if (set.variants.empty()) {
      throw DataError("cannot partition on '" + axis.id + "': no variant for '" +
                      category + "'");
    }
    for (auto& v : set.variants) v.weight /= total;
    out.push_back(std::move(set));
  }
  return out;
}

std::vector<PromptSet> counterfactual_sets(const PromptSet& base,
                                           const BiasAxis& axis) {
  const bool all_forced =
      !base.variants.empty() &&
      std::all_of(base.variants.begin(), base.variants.end(),
                  [&](const PromptSpec& v) { return forces(v, axis.id); });
  if (all_forced) return partition_by_axis(base, axis);
  return expand_counterfactuals(base, axis).sets;
}

PromptSet pm_mitigate(const PromptSet& base, const BiasAxis& axis, int image_budget) {
  const auto& history = base.provenance.history;
  if (std::find(history.begin(), history.end(), axis.id) != history.end()) {
    throw DataError("axis '" + axis.id + "' is already mitigated");
  }
  for (const auto& v : base.variants) {
    if (forces(v, axis.id)) {
      throw DataError("conflicting modifier: axis '" + axis.id +
                      "' is already forced in the base prompt set");
    }
  }
  const std::size_t count = base.variants.size() * axis.size();
  if (image_budget <= 0 || count > static_cast<std::size_t>(image_budget)) {
    throw BudgetError("mitigating '" + axis.id + "' needs " + std::to_string(count) +
                      " prompt variants but the image budget is " +
                      std::to_string(image_budget));
  }
  PromptSet out;
  out.provenance.kind = Provenance::Kind::kMitigated;
  out.provenance.history = history;
  out.provenance.history.push_back(axis.id);
  const double share = 1.0 / static_cast<double>(axis.size());
  for (const auto& v : base.variants) {
    for (const auto& category : axis.categories) {
      PromptSpec spec = v;
      spec.modifiers[axis.id] = category;
      spec.weight = v.weight * share;
      out.variants.push_back(std::move(spec));
    }
  }
  return out;
}

std::vector<int> allocate_budget(const PromptSet& set, int budget,
                                 std::span<const BiasAxis> axes) {
  const std::size_t n = set.variants.size();
  if (n == 0) throw DataError("empty prompt set");
  if (budget < static_cast<int>(n)) {
    throw BudgetError("image budget " + std::to_string(budget) + " is smaller than " +
                      std::to_string(n) + " prompt variants");
  }
  double total_weight = 0.0;
  for (const auto& v : set.variants) total_weight += v.weight;

  std::vector<int> counts(n, 0);
  int used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double share = budget * set.variants[i].weight / total_weight;
    counts[i] = static_cast<int>(std::floor(share + 1e-9));
    used += counts[i];
  }

  std::vector<std::string> rendered;
  rendered.reserve(n);
  for (const auto& v : set.variants) rendered.push_back(render_prompt(v, axes));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rendered[a] < rendered[b];
  });
  for (std::size_t k = 0; used < budget; k = (k + 1) % n) {
    ++counts[order[k]];
    ++used;
  }
  for (std::size_t k = 0; used > budget; k = (k + 1) % n) {
    if (counts[order[n - 1 - k]] > 1) {
      --counts[order[n - 1 - k]];
      --used;
    }
  }
  return counts;
}

Question question_for(const BiasAxis& axis) {
  Question q;
  q.choices = axis.categories;
  if (axis.compound()) {
    q.sub_questions = axis.sub_questions;
    q.fallback = axis.fallback;
    for (std::size_t i = 0; i < axis.sub_questions.size(); ++i) {
      if (i) q.text += "; ";
      q.text += axis.sub_questions[i].question;
    }
  } else {
    q.text = axis.question;
  }
  return q;
}

json to_json(const Provenance& provenance) {
  static constexpr const char* kKinds[] = {"initial", "counterfactual", "mitigated"};
  json doc = {{"kind", kKinds[static_cast<int>(provenance.kind)]},
              {"history", provenance.history},
              {"label", provenance.label()}};
  if (provenance.kind == Provenance::Kind::kCounterfactual) {
    doc["axis"] = provenance.axis_id;
    doc["category"] = provenance.category;
  }
  return doc;
}

json to_json(const PromptSet& set, std::span<const BiasAxis> axes) {
  json variants = json::array();
  for (const auto& v : set.variants) {
    json doc = to_json(v);
    doc["prompt"] = render_prompt(v, axes);
    variants.push_back(std::move(doc));
  }
  return {{"provenance", to_json(set.provenance)}, {"variants", std::move(variants)}};
}

}  // namespace biasmatrix
