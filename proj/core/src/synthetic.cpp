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

#include "biasmatrix/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "biasmatrix/errors.hpp"
#include "biasmatrix/hashing.hpp"

namespace biasmatrix {

using nlohmann::json;

namespace {

std::vector<std::size_t> make_strides(const std::vector<BiasAxis>& axes) {
  std::vector<std::size_t> strides(axes.size(), 1);
  for (std::size_t i = axes.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * axes[i].size();
  }
  return strides;
}

std::size_t total_cells(const std::vector<BiasAxis>& axes) {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.size();
  return n;
}

void normalize_or_throw(std::vector<double>& table, const char* what) {
  double total = 0.0;
  for (double p : table) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ConfigError(std::string(what) + " has a negative or non-finite entry");
    }
    total += p;
  }
  if (total <= 0.0) throw ConfigError(std::string(what) + " has zero total mass");
  for (double& p : table) p /= total;
}

}  // namespace

SyntheticWorld::SyntheticWorld(std::vector<BiasAxis> axes, std::vector<double> joint,
                               double compliance, double person_rate, Mode mode,
                               std::vector<std::vector<std::size_t>> components)
    : axes_(std::move(axes)),
      joint_(std::move(joint)),
      strides_(make_strides(axes_)),
      compliance_(compliance),
      person_rate_(person_rate),
      mode_(mode) {
  if (axes_.empty()) throw ConfigError("synthetic world needs at least one axis");
  if (joint_.size() != total_cells(axes_)) {
    throw ConfigError("synthetic joint has " + std::to_string(joint_.size()) +
                      " cells, expected " + std::to_string(total_cells(axes_)));
  }
  if (!is_probability_vector(joint_)) {
    throw ConfigError("synthetic joint is not a probability vector");
  }
  if (!(compliance_ >= 0.0 && compliance_ <= 1.0)) {
    throw ConfigError("compliance must lie in [0, 1]");
  }
  if (!(person_rate_ >= 0.0 && person_rate_ <= 1.0)) {
    throw ConfigError("person_rate must lie in [0, 1]");
  }

  if (components.empty()) {
    components.emplace_back();
    for (std::size_t a = 0; a < axes_.size(); ++a) components.back().push_back(a);
  }
  component_of_.assign(axes_.size(), kNotFound);
  for (auto& comp : components) {
    if (comp.empty()) throw ConfigError("empty synthetic world component");
    std::sort(comp.begin(), comp.end());
    for (std::size_t a : comp) {
      if (a >= axes_.size() || component_of_[a] != kNotFound) {
        throw ConfigError("synthetic world components must partition the axes");
      }
      component_of_[a] = 0;
    }
  }
  if (std::find(component_of_.begin(), component_of_.end(), kNotFound) != component_of_.end()) {
    throw ConfigError("synthetic world components must partition the axes");
  }
  std::sort(components.begin(), components.end());
  components_ = std::move(components);

  for (std::size_t f = 0; f < components_.size(); ++f) {
    Component comp;
    comp.axes = components_[f];
    comp.strides.assign(comp.axes.size(), 1);
    std::size_t size = 1;
    for (std::size_t i = comp.axes.size(); i-- > 0;) {
      comp.strides[i] = size;
      size *= axes_[comp.axes[i]].size();
    }
    comp.table.assign(size, 0.0);
    for (std::size_t c = 0; c < joint_.size(); ++c) {
      std::size_t idx = 0;
      for (std::size_t i = 0; i < comp.axes.size(); ++i) {
        idx += category_of(c, comp.axes[i]) * comp.strides[i];
      }
      comp.table[idx] += joint_[c];
    }
    for (std::size_t a : comp.axes) component_of_[a] = f;
    factors_.push_back(std::move(comp));
  }
  if (factors_.size() > 1) {
    for (std::size_t c = 0; c < joint_.size(); ++c) {
      double product = 1.0;
      for (const auto& comp : factors_) {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < comp.axes.size(); ++i) {
          idx += category_of(c, comp.axes[i]) * comp.strides[i];
        }
        product *= comp.table[idx];
      }
      if (std::abs(product - joint_[c]) > 1e-12) {
        throw ConfigError("synthetic joint does not factor over the given components");
      }
    }
  }
  marginals_.resize(axes_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) marginals_[a].assign(axes_[a].size(), 0.0);
  for (const auto& comp : factors_) component_marginals(comp, {}, 1.0, marginals_);
}

void SyntheticWorld::component_marginals(
    const Component& comp, std::span<const std::pair<std::size_t, std::size_t>> forced,
    double weight, std::vector<std::vector<double>>& out) const {
  auto category = [&](std::size_t idx, std::size_t i) {
    return (idx / comp.strides[i]) % axes_[comp.axes[i]].size();
  };
  auto matches = [&](std::size_t idx) {
    for (const auto& [a, k] : forced) {
      const auto i = static_cast<std::size_t>(
          std::find(comp.axes.begin(), comp.axes.end(), a) - comp.axes.begin());
      if (category(idx, i) != k) return false;
    }
    return true;
  };
  double mass = 0.0;
  for (std::size_t idx = 0; idx < comp.table.size(); ++idx) {
    if (matches(idx)) mass += comp.table[idx];
  }
  if (mass <= 0.0) {
    std::string what;
    for (const auto& [a, k] : forced) {
      what += " " + axes_[a].id + "=" + axes_[a].categories[k];
    }
    throw DataError("modifier combination absent from joint support:" + what);
  }
  for (std::size_t idx = 0; idx < comp.table.size(); ++idx) {
    if (comp.table[idx] == 0.0 || !matches(idx)) continue;
    const double p = comp.table[idx] / mass;
    for (std::size_t i = 0; i < comp.axes.size(); ++i) {
      out[comp.axes[i]][category(idx, i)] += weight * p;
    }
  }
}

SyntheticWorld SyntheticWorld::independent(
    std::vector<BiasAxis> axes, const std::map<std::string, std::vector<double>>& marginals) {
  json doc = {{"marginals", marginals}};
  return from_json(doc, std::move(axes));
}

SyntheticWorld SyntheticWorld::from_json(const json& doc, std::vector<BiasAxis> axes) {
  if (!doc.is_object()) throw ConfigError("synthetic world must be a JSON object");
  const auto strides = make_strides(axes);
  const std::size_t cells = total_cells(axes);
  auto find_axis = [&](const std::string& id) {
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i].id == id) return i;
    }
    throw ConfigError("synthetic world references unknown axis '" + id + "'");
  };

  std::vector<double> joint;
  // Union-find over coupled axes gives the components the joint factors over.
  std::vector<std::size_t> parent(axes.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  try {
    if (doc.contains("table")) {
      if (doc.contains("components")) {
        for (const auto& group : doc.at("components")) {
          const auto ids = group.get<std::vector<std::string>>();
          for (std::size_t i = 1; i < ids.size(); ++i) {
            parent[root(find_axis(ids[i]))] = root(find_axis(ids[0]));
          }
        }
      } else {
        for (std::size_t i = 1; i < axes.size(); ++i) parent[root(i)] = root(0);
      }
      joint = doc.at("table").get<std::vector<double>>();
      if (joint.size() != cells) {
        throw ConfigError("synthetic table has " + std::to_string(joint.size()) +
                          " cells, expected " + std::to_string(cells));
      }
      normalize_or_throw(joint, "synthetic table");
    } else {
      joint.assign(cells, 1.0);
      if (doc.contains("marginals")) {
        for (const auto& [id, value] : doc.at("marginals").items()) {
          const std::size_t a = find_axis(id);
          auto probs = value.get<std::vector<double>>();
          if (probs.size() != axes[a].size()) {
            throw ConfigError("marginal for '" + id + "' has wrong length");
          }
          normalize_or_throw(probs, "marginal");
          for (std::size_t c = 0; c < cells; ++c) {
            joint[c] *= probs[(c / strides[a]) % axes[a].size()];
          }
        }
      }
      if (doc.contains("couplings")) {
        for (const auto& coupling : doc.at("couplings")) {
          const auto ids = coupling.at("axes").get<std::vector<std::string>>();
          if (ids.size() != 2) throw ConfigError("a coupling joins exactly two axes");
          const std::size_t a = find_axis(ids[0]);
          const std::size_t b = find_axis(ids[1]);
          if (a == b) throw ConfigError("a coupling needs two distinct axes");
          parent[root(b)] = root(a);
          const auto weights = coupling.at("weights").get<std::vector<std::vector<double>>>();
          if (weights.size() != axes[a].size()) {
            throw ConfigError("coupling weights have wrong row count");
          }
          for (const auto& row : weights) {
            if (row.size() != axes[b].size()) {
              throw ConfigError("coupling weights have wrong column count");
            }
            for (double w : row) {
              if (!std::isfinite(w) || w < 0.0) {
                throw ConfigError("coupling weights must be non-negative");
              }
            }
          }
          for (std::size_t c = 0; c < cells; ++c) {
            joint[c] *= weights[(c / strides[a]) % axes[a].size()]
                               [(c / strides[b]) % axes[b].size()];
          }
        }
      }
      normalize_or_throw(joint, "synthetic joint");
    }
    const std::string mode = doc.value("mode", std::string("sampled"));
    if (mode != "sampled" && mode != "analytic") {
      throw ConfigError("synthetic mode must be 'sampled' or 'analytic'");
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < axes.size(); ++i) groups[root(i)].push_back(i);
    std::vector<std::vector<std::size_t>> components;
    for (auto& [r, members] : groups) components.push_back(std::move(members));
    return SyntheticWorld(std::move(axes), std::move(joint), doc.value("compliance", 1.0),
                          doc.value("person_rate", 1.0),
                          mode == "analytic" ? Mode::kAnalytic : Mode::kSampled,
                          std::move(components));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed synthetic world: ") + e.what());
  }
}

json SyntheticWorld::to_json() const {
  return {{"mode", mode_ == Mode::kAnalytic ? "analytic" : "sampled"},
          {"compliance", compliance_},
          {"person_rate", person_rate_},
          {"table", joint_},
          {"components", [&] {
             json groups = json::array();
             for (const auto& comp : components_) {
               json ids = json::array();
               for (std::size_t a : comp) ids.push_back(axes_[a].id);
               groups.push_back(std::move(ids));
             }
             return groups;
           }()}};
}

std::size_t SyntheticWorld::axis_index(std::string_view id) const {
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (axes_[i].id == id) return i;
  }
  return kNotFound;
}

std::vector<std::pair<std::size_t, std::size_t>> SyntheticWorld::resolve(
    const Modifiers& modifiers) const {
  std::vector<std::pair<std::size_t, std::size_t>> forced;
  for (const auto& [axis_id, category] : modifiers) {
    const std::size_t a = axis_index(axis_id);
    if (a == kNotFound) {
      throw DataError("modifier axis '" + axis_id + "' is not part of the world");
    }
    const std::size_t c = axes_[a].index_of(category);
    if (c == kNotFound) {
      throw DataError("modifier category '" + category + "' absent from the support of '" +
                      axis_id + "'");
    }
    forced.emplace_back(a, c);
  }
  std::sort(forced.begin(), forced.end());
  return forced;
}

std::vector<double> SyntheticWorld::conditional(
    std::span<const std::pair<std::size_t, std::size_t>> forced) const {
  std::vector<double> table(joint_.size(), 0.0);
  double mass = 0.0;
  for (std::size_t c = 0; c < joint_.size(); ++c) {
    bool match = true;
    for (const auto& [a, k] : forced) {
      if (category_of(c, a) != k) {
        match = false;
        break;
      }
    }
    if (match) {
      table[c] = joint_[c];
      mass += joint_[c];
    }
  }
  if (mass <= 0.0) {
    std::string what;
    for (const auto& [a, k] : forced) {
      what += " " + axes_[a].id + "=" + axes_[a].categories[k];
    }
    throw DataError("modifier combination absent from joint support:" + what);
  }
  for (double& p : table) p /= mass;
  return table;
}

std::vector<std::vector<double>> SyntheticWorld::variant_marginals(
    const Modifiers& modifiers) const {
  const auto forced = resolve(modifiers);
  std::vector<std::vector<double>> out(axes_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) out[a].assign(axes_[a].size(), 0.0);

  std::vector<std::pair<std::size_t, std::size_t>> local;
  std::vector<std::pair<std::size_t, std::size_t>> honored;
  for (std::size_t f = 0; f < factors_.size(); ++f) {
    const Component& comp = factors_[f];
    local.clear();
    for (const auto& pair : forced) {
      if (component_of_[pair.first] == f) local.push_back(pair);
    }
    // Modifiers outside a component leave its marginals untouched.
    if (local.empty()) {
      for (std::size_t a : comp.axes) out[a] = marginals_[a];
      continue;
    }
    const std::size_t m = local.size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
      honored.clear();
      for (std::size_t i = 0; i < m; ++i) {
        if (mask & (std::size_t{1} << i)) honored.push_back(local[i]);
      }
      const double h = static_cast<double>(honored.size());
      const double weight = std::pow(compliance_, h) *
                            std::pow(1.0 - compliance_, static_cast<double>(m) - h);
      if (weight == 0.0) continue;
      component_marginals(comp, honored, weight, out);
    }
  }
  return out;
}

AttributeDistribution analytic_distribution(const SyntheticWorld& world,
                                            const PromptSet& prompt_set,
                                            const BiasAxis& axis) {
  const std::size_t a = world.axis_index(axis.id);
  if (a == kNotFound) {
    throw DataError("axis '" + axis.id + "' is not part of the synthetic world");
  }
  if (prompt_set.variants.empty()) throw DataError("empty prompt set");
  std::vector<double> probs(axis.size(), 0.0);
  std::vector<double> first;
  bool identical = true;
  double total = 0.0;
  for (const auto& v : prompt_set.variants) {
    const auto marginals = world.variant_marginals(v.modifiers);
    if (first.empty()) {
      first = marginals[a];
    } else if (marginals[a] != first) {
      identical = false;
    }
    for (std::size_t k = 0; k < probs.size(); ++k) probs[k] += v.weight * marginals[a][k];
    total += v.weight;
  }
  // A mixture of equal marginals is that marginal; skip the rounding.
  if (identical) return AttributeDistribution{axis.id, std::move(first), 0};
  for (double& p : probs) p /= total;
  return AttributeDistribution{axis.id, std::move(probs), 0};
}

// --- backend ---------------------------------------------------------------

SyntheticBackend::SyntheticBackend(SyntheticWorld world) : world_(std::move(world)) {
  const auto& axes = world_.axes();
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (axes[a].compound()) {
      for (const auto& sub : axes[a].sub_questions) {
        questions_[sub.question] = QuestionTarget{a, axes[a].index_of(sub.category)};
      }
    } else {
      questions_[axes[a].question] = QuestionTarget{a, kNotFound};
    }
  }
}

const std::vector<double>& SyntheticBackend::cdf_for(
    const std::vector<std::pair<std::size_t, std::size_t>>& honored) {
  auto it = cdf_cache_.find(honored);
  if (it != cdf_cache_.end()) return it->second;
  auto table = world_.conditional(honored);
  double running = 0.0;
  for (double& p : table) {
    running += p;
    p = running;
  }
  return cdf_cache_.emplace(honored, std::move(table)).first->second;
}

GenerateResponse SyntheticBackend::generate(const GenerateRequest& request) {
  if (request.count <= 0) throw BackendError("count must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> forced;
  try {
    forced = world_.resolve(request.modifiers);
    cdf_for(forced);
  } catch (const DataError& e) {
    throw BackendError(e.what());
  }
  const std::string key = request.prompt + "|" + json(request.modifiers).dump();
  Rng rng(derive_seed(request.seed, key));
  GenerateResponse response;
  std::vector<std::pair<std::size_t, std::size_t>> honored;
  for (int i = 0; i < request.count; ++i) {
    Image image;
    image.person = rng.bernoulli(world_.person_rate());
    honored.clear();
    for (const auto& f : forced) {
      if (rng.bernoulli(world_.compliance())) honored.push_back(f);
    }
    const std::vector<double>* cdf = nullptr;
    try {
      cdf = &cdf_for(honored);
    } catch (const DataError& e) {
      throw BackendError(e.what());
    }
    const double u = rng.uniform() * cdf->back();
    const auto pos = std::upper_bound(cdf->begin(), cdf->end(), u);
    image.cell = std::min<std::size_t>(static_cast<std::size_t>(pos - cdf->begin()),
                                       cdf->size() - 1);
    std::string id = "syn-" + to_hex(derive_seed(request.seed, key + "#" + std::to_string(i)));
    images_.try_emplace(id, image);
    response.image_ids.push_back(std::move(id));
  }
  return response;
}

AnnotateResponse SyntheticBackend::annotate(const AnnotateRequest& request) {
  const auto img = images_.find(request.image_id);
  if (img == images_.end()) {
    throw BackendError("unknown image id '" + request.image_id + "'");
  }
  const Image& image = img->second;
  if (request.question == kPersonQuestion) {
    return {image.person ? kYes : kNo};
  }
  const auto q = questions_.find(request.question);
  if (q == questions_.end() || !image.person) return {kUnknownAnswer};
  const std::size_t category = world_.category_of(image.cell, q->second.axis);
  if (q->second.category != kNotFound) {
    return {category == q->second.category ? kYes : kNo};
  }
  return {world_.axes()[q->second.axis].categories[category]};
}

}  // namespace biasmatrix
