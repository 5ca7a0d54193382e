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

// A desk-scale stand-in for a text-to-image model plus VQA annotator: a
// ground-truth joint distribution over every axis's categories. In analytic
// mode it yields exact attribute distributions; in sampled mode it serves
// the wire protocol like any other backend.

#ifndef BIASMATRIX_SYNTHETIC_HPP_
#define BIASMATRIX_SYNTHETIC_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasmatrix/counterfactuals.hpp"
#include "biasmatrix/model.hpp"
#include "biasmatrix/protocol.hpp"

namespace biasmatrix {

class SyntheticWorld {
 public:
  enum class Mode { kSampled, kAnalytic };

  // Joint cells are laid out in mixed radix over `axes`, last axis fastest.
  // `components` partitions the axis indices into groups the joint factors
  // over (checked); empty means one group holding every axis.
  SyntheticWorld(std::vector<BiasAxis> axes, std::vector<double> joint,
                 double compliance = 1.0, double person_rate = 1.0,
                 Mode mode = Mode::kSampled,
                 std::vector<std::vector<std::size_t>> components = {});

  // Product of per-axis marginals (uniform where absent).
  static SyntheticWorld independent(
      std::vector<BiasAxis> axes,
      const std::map<std::string, std::vector<double>>& marginals = {});

  // World document:
  //   {"mode": "sampled"|"analytic", "compliance": 1, "person_rate": 1,
  //    "table": [...]}                       full joint, or
  //   {"marginals": {"axis": [..]},          product of factors; each
  //    "couplings": [{"axes": ["a","b"],     coupling multiplies the cells
  //                   "weights": [[..]]}]}   by weights[cat_a][cat_b]
  static SyntheticWorld from_json(const nlohmann::json& doc,
                                  std::vector<BiasAxis> axes);
  nlohmann::json to_json() const;

  const std::vector<BiasAxis>& axes() const { return axes_; }
  std::span<const double> joint() const { return joint_; }
  double compliance() const { return compliance_; }
  double person_rate() const { return person_rate_; }
  Mode mode() const { return mode_; }
  const std::vector<std::vector<std::size_t>>& components() const { return components_; }
  void set_mode(Mode mode) { mode_ = mode; }

  std::size_t cell_count() const { return joint_.size(); }
  std::size_t axis_index(std::string_view id) const;
  std::size_t category_of(std::size_t cell, std::size_t axis) const {
    return (cell / strides_[axis]) % axes_[axis].size();
  }

  // Forced (axis index, category index) pairs for a modifier map.
  std::vector<std::pair<std::size_t, std::size_t>> resolve(const Modifiers& modifiers) const;

  // Joint restricted to cells matching every forced pair, renormalized.
  // Throws DataError when the forced combination has zero mass.
  std::vector<double> conditional(
      std::span<const std::pair<std::size_t, std::size_t>> forced) const;

  // Exact per-axis marginals for one prompt variant, mixing over which
  // forced modifiers are honored (each independently with `compliance`).
  std::vector<std::vector<double>> variant_marginals(const Modifiers& modifiers) const;

 private:
  std::vector<BiasAxis> axes_;
  std::vector<double> joint_;
  std::vector<std::size_t> strides_;
  struct Component {
    std::vector<std::size_t> axes;     // world axis indices, ascending
    std::vector<std::size_t> strides;  // mixed radix within the component
    std::vector<double> table;         // marginal of the joint on `axes`
  };
  std::vector<Component> factors_;
  std::vector<std::vector<std::size_t>> components_;
  std::vector<std::size_t> component_of_;
  std::vector<std::vector<double>> marginals_;

  // Per-axis marginals of one component conditioned on `forced` (all
  // inside that component).
  void component_marginals(const Component& comp,
                           std::span<const std::pair<std::size_t, std::size_t>> forced,
                           double weight, std::vector<std::vector<double>>& out) const;

  double compliance_;
  double person_rate_;
  Mode mode_;
};

// Exact marginal of `axis` under the weight mixture of the set's variants.
AttributeDistribution analytic_distribution(const SyntheticWorld& world,
                                            const PromptSet& prompt_set,
                                            const BiasAxis& axis);

// Serves the protocol from a SyntheticWorld. Each image's attributes are
// drawn at generation time from a stream seeded by (prompt, modifiers,
// seed); identical requests return identical ids and answers.
class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(SyntheticWorld world);

  GenerateResponse generate(const GenerateRequest& request) override;
  AnnotateResponse annotate(const AnnotateRequest& request) override;
  std::string id() const override { return "synthetic"; }

  const SyntheticWorld& world() const { return world_; }

 private:
  struct Image {
    bool person = true;
    std::size_t cell = 0;
  };
  struct QuestionTarget {
    std::size_t axis = 0;
    std::size_t category = kNotFound;  // set for yes/no sub-questions
  };

  const std::vector<double>& cdf_for(
      const std::vector<std::pair<std::size_t, std::size_t>>& honored);

  SyntheticWorld world_;
  std::unordered_map<std::string, Image> images_;
  std::unordered_map<std::string, QuestionTarget> questions_;
  std::map<std::vector<std::pair<std::size_t, std::size_t>>, std::vector<double>> cdf_cache_;
};

}  // namespace biasmatrix

#endif  // BIASMATRIX_SYNTHETIC_HPP_
