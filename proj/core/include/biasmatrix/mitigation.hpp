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

// Priority-weighted greedy mitigation. Each step audits the current prompt
// set, rebuilds the sensitivity matrix, scores the priority axes, and if the
// score is still above epsilon mitigates the axis whose matrix row best
// aligns with the priority vector.

#ifndef BIASMATRIX_MITIGATION_HPP_
#define BIASMATRIX_MITIGATION_HPP_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biasmatrix/audit.hpp"
#include "biasmatrix/counterfactuals.hpp"
#include "biasmatrix/errors.hpp"
#include "biasmatrix/model.hpp"

namespace biasmatrix {

// Weights over the priority axes, kept in axis declaration order.
class PriorityVector {
 public:
  // Throws ConfigError unless every axis is declared, every weight is >= 0,
  // and the weights sum to 1 within 1e-9.
  static PriorityVector make(const std::map<std::string, double>& weights,
                             const AuditConfig& config);
  // Like make() but rescales weights that do not sum to 1; sets `rescaled`.
  static PriorityVector normalized(const std::map<std::string, double>& weights,
                                   const AuditConfig& config, bool* rescaled = nullptr);
  // "age_bias=0.5,environment_bias=0.5"
  static std::map<std::string, double> parse_spec(const std::string& spec);

  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& axis_id) const;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

// tau = <w_bar over the priority axes, p>.
double bias_score(const std::map<std::string, BiasDeviation>& deviations,
                  const PriorityVector& priority);

struct Selection {
  std::string axis_id;
  // gamma for every candidate row, in declaration order.
  std::vector<std::pair<std::string, double>> gamma;
  bool stalled = false;  // no candidate has gamma > 0
};

// gamma_i = <row i of S restricted to the priority columns, p> over all rows
// not in `excluded`; argmax with ties broken by row order. Throws DataError
// when no candidate remains.
Selection select_axis(const SensitivityMatrix& matrix, const PriorityVector& priority,
                      std::span<const std::string> excluded);

struct TradeoffAlert {
  int step = 0;
  std::string intervened;
  std::string measured;
  double is_value = 0.0;
  std::string kind;  // "negative_is" or "stall"
};

struct MitigationStep {
  Selection selection;
  std::vector<TradeoffAlert> alerts;
};

struct MitigationState {
  int step = 0;
  PromptSet prompt_set;
  std::vector<std::string> mitigated;
  std::vector<double> tau_trace;
  std::vector<SensitivityMatrix> matrix_trace;
  // Current-state deviations of every axis, one map per tau entry.
  std::vector<std::map<std::string, BiasDeviation>> deviation_trace;
  std::vector<MitigationStep> steps;
  std::vector<TradeoffAlert> alerts;
};

struct MitigationReport {
  double mit_amt = 0.0;          // final tau
  double mit_steps_ratio = 0.0;  // steps / |priority axes|
  int priority_size = 0;
  bool converged = false;
  std::string stop_reason;
  double person_rate = 1.0;  // of the final audit's images
  MitigationState state;
};

struct MitigationOptions {
  // Build S once at the start and reuse it (tau is still re-audited).
  bool frozen_matrix = false;
};

// Carries the partial trace of a run that hit a backend failure.
class MitigationError : public BackendError {
 public:
  MitigationError(const std::string& what, MitigationState state)
      : BackendError(what), state_(std::move(state)) {}
  const MitigationState& state() const { return state_; }

 private:
  MitigationState state_;
};

MitigationReport run_intermit(const AuditConfig& config, const PriorityVector& priority,
                              Auditor& auditor, const MitigationOptions& options = {});

struct MitigationSummary {
  std::size_t runs = 0;
  double mit_amt = 0.0;             // mean final tau
  double mean_steps = 0.0;
  double mean_priority_size = 0.0;
  double mit_steps_ratio = 0.0;     // mean_steps / mean_priority_size
  double person_rate = 0.0;         // mean IsP? over final audits
  std::size_t converged = 0;
};

MitigationSummary evaluate_mitigation(std::span<const MitigationReport> reports);

}  // namespace biasmatrix

#endif  // BIASMATRIX_MITIGATION_HPP_
