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

#include "biasmatrix/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "biasmatrix/metrics.hpp"

namespace biasmatrix {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::vector<std::pair<std::string, double>> ordered_entries(
    const std::map<std::string, double>& weights, const AuditConfig& config) {
  if (weights.empty()) throw ConfigError("priority vector is empty");
  for (const auto& [id, w] : weights) {
    if (config.axis_index(id) == kNotFound) {
      throw ConfigError("priority references unknown axis '" + id + "'");
    }
    if (!std::isfinite(w) || w < 0.0) {
      throw ConfigError("priority weight for '" + id + "' must be non-negative");
    }
  }
  std::vector<std::pair<std::string, double>> entries;
  for (const auto& axis : config.axes) {
    if (const auto it = weights.find(axis.id); it != weights.end()) {
      entries.emplace_back(axis.id, it->second);
    }
  }
  return entries;
}

}  // namespace

PriorityVector PriorityVector::make(const std::map<std::string, double>& weights,
                                    const AuditConfig& config) {
  PriorityVector p;
  p.entries_ = ordered_entries(weights, config);
  double sum = 0.0;
  for (const auto& [id, w] : p.entries_) sum += w;
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw ConfigError("priority weights sum to " + std::to_string(sum) + ", expected 1");
  }
  return p;
}

PriorityVector PriorityVector::normalized(const std::map<std::string, double>& weights,
                                          const AuditConfig& config, bool* rescaled) {
  PriorityVector p;
  p.entries_ = ordered_entries(weights, config);
  double sum = 0.0;
  for (const auto& [id, w] : p.entries_) sum += w;
  if (sum <= 0.0) throw ConfigError("priority weights sum to zero");
  const bool off = std::abs(sum - 1.0) > kSimplexTolerance;
  if (off) {
    for (auto& [id, w] : p.entries_) w /= sum;
  }
  if (rescaled) *rescaled = off;
  return p;
}

std::map<std::string, double> PriorityVector::parse_spec(const std::string& spec) {
  std::map<std::string, double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("priority entry '" + item + "' is not axis=weight");
    }
    const std::string id = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("priority weight '" + value + "' for '" + id + "' is not a number");
    }
    if (!out.emplace(id, w).second) {
      throw ConfigError("priority lists '" + id + "' twice");
    }
  }
  if (out.empty()) throw ConfigError("priority spec is empty");
  return out;
}

bool PriorityVector::contains(const std::string& axis_id) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == axis_id; });
}

double bias_score(const std::map<std::string, BiasDeviation>& deviations,
                  const PriorityVector& priority) {
  double tau = 0.0;
  for (const auto& [id, w] : priority.entries()) {
    const auto it = deviations.find(id);
    if (it == deviations.end()) throw DataError("bias_score: missing axis '" + id + "'");
    tau += it->second.w_bar * w;
  }
  return tau;
}

Selection select_axis(const SensitivityMatrix& matrix, const PriorityVector& priority,
                      std::span<const std::string> excluded) {
  std::vector<std::pair<std::size_t, double>> columns;
  for (const auto& [id, w] : priority.entries()) {
    const std::size_t j = matrix.col_index(id);
    if (j == kNotFound) throw DataError("select_axis: matrix has no column '" + id + "'");
    columns.emplace_back(j, w);
  }
  Selection out;
  double best = 0.0;
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const auto& row = matrix.row_axes[i];
    if (std::find(excluded.begin(), excluded.end(), row) != excluded.end()) continue;
    double gamma = 0.0;
    for (const auto& [j, w] : columns) gamma += matrix.value(i, j) * w;
    out.gamma.emplace_back(row, gamma);
    if (out.axis_id.empty() || gamma > best) {
      out.axis_id = row;
      best = gamma;
    }
  }
  if (out.axis_id.empty()) throw DataError("select_axis: no candidate axis remains");
  out.stalled = best <= 0.0;
  return out;
}

MitigationReport run_intermit(const AuditConfig& config, const PriorityVector& priority,
                              Auditor& auditor, const MitigationOptions& options) {
  MitigationReport report;
  report.priority_size = static_cast<int>(priority.size());
  MitigationState& state = report.state;
  state.prompt_set = initial_prompt_set(config);

  for (;;) {
    const bool rebuild = !options.frozen_matrix || state.matrix_trace.empty();
    Audit audit;
    try {
      audit = audit_prompt_set(config, state.prompt_set, auditor, rebuild);
    } catch (const BackendError& e) {
      throw MitigationError(e.what(), state);
    }

    std::map<std::string, BiasDeviation> deviations;
    for (const auto& axis : config.axes) {
      deviations[axis.id] = bias_deviation(audit.data.initial.at(axis.id),
                                           config.ideal.at(axis.id), config.ordinal(axis));
    }
    const double tau = bias_score(deviations, priority);
    state.tau_trace.push_back(tau);
    state.deviation_trace.push_back(deviations);
    state.matrix_trace.push_back(rebuild ? build_matrix(audit.data, config)
                                         : state.matrix_trace.back());
    report.person_rate = audit.person_rate;

    if (tau < config.epsilon) {
      report.converged = true;
      report.stop_reason = "tau below epsilon";
      break;
    }
    if (state.mitigated.size() >= config.axes.size()) {
      report.stop_reason = "every axis mitigated";
      break;
    }

    const SensitivityMatrix& matrix = state.matrix_trace.back();
    MitigationStep step;
    step.selection = select_axis(matrix, priority, state.mitigated);
    const std::string chosen = step.selection.axis_id;
    const std::size_t row = matrix.row_index(chosen);
    for (const auto& [id, w] : priority.entries()) {
      const double is_value = matrix.value(row, matrix.col_index(id));
      if (is_value < 0.0) {
        step.alerts.push_back({state.step, chosen, id, is_value, "negative_is"});
      }
    }
    if (step.selection.stalled) {
      double best = step.selection.gamma.front().second;
      for (const auto& [id, g] : step.selection.gamma) best = std::max(best, g);
      step.alerts.push_back({state.step, chosen, "", best, "stall"});
    }

    PromptSet next;
    try {
      next = pm_mitigate(state.prompt_set, config.axis(chosen), config.image_budget);
    } catch (const BudgetError& e) {
      report.stop_reason = std::string("budget exhausted: ") + e.what();
      state.alerts.insert(state.alerts.end(), step.alerts.begin(), step.alerts.end());
      break;
    }
    state.alerts.insert(state.alerts.end(), step.alerts.begin(), step.alerts.end());
    state.steps.push_back(std::move(step));
    state.prompt_set = std::move(next);
    state.mitigated.push_back(chosen);
    ++state.step;
  }

  report.mit_amt = state.tau_trace.back();
  report.mit_steps_ratio =
      static_cast<double>(state.mitigated.size()) / static_cast<double>(priority.size());
  return report;
}

MitigationSummary evaluate_mitigation(std::span<const MitigationReport> reports) {
  if (reports.empty()) throw DataError("evaluate_mitigation: no reports");
  MitigationSummary s;
  s.runs = reports.size();
  for (const auto& r : reports) {
    s.mit_amt += r.mit_amt;
    s.mean_steps += static_cast<double>(r.state.mitigated.size());
    s.mean_priority_size += r.priority_size;
    s.person_rate += r.person_rate;
    s.converged += r.converged ? 1 : 0;
  }
  const double n = static_cast<double>(reports.size());
  s.mit_amt /= n;
  s.mean_steps /= n;
  s.mean_priority_size /= n;
  s.person_rate /= n;
  s.mit_steps_ratio = s.mean_priority_size > 0.0 ? s.mean_steps / s.mean_priority_size : 0.0;
  return s;
}

}  // namespace biasmatrix
