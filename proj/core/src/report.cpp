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

#include "biasmatrix/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "biasmatrix/counterfactuals.hpp"
#include "biasmatrix/errors.hpp"
#include "biasmatrix/hashing.hpp"

namespace biasmatrix {

using nlohmann::json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value == 0.0 ? 0.0 : value);
  return buf;
}

double round_significant(double value) {
  if (!std::isfinite(value)) return value;
  return std::strtod(format_number(value).c_str(), nullptr);
}

namespace {

json number(double value) {
  if (std::isnan(value)) return nullptr;
  return round_significant(value);
}

json deviation_json(const BiasDeviation& d) {
  return {{"w", number(d.w)}, {"w_bar", number(d.w_bar)}};
}

}  // namespace

std::string matrix_to_csv(const SensitivityMatrix& matrix) {
  std::string out = "intervened\\measured";
  for (const auto& c : matrix.col_axes) out += "," + c;
  out += '\n';
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    out += matrix.row_axes[i];
    for (std::size_t j = 0; j < matrix.cols(); ++j) out += "," + format_number(matrix.value(i, j));
    out += '\n';
  }
  return out;
}

SensitivityMatrix matrix_from_csv(const std::string& csv) {
  SensitivityMatrix m;
  std::stringstream in(csv);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw DataError("empty matrix CSV");
  auto header = split(line);
  m.col_axes.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != m.col_axes.size() + 1) throw DataError("ragged matrix CSV row");
    m.row_axes.push_back(cells[0]);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      SensitivityEntry e;
      e.intervened = cells[0];
      e.measured = m.col_axes[j - 1];
      e.is_value = std::strtod(cells[j].c_str(), nullptr);
      m.entries.push_back(std::move(e));
    }
  }
  return m;
}

json matrix_to_json(const SensitivityMatrix& matrix, Transport transport) {
  json values = json::array();
  json entries = json::array();
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
      const auto& e = matrix.at(i, j);
      row.push_back(number(e.is_value));
      entries.push_back({{"intervened", e.intervened},
                         {"measured", e.measured},
                         {"is", number(e.is_value)},
                         {"w_init", deviation_json(e.w_init)},
                         {"w_intervened", deviation_json(e.w_intervened)}});
    }
    values.push_back(std::move(row));
  }
  return {{"transport", std::string(to_string(transport))},
          {"rows", matrix.row_axes},
          {"cols", matrix.col_axes},
          {"values", std::move(values)},
          {"entries", std::move(entries)}};
}

std::string deviations_to_csv(const std::map<std::string, BiasDeviation>& deviations,
                              std::span<const BiasAxis> axes) {
  std::string out = "axis,w,w_bar\n";
  for (const auto& axis : axes) {
    const auto it = deviations.find(axis.id);
    if (it == deviations.end()) continue;
    out += axis.id + "," + format_number(it->second.w) + "," + format_number(it->second.w_bar) + "\n";
  }
  return out;
}

json trace_to_json(const MitigationReport& report, const AuditConfig& config) {
  const auto& state = report.state;
  json steps = json::array();
  for (std::size_t t = 0; t < state.tau_trace.size(); ++t) {
    json step = {{"step", t},
                 {"tau", number(state.tau_trace[t])},
                 {"matrix", matrix_to_json(state.matrix_trace[t], config.transport)}};
    json devs = json::object();
    for (const auto& [id, d] : state.deviation_trace[t]) devs[id] = deviation_json(d);
    step["deviations"] = std::move(devs);
    if (t < state.steps.size()) {
      const auto& s = state.steps[t];
      json gamma = json::object();
      for (const auto& [id, g] : s.selection.gamma) gamma[id] = number(g);
      step["selected"] = s.selection.axis_id;
      step["gamma"] = std::move(gamma);
      step["stalled"] = s.selection.stalled;
    }
    steps.push_back(std::move(step));
  }
  json alerts = json::array();
  for (const auto& a : state.alerts) {
    alerts.push_back({{"step", a.step},
                      {"kind", a.kind},
                      {"intervened", a.intervened},
                      {"measured", a.measured},
                      {"value", number(a.is_value)}});
  }
  json tau = json::array();
  for (double t : state.tau_trace) tau.push_back(number(t));
  return {{"base_prompt", config.base_prompt},
          {"epsilon", number(config.epsilon)},
          {"transport", std::string(to_string(config.transport))},
          {"mitigated", state.mitigated},
          {"tau_trace", std::move(tau)},
          {"mit_amt", number(report.mit_amt)},
          {"mit_steps_ratio", number(report.mit_steps_ratio)},
          {"priority_size", report.priority_size},
          {"converged", report.converged},
          {"stop_reason", report.stop_reason},
          {"person_rate", number(report.person_rate)},
          {"alerts", std::move(alerts)},
          {"steps", std::move(steps)},
          {"final_prompt_set", to_json(state.prompt_set, config.axes)}};
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out = "kind,level,mean_abs_delta_is,relative_change\n";
  for (const auto& r : rows) {
    out += r.kind + "," + format_number(r.level) + "," + format_number(r.mean_abs_delta) + "," +
           format_number(r.relative_change) + "\n";
  }
  return out;
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << contents;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_digest(const std::filesystem::path& path) {
  return to_hex(fnv1a64(read_file(path)));
}

}  // namespace biasmatrix
