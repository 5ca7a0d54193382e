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

// File emitters. Numbers are written with 9 significant digits; matrices
// are row-major in axis declaration order. JSON values are rounded to the
// same 9 digits so CSV and JSON agree exactly.

#ifndef BIASMATRIX_REPORT_HPP_
#define BIASMATRIX_REPORT_HPP_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biasmatrix/metrics.hpp"
#include "biasmatrix/mitigation.hpp"
#include "biasmatrix/model.hpp"

namespace biasmatrix {

std::string format_number(double value);
double round_significant(double value);

std::string matrix_to_csv(const SensitivityMatrix& matrix);
nlohmann::json matrix_to_json(const SensitivityMatrix& matrix, Transport transport);
SensitivityMatrix matrix_from_csv(const std::string& csv);

std::string deviations_to_csv(const std::map<std::string, BiasDeviation>& deviations,
                              std::span<const BiasAxis> axes);
nlohmann::json trace_to_json(const MitigationReport& report, const AuditConfig& config);
std::string sweep_to_csv(std::span<const SweepRow> rows);

// Pretty-printed JSON with a trailing newline.
std::string dump_json(const nlohmann::json& doc);
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);
// Hex FNV-1a of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

}  // namespace biasmatrix

#endif  // BIASMATRIX_REPORT_HPP_
