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

// Quantitative core: Wasserstein-1 on categorical supports, normalized bias
// deviation, intervened distributions, Intersectional Sensitivity and the
// sensitivity matrix, plus the validation and robustness machinery built
// on top of them.

#ifndef BIASMATRIX_METRICS_HPP_
#define BIASMATRIX_METRICS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasmatrix/model.hpp"

namespace biasmatrix {

// Normalized category counts over person-present records that carry an
// on-list answer for `axis`. Throws DataError("empty distribution ...")
// when no record qualifies.
AttributeDistribution empirical_distribution(std::span<const AnnotationRecord> records,
                                             const BiasAxis& axis);

// Earth mover's distance between two distributions on the same k categories.
// Ordinal: categories sit at 0..k-1 and W1 = sum_{i<k-1} |F1(i) - F2(i)|.
// Nominal: unit cost between distinct categories, i.e. total variation.
double wasserstein1(std::span<const double> p, std::span<const double> q, bool ordinal);
double wasserstein1(const AttributeDistribution& d1, const AttributeDistribution& d2,
                    bool ordinal);

// Largest W1 from any point mass to `ideal`; the normalizer of w_bar.
double max_deviation(std::span<const double> ideal, bool ordinal);

// w = W1(d, ideal), w_bar = w / max_deviation(ideal). A degenerate ideal
// with max_deviation == 0 gives w_bar = 0.
BiasDeviation bias_deviation(const AttributeDistribution& d, const IdealDistribution& ideal,
                             bool ordinal);

// Equal-weight mixture of the per-category counterfactual distributions of
// one measured axis. The result does not depend on input order, bit for bit.
AttributeDistribution intervened_distribution(
    std::span<const AttributeDistribution> cf_distributions);

SensitivityEntry intersectional_sensitivity(std::string intervened, const BiasDeviation& init,
                                            const BiasDeviation& intervened_deviation);

// Distributions needed for one sensitivity matrix. counterfactual[row] holds
// one map per category of the row axis, in category order, giving the
// distribution of every measured axis in that counterfactual image set.
struct AuditData {
  std::map<std::string, AttributeDistribution> initial;
  std::map<std::string, std::vector<std::map<std::string, AttributeDistribution>>>
      counterfactual;
};

// Rows are every axis with counterfactual data, columns every axis, both in
// declaration order. Throws DataError naming the axis pair on failure.
SensitivityMatrix build_matrix(const AuditData& data, const AuditConfig& config);

// Raw annotation records behind an AuditData.
struct AuditRecords {
  std::vector<AnnotationRecord> initial;
  std::map<std::string, std::vector<std::vector<AnnotationRecord>>> counterfactual;
};

AuditData audit_from_records(const AuditRecords& records, std::span<const BiasAxis> axes);

// IS computed against images generated after actually mitigating
// `intervened` instead of the simulated intervention.
SensitivityEntry post_mitigation_sensitivity(std::span<const AnnotationRecord> pre_records,
                                             std::span<const AnnotationRecord> post_records,
                                             const std::string& intervened,
                                             const BiasAxis& measured,
                                             const IdealDistribution& ideal, bool ordinal);

// Pearson correlation; nullopt when either series is constant. Throws
// DataError on length mismatch or fewer than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
  std::vector<std::optional<double>> per_prompt;
  std::optional<double> mean;  // over prompts with a defined r
};

// pre[i] and post[i] are the IS and post-mitigation IS values of prompt i
// over the same (intervened, measured) pairs.
CorrelationReport validate_correlation(const std::vector<std::vector<double>>& pre,
                                       const std::vector<std::vector<double>>& post);

// Fraction of strictly negative values.
double negative_fraction(std::span<const double> values);

// Uniform subsample without replacement, original order kept. Throws
// DataError if fewer than one record would remain.
std::vector<AnnotationRecord> perturb_subsample(std::span<const AnnotationRecord> records,
                                                double keep_fraction, std::uint64_t seed);

// Replaces each extracted attribute, independently with probability
// `error_rate`, by a uniformly chosen different category.
std::vector<AnnotationRecord> perturb_answers(std::span<const AnnotationRecord> records,
                                              std::span<const BiasAxis> axes,
                                              double error_rate, std::uint64_t seed);

struct SweepSpec {
  std::vector<double> error_rates{0.05, 0.10, 0.20, 0.40};
  std::vector<double> keep_fractions{40.0 / 48.0, 32.0 / 48.0, 24.0 / 48.0, 16.0 / 48.0};
  int seeds = 20;
  std::uint64_t seed = 0;
};

struct SweepRow {
  std::string kind;  // "answer_error" or "subsample"
  double level = 0.0;
  // Mean over seeds of the mean |IS' - IS| across matrix entries.
  double mean_abs_delta = 0.0;
  // mean_abs_delta / mean |IS| of the unperturbed matrix (NaN if that is 0).
  double relative_change = 0.0;
};

std::vector<SweepRow> robustness_sweep(const AuditRecords& records, const AuditConfig& config,
                                       const SweepSpec& spec);

}  // namespace biasmatrix

#endif  // BIASMATRIX_METRICS_HPP_
