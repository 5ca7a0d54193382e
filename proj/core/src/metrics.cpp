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

#include "biasmatrix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "biasmatrix/errors.hpp"
#include "biasmatrix/hashing.hpp"

namespace biasmatrix {

AttributeDistribution empirical_distribution(std::span<const AnnotationRecord> records,
                                             const BiasAxis& axis) {
  std::vector<std::size_t> counts(axis.size(), 0);
  std::size_t total = 0;
  for (const auto& r : records) {
    if (!r.person_present) continue;
    const auto it = r.attributes.find(axis.id);
    if (it == r.attributes.end()) continue;
    const std::size_t k = axis.index_of(it->second);
    if (k == kNotFound) continue;
    ++counts[k];
    ++total;
  }
  if (total == 0) {
    throw DataError("empty distribution: no usable records for axis '" + axis.id + "'");
  }
  AttributeDistribution d{axis.id, std::vector<double>(axis.size()), total};
  for (std::size_t k = 0; k < counts.size(); ++k) {
    d.probs[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
  }
  return d;
}

double wasserstein1(std::span<const double> p, std::span<const double> q, bool ordinal) {
  if (p.size() != q.size()) {
    throw DataError("wasserstein1: supports differ (" + std::to_string(p.size()) + " vs " +
                    std::to_string(q.size()) + " categories)");
  }
  double w = 0.0;
  if (ordinal) {
    double fp = 0.0;
    double fq = 0.0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
      fp += p[i];
      fq += q[i];
      w += std::abs(fp - fq);
    }
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) w += std::abs(p[i] - q[i]);
    w *= 0.5;
  }
  return w;
}

double wasserstein1(const AttributeDistribution& d1, const AttributeDistribution& d2,
                    bool ordinal) {
  if (d1.axis_id != d2.axis_id) {
    throw DataError("wasserstein1: mismatched axes '" + d1.axis_id + "' and '" + d2.axis_id +
                    "'");
  }
  return wasserstein1(d1.probs, d2.probs, ordinal);
}

double max_deviation(std::span<const double> ideal, bool ordinal) {
  std::vector<double> point(ideal.size(), 0.0);
  double best = 0.0;
  for (std::size_t c = 0; c < ideal.size(); ++c) {
    point[c] = 1.0;
    best = std::max(best, wasserstein1(point, ideal, ordinal));
    point[c] = 0.0;
  }
  return best;
}

BiasDeviation bias_deviation(const AttributeDistribution& d, const IdealDistribution& ideal,
                             bool ordinal) {
  if (d.axis_id != ideal.axis_id) {
    throw DataError("bias_deviation: distribution on '" + d.axis_id + "' vs ideal on '" +
                    ideal.axis_id + "'");
  }
  BiasDeviation out{d.axis_id, wasserstein1(d.probs, ideal.probs, ordinal), 0.0};
  const double w_max = max_deviation(ideal.probs, ordinal);
  if (w_max > 0.0) out.w_bar = std::clamp(out.w / w_max, 0.0, 1.0);
  return out;
}

AttributeDistribution intervened_distribution(
    std::span<const AttributeDistribution> cf_distributions) {
  if (cf_distributions.empty()) throw DataError("missing counterfactual distribution");
  const auto& first = cf_distributions.front();
  for (const auto& d : cf_distributions) {
    if (d.axis_id != first.axis_id || d.probs.size() != first.probs.size()) {
      throw DataError("intervened_distribution: inputs measure different axes");
    }
  }
  AttributeDistribution out{first.axis_id, std::vector<double>(first.probs.size(), 0.0), 0};
  for (const auto& d : cf_distributions) out.n_samples += d.n_samples;
  if (std::all_of(cf_distributions.begin(), cf_distributions.end(),
                  [&](const AttributeDistribution& d) { return d.probs == first.probs; })) {
    out.probs = first.probs;
    return out;
  }
  // Sorting each component's terms makes the sum independent of input order.
  std::vector<double> terms(cf_distributions.size());
  for (std::size_t k = 0; k < out.probs.size(); ++k) {
    for (std::size_t i = 0; i < cf_distributions.size(); ++i) {
      terms[i] = cf_distributions[i].probs[k];
    }
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += t;
    out.probs[k] = sum / static_cast<double>(terms.size());
  }
  double total = 0.0;
  for (double p : out.probs) total += p;
  if (total > 0.0) {
    for (double& p : out.probs) p /= total;
  }
  return out;
}

SensitivityEntry intersectional_sensitivity(std::string intervened, const BiasDeviation& init,
                                            const BiasDeviation& intervened_deviation) {
  SensitivityEntry e;
  e.intervened = std::move(intervened);
  e.measured = init.axis_id;
  e.is_value = init.w_bar - intervened_deviation.w_bar;
  e.w_init = init;
  e.w_intervened = intervened_deviation;
  return e;
}

SensitivityMatrix build_matrix(const AuditData& data, const AuditConfig& config) {
  SensitivityMatrix s;
  for (const auto& axis : config.axes) {
    s.col_axes.push_back(axis.id);
    if (data.counterfactual.contains(axis.id)) s.row_axes.push_back(axis.id);
  }
  if (s.row_axes.empty()) throw DataError("build_matrix: no counterfactual data");

  std::vector<BiasDeviation> init(config.axes.size());
  for (std::size_t j = 0; j < config.axes.size(); ++j) {
    const auto& axis = config.axes[j];
    const auto it = data.initial.find(axis.id);
    if (it == data.initial.end()) {
      throw DataError("build_matrix: no initial distribution for '" + axis.id + "'");
    }
    init[j] = bias_deviation(it->second, config.ideal.at(axis.id), config.ordinal(axis));
  }

  s.entries.reserve(s.row_axes.size() * s.col_axes.size());
  for (const auto& row : s.row_axes) {
    const auto& sets = data.counterfactual.at(row);
    const auto& row_axis = config.axis(row);
    if (sets.size() != row_axis.size()) {
      throw DataError("build_matrix: row '" + row + "' has " + std::to_string(sets.size()) +
                      " counterfactual sets, expected " + std::to_string(row_axis.size()));
    }
    for (std::size_t j = 0; j < config.axes.size(); ++j) {
      const auto& col = config.axes[j];
      std::vector<AttributeDistribution> cf;
      cf.reserve(sets.size());
      for (std::size_t c = 0; c < sets.size(); ++c) {
        const auto it = sets[c].find(col.id);
        if (it == sets[c].end()) {
          throw DataError("build_matrix: missing counterfactual distribution for " + row + " -> " +
                          col.id + " (" + row_axis.categories[c] + ")");
        }
        cf.push_back(it->second);
      }
      const auto intervened = intervened_distribution(cf);
      s.entries.push_back(intersectional_sensitivity(
          row, init[j],
          bias_deviation(intervened, config.ideal.at(col.id), config.ordinal(col))));
    }
  }
  return s;
}

AuditData audit_from_records(const AuditRecords& records, std::span<const BiasAxis> axes) {
  AuditData data;
  for (const auto& axis : axes) {
    try {
      data.initial[axis.id] = empirical_distribution(records.initial, axis);
    } catch (const DataError& e) {
      throw DataError(std::string("initial images: ") + e.what());
    }
  }
  for (const auto& [row, sets] : records.counterfactual) {
    auto& out = data.counterfactual[row];
    for (std::size_t c = 0; c < sets.size(); ++c) {
      std::map<std::string, AttributeDistribution> per_axis;
      for (const auto& axis : axes) {
        try {
          per_axis[axis.id] = empirical_distribution(sets[c], axis);
        } catch (const DataError& e) {
          throw DataError("axis pair " + row + " -> " + axis.id + ", counterfactual set " +
                          std::to_string(c) + ": " + e.what());
        }
      }
      out.push_back(std::move(per_axis));
    }
  }
  return data;
}

SensitivityEntry post_mitigation_sensitivity(std::span<const AnnotationRecord> pre_records,
                                             std::span<const AnnotationRecord> post_records,
                                             const std::string& intervened,
                                             const BiasAxis& measured,
                                             const IdealDistribution& ideal, bool ordinal) {
  const auto init = bias_deviation(empirical_distribution(pre_records, measured), ideal, ordinal);
  const auto post =
      bias_deviation(empirical_distribution(post_records, measured), ideal, ordinal);
  return intersectional_sensitivity(intervened, init, post);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DataError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw DataError("pearson: need at least two pairs");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationReport validate_correlation(const std::vector<std::vector<double>>& pre,
                                       const std::vector<std::vector<double>>& post) {
  if (pre.size() != post.size()) {
    throw DataError("validate_correlation: " + std::to_string(pre.size()) + " pre vs " +
                    std::to_string(post.size()) + " post prompt series");
  }
  CorrelationReport report;
  double sum = 0.0;
  int defined = 0;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    auto r = pearson(pre[i], post[i]);
    if (r) {
      sum += *r;
      ++defined;
    }
    report.per_prompt.push_back(r);
  }
  if (defined > 0) report.mean = sum / defined;
  return report;
}

double negative_fraction(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const auto negative = std::count_if(values.begin(), values.end(), [](double v) { return v < 0.0; });
  return static_cast<double>(negative) / static_cast<double>(values.size());
}

std::vector<AnnotationRecord> perturb_subsample(std::span<const AnnotationRecord> records,
                                                double keep_fraction, std::uint64_t seed) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw DataError("keep_fraction must lie in (0, 1]");
  }
  const auto keep = static_cast<std::size_t>(
      std::llround(keep_fraction * static_cast<double>(records.size())));
  if (keep < 1) throw DataError("subsample would leave no records");
  if (keep >= records.size()) return {records.begin(), records.end()};

  std::vector<std::size_t> index(records.size());
  std::iota(index.begin(), index.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(index.size() - i));
    std::swap(index[i], index[j]);
  }
  index.resize(keep);
  std::sort(index.begin(), index.end());
  std::vector<AnnotationRecord> out;
  out.reserve(keep);
  for (std::size_t i : index) out.push_back(records[i]);
  return out;
}

std::vector<AnnotationRecord> perturb_answers(std::span<const AnnotationRecord> records,
                                              std::span<const BiasAxis> axes,
                                              double error_rate, std::uint64_t seed) {
  if (!(error_rate >= 0.0 && error_rate < 1.0)) {
    throw DataError("error_rate must lie in [0, 1)");
  }
  std::vector<AnnotationRecord> out(records.begin(), records.end());
  if (error_rate == 0.0) return out;
  Rng rng(seed);
  for (auto& record : out) {
    for (auto& [axis_id, value] : record.attributes) {
      const auto it = std::find_if(axes.begin(), axes.end(),
                                   [&](const BiasAxis& a) { return a.id == axis_id; });
      if (it == axes.end() || it->size() < 2) continue;
      const std::size_t current = it->index_of(value);
      if (current == kNotFound) continue;
      if (!rng.bernoulli(error_rate)) continue;
      std::size_t pick = static_cast<std::size_t>(rng.below(it->size() - 1));
      if (pick >= current) ++pick;
      value = it->categories[pick];
    }
  }
  return out;
}

namespace {

double mean_abs_difference(const SensitivityMatrix& a, const SensitivityMatrix& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    sum += std::abs(a.entries[i].is_value - b.entries[i].is_value);
  }
  return sum / static_cast<double>(a.entries.size());
}

template <class Perturb>
AuditRecords perturb_all(const AuditRecords& records, Perturb&& perturb) {
  AuditRecords out;
  out.initial = perturb(records.initial, std::string("init"));
  for (const auto& [row, sets] : records.counterfactual) {
    auto& dst = out.counterfactual[row];
    for (std::size_t c = 0; c < sets.size(); ++c) {
      dst.push_back(perturb(sets[c], row + "/" + std::to_string(c)));
    }
  }
  return out;
}

}  // namespace

std::vector<SweepRow> robustness_sweep(const AuditRecords& records, const AuditConfig& config,
                                       const SweepSpec& spec) {
  if (spec.seeds <= 0) throw DataError("robustness sweep needs at least one seed");
  const auto base = build_matrix(audit_from_records(records, config.axes), config);
  double mean_abs_is = 0.0;
  for (const auto& e : base.entries) mean_abs_is += std::abs(e.is_value);
  mean_abs_is /= static_cast<double>(base.entries.size());

  auto run = [&](const std::string& kind, double level, auto&& perturb_one) {
    double total = 0.0;
    for (int s = 0; s < spec.seeds; ++s) {
      const std::string prefix = kind + "/" + std::to_string(level) + "/" + std::to_string(s) + "/";
      const auto perturbed = perturb_all(records, [&](const auto& set, const std::string& label) {
        return perturb_one(set, derive_seed(spec.seed, prefix + label));
      });
      total += mean_abs_difference(base, build_matrix(audit_from_records(perturbed, config.axes), config));
    }
    SweepRow row{kind, level, total / spec.seeds, 0.0};
    row.relative_change = mean_abs_is > 0.0 ? row.mean_abs_delta / mean_abs_is
                                            : std::numeric_limits<double>::quiet_NaN();
    return row;
  };

  std::vector<SweepRow> rows;
  for (double rate : spec.error_rates) {
    rows.push_back(run("answer_error", rate, [&](const std::vector<AnnotationRecord>& set, std::uint64_t seed) {
      return perturb_answers(set, config.axes, rate, seed);
    }));
  }
  for (double keep : spec.keep_fractions) {
    rows.push_back(run("subsample", keep, [&](const std::vector<AnnotationRecord>& set, std::uint64_t seed) {
      return perturb_subsample(set, keep, seed);
    }));
  }
  return rows;
}

}  // namespace biasmatrix
