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

#include "biasmatrix/commands.hpp"

#include <fstream>
#include <ostream>

#include "biasmatrix/audit.hpp"
#include "biasmatrix/counterfactuals.hpp"
#include "biasmatrix/errors.hpp"
#include "biasmatrix/mitigation.hpp"
#include "biasmatrix/report.hpp"
#include "biasmatrix/store.hpp"

namespace biasmatrix {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kVersion[] = "0.1.0";

std::vector<AuditConfig> prepare_configs(const RunOptions& o) {
  std::vector<AuditConfig> configs;
  if (!o.config_docs.empty()) {
    for (const auto& doc : o.config_docs) configs.push_back(config_from_json(doc));
  } else {
    for (const auto& path : o.config_paths) configs.push_back(load_config(path));
  }
  if (configs.empty()) throw ConfigError("no config given (use --config)");

  std::map<std::string, IdealDistribution> ideals;
  if (o.ideal) ideals = load_ideals(*o.ideal);
  for (auto& c : configs) {
    if (o.seed) c.seed = *o.seed;
    if (o.budget) c.image_budget = *o.budget;
    if (o.epsilon) c.epsilon = *o.epsilon;
    if (o.transport) c.transport = *o.transport;
    for (const auto& [id, d] : ideals) c.ideal[id] = d;
    c = validate_config(std::move(c));
  }
  return configs;
}

fs::path store_dir(const RunOptions& o) { return o.store.value_or(o.out / "annotations"); }

std::string store_reference(const RunOptions& o) {
  const fs::path dir = store_dir(o);
  const auto rel = fs::relative(fs::absolute(dir), fs::absolute(o.out));
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return fs::absolute(dir).generic_string();
}

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& contents) {
    write_file(dir_ / name, contents);
    names_.push_back(name);
  }

  json digests() const {
    json out = json::object();
    for (const auto& name : names_) out[name] = file_digest(dir_ / name);
    return out;
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

void write_manifest(const RunOptions& o, const std::string& command,
                    const std::vector<AuditConfig>& configs, const std::string& backend_id,
                    const OutputSet& outputs, std::ostream& log) {
  json docs = json::array();
  json hashes = json::array();
  // Digest of each config's stored answers as of this run; null when the
  // run used no store (analytic mode).
  json answers = json::object();
  for (const auto& c : configs) {
    docs.push_back(to_json(c));
    const std::string hash = config_hash(c);
    hashes.push_back(hash);
    const fs::path file = store_file(store_dir(o), hash);
    answers[hash] = fs::exists(file) ? json(file_digest(file)) : json(nullptr);
  }
  json options = {{"frozen_matrix", o.frozen_matrix}};
  if (o.priority) options["priority"] = *o.priority;
  if (command == "robustness") {
    options["sweep"] = {{"error_rates", o.sweep.error_rates},
                        {"keep_fractions", o.sweep.keep_fractions},
                        {"seeds", o.sweep.seeds},
                        {"seed", o.sweep.seed},
                        {"seed_set", o.sweep_seed_set}};
  }
  json manifest = {{"tool", "biasmatrix"},
                   {"version", kVersion},
                   {"command", command},
                   {"backend", backend_id},
                   {"transport", std::string(to_string(configs.front().transport))},
                   {"seed", configs.front().seed},
                   {"configs", std::move(docs)},
                   {"config_hashes", std::move(hashes)},
                   {"answer_hashes", std::move(answers)},
                   {"options", std::move(options)},
                   {"store", store_reference(o)},
                   {"outputs", outputs.digests()}};
  write_file(o.out / "manifest.json", dump_json(manifest));
  log << "wrote " << (o.out / "manifest.json").string() << "\n";
}

json prompt_sets_json(const AuditConfig& config, const PromptSet& current) {
  json sets = json::array();
  sets.push_back(to_json(current, config.axes));
  for (const auto& axis : config.axes) {
    for (const auto& set : counterfactual_sets(current, axis)) {
      sets.push_back(to_json(set, config.axes));
    }
  }
  return sets;
}

std::map<std::string, BiasDeviation> deviations_of(
    const AuditConfig& config, const std::map<std::string, AttributeDistribution>& dists) {
  std::map<std::string, BiasDeviation> out;
  for (const auto& axis : config.axes) {
    out[axis.id] = bias_deviation(dists.at(axis.id), config.ideal.at(axis.id),
                                  config.ordinal(axis));
  }
  return out;
}

PriorityVector priority_for(const RunOptions& o, const AuditConfig& config, std::ostream& log) {
  std::map<std::string, double> weights;
  if (o.priority) {
    weights = PriorityVector::parse_spec(*o.priority);
  } else {
    weights = config.priority;
  }
  if (weights.empty()) throw ConfigError("no priority given (use --priority or config \"priority\")");
  bool rescaled = false;
  auto p = PriorityVector::normalized(weights, config, &rescaled);
  if (rescaled) log << "warning: priority weights do not sum to 1; normalized\n";
  return p;
}

std::string indexed(const std::string& stem, std::size_t i, std::size_t n,
                    const std::string& ext) {
  return n == 1 ? stem + ext : stem + "_" + std::to_string(i) + ext;
}

}  // namespace

int cmd_audit(const RunOptions& o, std::ostream& log) {
  const auto configs = prepare_configs(o);
  if (configs.size() != 1) throw ConfigError("audit takes exactly one config");
  const AuditConfig& config = configs.front();
  auto handle = open_backend(o.backend, config, store_dir(o));

  const PromptSet initial = initial_prompt_set(config);
  const Audit audit = audit_prompt_set(config, initial, *handle.auditor);
  const SensitivityMatrix matrix = build_matrix(audit.data, config);
  const auto deviations = deviations_of(config, audit.data.initial);

  OutputSet out(o.out);
  out.write("matrix.csv", matrix_to_csv(matrix));
  out.write("matrix.json", dump_json(matrix_to_json(matrix, config.transport)));
  out.write("deviations.csv", deviations_to_csv(deviations, config.axes));
  out.write("prompt_sets.json", dump_json(prompt_sets_json(config, initial)));
  json summary = {{"base_prompt", config.base_prompt},
                  {"transport", std::string(to_string(config.transport))},
                  {"image_budget", config.image_budget},
                  {"person_rate", round_significant(audit.person_rate)}};
  if (auto* backend_auditor = dynamic_cast<BackendAuditor*>(handle.auditor.get())) {
    const auto& s = backend_auditor->stats();
    summary["images"] = s.images;
    summary["images_without_person"] = s.without_person;
    summary["off_list_answers"] = s.off_list_answers;
    if (s.off_list_answers > 0) {
      log << "warning: " << s.off_list_answers << " off-list answers excluded\n";
    }
  }
  out.write("audit.json", dump_json(summary));
  write_manifest(o, "audit", configs, handle.id, out, log);

  log << "audit: " << matrix.rows() << "x" << matrix.cols() << " matrix ("
      << to_string(config.transport) << " transport, " << handle.id << ") -> "
      << (o.out / "matrix.csv").string() << "\n";
  return kExitOk;
}

int cmd_mitigate(const RunOptions& o, std::ostream& log) {
  const auto configs = prepare_configs(o);
  std::vector<MitigationReport> reports;
  std::string backend_id;
  OutputSet out(o.out);
  std::string summary_csv = "prompt,priority_size,steps,mitigated,mit_amt,converged,person_rate\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& config = configs[i];
    const auto priority = priority_for(o, config, log);
    auto handle = open_backend(o.backend, config, store_dir(o));
    backend_id = handle.id;
    MitigationOptions options;
    options.frozen_matrix = o.frozen_matrix;
    MitigationReport report;
    try {
      report = run_intermit(config, priority, *handle.auditor, options);
    } catch (const MitigationError& e) {
      MitigationReport partial;
      partial.state = e.state();
      partial.priority_size = static_cast<int>(priority.size());
      partial.stop_reason = std::string("backend error: ") + e.what();
      if (!partial.state.tau_trace.empty()) partial.mit_amt = partial.state.tau_trace.back();
      write_file(o.out / indexed("trace", i, configs.size(), ".partial.json"),
                 dump_json(trace_to_json(partial, config)));
      throw;
    }
    out.write(indexed("trace", i, configs.size(), ".json"), dump_json(trace_to_json(report, config)));
    std::string mitigated;
    for (const auto& m : report.state.mitigated) mitigated += (mitigated.empty() ? "" : ";") + m;
    summary_csv += "\"" + config.base_prompt + "\"," + std::to_string(report.priority_size) + "," +
                   std::to_string(report.state.mitigated.size()) + "," + mitigated + "," +
                   format_number(report.mit_amt) + "," + (report.converged ? "true" : "false") +
                   "," + format_number(report.person_rate) + "\n";
    log << "mitigate: \"" << config.base_prompt << "\" tau";
    for (double t : report.state.tau_trace) log << " " << format_number(t);
    log << (report.converged ? " (converged)" : " (not converged: " + report.stop_reason + ")")
        << "\n";
    for (const auto& a : report.state.alerts) {
      if (a.kind == "stall") {
        log << "  alert: step " << a.step << " no axis improves the priority axes (best gamma "
            << format_number(a.is_value) << ")\n";
      } else {
        log << "  alert: step " << a.step << " mitigating " << a.intervened << " worsens "
            << a.measured << " (IS " << format_number(a.is_value) << ")\n";
      }
    }
    reports.push_back(std::move(report));
  }
  const auto summary = evaluate_mitigation(reports);
  out.write("summary.csv", summary_csv);
  out.write("summary.json",
            dump_json({{"runs", summary.runs},
                       {"mit_amt", round_significant(summary.mit_amt)},
                       {"mean_steps", round_significant(summary.mean_steps)},
                       {"mean_priority_size", round_significant(summary.mean_priority_size)},
                       {"mit_steps_ratio", round_significant(summary.mit_steps_ratio)},
                       {"person_rate", round_significant(summary.person_rate)},
                       {"converged", summary.converged}}));
  write_manifest(o, "mitigate", configs, backend_id, out, log);
  log << "MitAmt " << format_number(summary.mit_amt) << ", MitSteps "
      << format_number(100.0 * summary.mit_steps_ratio) << "% (" << format_number(summary.mean_steps)
      << "/" << format_number(summary.mean_priority_size) << ")\n";
  return summary.converged == summary.runs ? kExitOk : kExitNotConverged;
}

int cmd_validate(const RunOptions& o, std::ostream& log) {
  const auto configs = prepare_configs(o);
  std::vector<std::vector<double>> pre_all;
  std::vector<std::vector<double>> post_all;
  std::string pairs_csv = "prompt,intervened,measured,is,is_mit\n";
  std::string backend_id;
  for (const auto& config : configs) {
    auto handle = open_backend(o.backend, config, store_dir(o));
    backend_id = handle.id;
    const PromptSet initial = initial_prompt_set(config);
    const Audit audit = audit_prompt_set(config, initial, *handle.auditor);
    const SensitivityMatrix matrix = build_matrix(audit.data, config);

    std::vector<double> pre;
    std::vector<double> post;
    for (std::size_t i = 0; i < config.axes.size(); ++i) {
      const auto& x = config.axes[i];
      const PromptSet mitigated = pm_mitigate(initial, x, config.image_budget);
      const auto after = deviations_of(config, handle.auditor->audit_set(mitigated).distributions);
      for (std::size_t j = 0; j < config.axes.size(); ++j) {
        if (i == j) continue;
        const auto& entry = matrix.at(matrix.row_index(x.id), j);
        const auto mit = intersectional_sensitivity(x.id, entry.w_init, after.at(config.axes[j].id));
        pre.push_back(entry.is_value);
        post.push_back(mit.is_value);
        pairs_csv += "\"" + config.base_prompt + "\"," + x.id + "," + config.axes[j].id + "," +
                     format_number(entry.is_value) + "," + format_number(mit.is_value) + "\n";
      }
    }
    pre_all.push_back(std::move(pre));
    post_all.push_back(std::move(post));
  }

  const auto report = validate_correlation(pre_all, post_all);
  std::string corr_csv = "prompt,pearson_r,negative_fraction_is_mit\n";
  std::vector<double> all_post;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& r = report.per_prompt[i];
    corr_csv += "\"" + configs[i].base_prompt + "\"," +
                (r ? format_number(*r) : std::string("undefined")) + "," +
                format_number(negative_fraction(post_all[i])) + "\n";
    all_post.insert(all_post.end(), post_all[i].begin(), post_all[i].end());
    log << "validate: \"" << configs[i].base_prompt << "\" r = "
        << (r ? format_number(*r) : std::string("undefined (constant series)")) << "\n";
  }
  corr_csv += "mean," + (report.mean ? format_number(*report.mean) : std::string("undefined")) +
              "," + format_number(negative_fraction(all_post)) + "\n";
  log << "validate: mean r = "
      << (report.mean ? format_number(*report.mean) : std::string("undefined")) << "\n";

  OutputSet out(o.out);
  out.write("correlation.csv", corr_csv);
  out.write("pairs.csv", pairs_csv);
  write_manifest(o, "validate", configs, backend_id, out, log);
  return kExitOk;
}

int cmd_robustness(const RunOptions& o, std::ostream& log) {
  const auto configs = prepare_configs(o);
  if (configs.size() != 1) throw ConfigError("robustness takes exactly one config");
  const AuditConfig& config = configs.front();
  auto handle = open_backend(o.backend, config, store_dir(o));
  if (handle.analytic) {
    throw ConfigError("robustness needs annotation records; use a sampled, replay or remote backend");
  }
  const Audit audit = audit_prompt_set(config, initial_prompt_set(config), *handle.auditor);
  SweepSpec spec = o.sweep;
  if (!o.sweep_seed_set) spec.seed = config.seed;
  const auto rows = robustness_sweep(audit.records, config, spec);

  OutputSet out(o.out);
  out.write("matrix.csv", matrix_to_csv(build_matrix(audit.data, config)));
  out.write("robustness.csv", sweep_to_csv(rows));
  RunOptions recorded = o;
  recorded.sweep = spec;
  recorded.sweep_seed_set = true;
  write_manifest(recorded, "robustness", configs, handle.id, out, log);
  for (const auto& r : rows) {
    log << "robustness: " << r.kind << " " << format_number(r.level) << " -> mean |dIS| "
        << format_number(r.mean_abs_delta) << " (" << format_number(100.0 * r.relative_change)
        << "%)\n";
  }
  return kExitOk;
}

int cmd_replay(const fs::path& manifest_path, const std::optional<fs::path>& out,
               std::ostream& log) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest: " + std::string(e.what()));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const fs::path base = manifest_path.parent_path();
  RunOptions o;
  std::string command;
  try {
    command = manifest.at("command").get<std::string>();
    o.config_docs = manifest.at("configs").get<std::vector<json>>();
    const json& opts = manifest.at("options");
    o.frozen_matrix = opts.value("frozen_matrix", false);
    if (opts.contains("priority")) o.priority = opts.at("priority").get<std::string>();
    if (opts.contains("sweep")) {
      const json& s = opts.at("sweep");
      o.sweep.error_rates = s.at("error_rates").get<std::vector<double>>();
      o.sweep.keep_fractions = s.at("keep_fractions").get<std::vector<double>>();
      o.sweep.seeds = s.at("seeds").get<int>();
      o.sweep.seed = s.at("seed").get<std::uint64_t>();
      o.sweep_seed_set = s.value("seed_set", true);
    }
    fs::path store = manifest.at("store").get<std::string>();
    if (store.is_relative()) store = base / store;
    const std::string backend = manifest.at("backend").get<std::string>();
    o.backend = backend == "synthetic:analytic" ? backend : "replay:" + store.string();
    o.store = store;
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest: " + std::string(e.what()));
  }
  o.out = out.value_or(base / "replay");

  const int code = run_command(command, o, log);
  if (code == kExitConfigError || code == kExitBackendError) return code;

  int mismatches = 0;
  int checked = 0;
  for (const auto& [name, digest] : manifest.at("outputs").items()) {
    ++checked;
    const fs::path produced = o.out / name;
    if (!fs::exists(produced) || file_digest(produced) != digest.get<std::string>()) {
      log << "replay: " << name << " differs from the recorded run\n";
      ++mismatches;
    }
  }
  log << "replay: " << (checked - mismatches) << "/" << checked << " outputs bit-identical\n";
  return mismatches == 0 ? kExitOk : kExitBackendError;
}

int run_command(const std::string& name, const RunOptions& options, std::ostream& log) {
  try {
    if (name == "audit") return cmd_audit(options, log);
    if (name == "mitigate") return cmd_mitigate(options, log);
    if (name == "validate") return cmd_validate(options, log);
    if (name == "robustness") return cmd_robustness(options, log);
    throw ConfigError("unknown command '" + name + "'");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const BudgetError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const BackendError& e) {
    log << "backend error: " << e.what() << "\n";
    return kExitBackendError;
  } catch (const DataError& e) {
    log << "error: " << e.what() << "\n";
    return kExitBackendError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitBackendError;
  }
}

}  // namespace biasmatrix
