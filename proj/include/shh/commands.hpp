#pragma once

// In-process implementations of the CLI subcommands. Each returns an exit
// code: 0 ok, 1 per-sample errors, 2 fatal.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "shh/config.hpp"
#include "shh/digest.hpp"
#include "shh/evaluation.hpp"
#include "shh/jsonl.hpp"
#include "shh/label_builder.hpp"
#include "shh/labeling.hpp"
#include "shh/parallel.hpp"
#include "shh/prompt_builder.hpp"
#include "shh/router.hpp"

namespace shh {

enum ExitCode : int { kExitOk = 0, kExitSampleErrors = 1, kExitFatal = 2 };

struct CommandOptions {
  std::optional<std::string> config;
  std::optional<std::string> dataset;
  std::optional<std::string> traces;
  std::optional<std::string> labels;
  std::optional<std::string> hypotheses;
  std::optional<std::string> report;
  std::optional<std::string> policy;
  std::string out = ".";
  std::optional<std::size_t> workers;
  bool strict = false;
  bool quiet = false;
  std::ostream* out_stream = &std::cout;
  std::ostream* err_stream = &std::cerr;
};

namespace detail {

inline const std::string& need(const std::optional<std::string>& v, const char* flag) {
  if (!v) throw Error(ErrorCode::ConfigError, std::string("missing required option ") + flag);
  return *v;
}

inline std::filesystem::path out_path(const CommandOptions& o, const std::string& name) {
  return std::filesystem::path(o.out) / name;
}

inline RunConfig load_run_config(const CommandOptions& o) {
  RunConfig c = load_config(need(o.config, "--config"));
  if (o.strict) {
    c.router.strict = true;
    c.effective["strict"] = true;
  }
  if (o.policy) {
    c.policy = policy_from_string(*o.policy);
    c.effective["policy"] = c.policy.to_json();
  }
  if (o.workers) c.workers = std::max<std::size_t>(*o.workers, 1);
  return c;
}

inline json base_manifest(const std::string& command, const RunConfig& c,
                          const std::string& dataset_path) {
  return {{"command", command},
          {"config_hash", c.hash()},
          {"dataset_digest", file_sha256(dataset_path)},
          {"fixture_digests", c.fixture_digests()},
          {"seeds", seeds_json(c.router)},
          {"template_versions", template_versions_json()}};
}

inline int exit_for(std::size_t problems) { return problems ? kExitSampleErrors : kExitOk; }

}  // namespace detail

/// Labeled JSONL, token-distribution summary, error sidecar, manifest.
inline int cmd_label(const CommandOptions& o) {
  const RunConfig c = detail::load_run_config(o);
  const std::string& dataset = detail::need(o.dataset, "--dataset");
  const auto samples = read_samples(dataset);
  const auto gw = c.make_gateway();
  LabelRun run = build_labeled_dataset(samples, *gw, c.router, c.workers);

  const std::size_t total = run.examples.size();
  json proportions = json::object();
  for (const auto& [tok, n] : run.token_counts) {
    proportions[tok] = total ? static_cast<double>(n) / static_cast<double>(total) : 0.0;
  }
  json summary = {{"labeled", total},
                  {"failed", run.failures.size()},
                  {"token_counts", run.token_counts},
                  {"token_proportions", std::move(proportions)}};
  json manifest = detail::base_manifest("label", c, dataset);
  manifest["normalization"] = c.effective["normalization"];
  manifest["sample_count"] = samples.size();
  manifest["labeled_count"] = total;
  manifest["failure_count"] = run.failures.size();

  write_file_atomic(detail::out_path(o, "labeled.jsonl"), to_jsonl_of(run.examples));
  write_file_atomic(detail::out_path(o, "label_summary.json"), pretty(summary));
  write_file_atomic(detail::out_path(o, "errors.jsonl"), to_jsonl_of(run.failures));
  write_file_atomic(detail::out_path(o, "manifest.json"), pretty(manifest));
  if (!o.quiet) *o.out_stream << summary.dump(2) << "\n";
  return detail::exit_for(run.failures.size());
}

/// One export row per labeled example: arbiter prompt plus target string.
inline int cmd_format_sft(const CommandOptions& o) {
  const std::string& input = o.labels ? *o.labels : detail::need(o.dataset, "--labels");
  const auto examples = read_jsonl<LabeledExample>(input, labeled_example_from_json);
  std::string out;
  for (const auto& ex : examples) {
    const PromptBundle prompt = build_arbiter_prompt(ex.sample, ex.hypotheses);
    const ModelOutput parsed = parse_model_output(ex.sft_target);
    if (parsed.token != ex.oracle_token) {
      throw Error(ErrorCode::SchemaError,
                  "target of '" + ex.sample.sample_id + "' does not round-trip");
    }
    json row = {{"sample_id", ex.sample.sample_id},
                {"dataset_id", ex.sample.dataset_id},
                {"task", std::string(to_string(ex.sample.task))},
                {"prompt_bundle", to_json(prompt)},
                {"target", ex.sft_target}};
    out += row.dump();
    out += '\n';
  }
  write_file_atomic(detail::out_path(o, "sft.jsonl"), out);
  if (!o.quiet) *o.out_stream << examples.size() << " SFT rows\n";
  return kExitOk;
}

/// Traces, error sidecar and manifest. Recovered per-sample issues (fallbacks)
/// are listed in the sidecar with "recovered": true.
inline int cmd_route(const CommandOptions& o) {
  const RunConfig c = detail::load_run_config(o);
  const std::string& dataset = detail::need(o.dataset, "--dataset");
  const auto samples = read_samples(dataset);
  const auto gw = c.make_gateway();

  RunIdentity id{c.hash(), file_sha256(dataset), c.fixture_digests()};
  PipelineResult res = run_pipeline(samples, *gw, c.policy, c.router, c.workers, id);

  std::string errors;
  std::size_t problems = res.failures.size();
  for (const auto& f : res.failures) {
    json j = to_json(f);
    j["recovered"] = false;
    errors += j.dump() + "\n";
  }
  for (const auto& t : res.traces) {
    if (!t.errors.empty()) ++problems;
    for (const auto& e : t.errors) {
      errors += json{{"sample_id", t.sample_id},
                     {"dataset_id", t.dataset_id},
                     {"stage", e.stage},
                     {"error", std::string(to_string(e.code))},
                     {"message", e.message},
                     {"recovered", true}}
                    .dump() +
                "\n";
    }
  }
  write_file_atomic(detail::out_path(o, "traces.jsonl"), to_jsonl_of(res.traces));
  write_file_atomic(detail::out_path(o, "errors.jsonl"), errors);
  write_file_atomic(detail::out_path(o, "manifest.json"), pretty(res.manifest));
  if (!o.quiet) {
    *o.out_stream << res.traces.size() << " traces, " << res.failures.size() << " failed\n";
  }
  return detail::exit_for(problems);
}

namespace detail {

inline void write_rendered(const CommandOptions& o, const EvalReport& report) {
  const RenderedReport r = report_render(report);
  for (const auto& [name, body] : r.csv_files) write_file_atomic(out_path(o, name), body);
  write_file_atomic(out_path(o, "report.txt"), r.text);
  if (!o.quiet) *o.out_stream << r.text;
}

}  // namespace detail

/// report.json plus CSV and text tables.
inline int cmd_eval(const CommandOptions& o) {
  const std::string& traces_path = detail::need(o.traces, "--traces");
  const auto samples = read_samples(detail::need(o.dataset, "--dataset"));
  const auto traces = read_jsonl<RoutingTrace>(traces_path, trace_from_json);
  NormalizationPolicy norm;
  if (o.config) norm = detail::load_run_config(o).router.normalization;

  std::map<std::string, ActionToken> oracle_tokens;
  if (o.labels) {
    for (const auto& ex : read_jsonl<LabeledExample>(*o.labels, labeled_example_from_json)) {
      oracle_tokens.emplace(ex.sample.sample_id, ex.oracle_token);
    }
  }
  const EvalReport report = evaluate(traces, samples, norm, oracle_tokens);
  json j = to_json(report);
  const auto manifest = std::filesystem::path(traces_path).parent_path() / "manifest.json";
  if (std::filesystem::exists(manifest)) {
    j["run_manifest"] = {{"file", "manifest.json"}, {"sha256", file_sha256(manifest.string())}};
  }
  write_file_atomic(detail::out_path(o, "report.json"), pretty(j));
  detail::write_rendered(o, report);
  return kExitOk;
}

namespace detail {

/// Rows carrying a "hypotheses" object (labeled examples, traces) or the
/// hypothesis fields inline, each with a sample_id.
inline std::map<std::string, HypothesisSet> read_hypotheses(const std::string& path) {
  std::map<std::string, HypothesisSet> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    std::string id;
    if (j.contains("sample_id")) {
      id = require_string(j, "sample_id");
    } else {
      id = require_string(require(j, "sample"), "sample_id");
    }
    const json& h = j.contains("hypotheses") ? j["hypotheses"] : j;
    if (!out.emplace(id, hypotheses_from_json(h)).second) {
      throw Error(ErrorCode::SchemaError, "duplicate hypotheses for '" + id + "'");
    }
  });
  return out;
}

}  // namespace detail

/// Oracle bound from recorded hypotheses, or from fresh first-pass decodes
/// when only --config is given.
inline int cmd_oracle(const CommandOptions& o) {
  const std::string& dataset = detail::need(o.dataset, "--dataset");
  const auto samples = read_samples(dataset);
  NormalizationPolicy norm;
  std::vector<std::optional<HypothesisSet>> hyps(samples.size());
  std::vector<SampleFailure> failures;

  if (o.hypotheses) {
    if (o.config) norm = detail::load_run_config(o).router.normalization;
    const auto table = detail::read_hypotheses(*o.hypotheses);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (auto it = table.find(samples[i].sample_id); it != table.end()) hyps[i] = it->second;
    }
  } else {
    const RunConfig c = detail::load_run_config(o);
    norm = c.router.normalization;
    const auto gw = c.make_gateway();
    parallel_for(samples.size(), c.workers, [&](std::size_t i) {
      RoutingTrace scratch;
      try {
        auto h = first_pass(samples[i], *gw, c.router, samples[i].audio_ref, true, scratch);
        // QA has no correction candidate; the audio-only re-answer stands in.
        if (samples[i].task == Task::Qa && (gw->has(Role::Rewrite) || gw->has(Role::Ger))) {
          const auto prompt = build_rewrite_prompt(samples[i], h);
          auto req = gw->request(detail::rewrite_role(*gw), samples[i].sample_id, prompt.render(),
                                 prompt.template_id, samples[i].audio_ref, c.router.rewrite_seed);
          h.ger = detail::call(*gw, scratch, req).text;
        }
        if (scratch.errors.empty()) hyps[i] = std::move(h);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError ||
            (c.router.strict && e.code() == ErrorCode::FixtureMiss)) {
          throw;
        }
      }
    });
  }

  std::vector<Sample> kept;
  std::vector<HypothesisSet> kept_hyps;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (hyps[i]) {
      kept.push_back(samples[i]);
      kept_hyps.push_back(*hyps[i]);
    } else {
      failures.push_back({samples[i].sample_id, samples[i].dataset_id, "oracle",
                          ErrorCode::MissingHypothesis, "no hypotheses for sample"});
    }
  }

  json out = json::object();
  std::string text;
  for (Task t : {Task::Asr, Task::Qa}) {
    const bool present = std::any_of(kept.begin(), kept.end(),
                                     [t](const Sample& s) { return s.task == t; });
    if (!present) continue;
    const OracleBound b = oracle_bound(kept, kept_hyps, t, norm);
    out[std::string(to_string(t))] = to_json(b);
    text += std::string(t == Task::Asr ? "oracle WER " : "oracle accuracy ") +
            detail::fmt_ratio(b.value) + " over " + std::to_string(b.total) + " samples\n";
  }
  out["missing"] = failures.size();
  write_file_atomic(detail::out_path(o, "oracle.json"), pretty(out));
  write_file_atomic(detail::out_path(o, "errors.jsonl"), to_jsonl_of(failures));
  if (!o.quiet) *o.out_stream << text;
  return detail::exit_for(failures.size());
}

/// Re-renders CSV and text tables from a report.json.
inline int cmd_report(const CommandOptions& o) {
  const std::string& path = detail::need(o.report, "--report");
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaError, path + ": invalid JSON");
  detail::write_rendered(o, eval_report_from_json(j));
  return kExitOk;
}

/// Dispatch with fatal errors mapped to exit code 2.
inline int run_command(const std::string& name, const CommandOptions& o) {
  try {
    if (name == "label") return cmd_label(o);
    if (name == "format-sft") return cmd_format_sft(o);
    if (name == "route") return cmd_route(o);
    if (name == "eval") return cmd_eval(o);
    if (name == "oracle") return cmd_oracle(o);
    if (name == "report") return cmd_report(o);
    *o.err_stream << "unknown command '" << name << "'\n";
  } catch (const Error& e) {
    *o.err_stream << "error [" << to_string(e.code()) << "]: " << e.message() << "\n";
  } catch (const std::exception& e) {
    *o.err_stream << "error: " << e.what() << "\n";
  }
  return kExitFatal;
}

}  // namespace shh
