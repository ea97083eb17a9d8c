#pragma once

// Agentic inference: gather first-pass hypotheses, obtain an action token,
// then execute it (select a source, rewrite, or enhance the audio with a tool
// and decide again).

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shh/action_token.hpp"
#include "shh/backend_gateway.hpp"
#include "shh/error.hpp"
#include "shh/label_builder.hpp"
#include "shh/parallel.hpp"
#include "shh/prompt_builder.hpp"
#include "shh/prompt_templates.hpp"
#include "shh/text_metrics.hpp"
#include "shh/tool_actions.hpp"
#include "shh/types.hpp"

namespace shh {

enum class PolicyKind { Model, Oracle, Fixed, CascadeGer };

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Model: return "model";
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Fixed: return "fixed";
    case PolicyKind::CascadeGer: return "cascade_ger";
  }
  return "";
}

inline PolicyKind policy_kind_from_string(std::string_view s) {
  for (auto k : {PolicyKind::Model, PolicyKind::Oracle, PolicyKind::Fixed,
                 PolicyKind::CascadeGer}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::ConfigError, "unknown policy '" + std::string(s) + "'");
}

struct ArbitrationPolicy {
  PolicyKind kind = PolicyKind::Model;
  ActionToken fixed_token = ActionToken::internal();
  ActionToken fallback_token = ActionToken::internal();
  // Ignore an arbiter's "<rewrite> text" payload and issue a rewrite call.
  bool separate_rewrite_call = false;

  static ArbitrationPolicy model(ActionToken fallback = ActionToken::internal()) {
    return {PolicyKind::Model, ActionToken::internal(), std::move(fallback), false};
  }
  static ArbitrationPolicy oracle() { return {PolicyKind::Oracle}; }
  static ArbitrationPolicy fixed(ActionToken token) {
    ArbitrationPolicy p{PolicyKind::Fixed, std::move(token)};
    p.validate();
    return p;
  }
  static ArbitrationPolicy cascade_ger() { return {PolicyKind::CascadeGer}; }

  void validate() const {
    if (fixed_token.is_tool() || fallback_token.is_tool()) {
      throw Error(ErrorCode::ConfigError, "fixed and fallback tokens cannot be tools");
    }
  }

  json to_json() const {
    return {{"kind", std::string(to_string(kind))},
            {"fixed_token", fixed_token.render()},
            {"fallback_token", fallback_token.render()},
            {"separate_rewrite_call", separate_rewrite_call}};
  }
};

struct RouterConfig {
  // One external decode per seed: the N-best list for ASR, the k majority
  // samples for QA.
  std::vector<std::int64_t> external_seeds{0};
  std::int64_t internal_seed = 0;
  std::int64_t ger_seed = 0;
  std::int64_t arbiter_seed = 0;
  std::int64_t rewrite_seed = 0;
  std::size_t max_tool_depth = 1;
  bool strict = false;
  NormalizationPolicy normalization;
  ToolRegistry tools = ToolRegistry::with_default_mocks();

  std::size_t k() const { return external_seeds.size(); }

  void validate() const {
    detail::check_seeds(external_seeds);
  }
};

struct CallRecord {
  Role role = Role::Internal;
  std::string backend_id;
  std::int64_t seed = 0;
  std::int64_t latency_ms = 0;
  std::string audio_ref;
  bool ok = true;
};

struct TraceIssue {
  std::string stage;
  ErrorCode code = ErrorCode::BackendError;
  std::string message;
};

struct ToolApplication {
  std::string tool_name;
  std::string old_audio_ref;
  std::string new_audio_ref;
};

struct RoutingTrace {
  std::string sample_id;
  std::string dataset_id;
  Task task = Task::Asr;
  HypothesisSet hypotheses;
  ActionToken decision = ActionToken::internal();
  std::vector<ActionToken> decision_path;
  std::string decision_source;  // policy kind, or "fallback"
  std::vector<ToolApplication> tool_applications;
  std::string final_text;
  std::vector<CallRecord> calls;
  std::vector<TraceIssue> errors;
  std::vector<std::string> warnings;
};

struct RoutingContext {
  const Gateway& gateway;
  const RouterConfig& config;
  const ArbitrationPolicy& policy;
};

namespace detail {

// Records a recoverable failure; replay misses are fatal in strict mode.
inline void note_issue(const RouterConfig& config, RoutingTrace& trace,
                       std::string stage, const Error& e) {
  if (config.strict && e.code() == ErrorCode::FixtureMiss) throw e;
  trace.errors.push_back({std::move(stage), e.code(), e.message()});
}

inline GenerationResult call(const Gateway& gw, RoutingTrace& trace,
                             const GenerationRequest& req) {
  try {
    auto r = gw.generate(req);
    trace.calls.push_back({req.role, r.backend_id, r.seed, r.latency_ms, req.audio_ref, true});
    return r;
  } catch (const Error&) {
    trace.calls.push_back({req.role, gw.backend(req.role).spec().backend_id,
                           req.seed.value_or(0), 0, req.audio_ref, false});
    throw;
  }
}

inline HypothesisMeta meta_of(Role role, std::size_t index, const GenerationResult& r,
                              const GenerationRequest& req) {
  return {std::string(to_string(role)), index, r.backend_id, r.seed, req.params.temperature};
}

inline bool token_available(const ActionToken& t, const HypothesisSet& h) {
  if (t.kind() == ActionKind::Internal) return h.internal.has_value();
  if (t.kind() == ActionKind::External) return !h.external_nbest.empty();
  return true;
}

inline ActionToken available_source(const HypothesisSet& h) {
  return h.internal ? ActionToken::internal() : ActionToken::external();
}

inline Role rewrite_role(const Gateway& gw) {
  if (gw.has(Role::Rewrite)) return Role::Rewrite;
  if (gw.has(Role::Ger)) return Role::Ger;
  throw Error(ErrorCode::ConfigError, "rewrite needs a 'rewrite' or 'ger' backend");
}

}  // namespace detail

/// Correction candidate conditioned on the audio and the external N-best.
inline std::string fetch_ger(const Sample& sample, const HypothesisSet& hyps,
                             const Gateway& gw, const RouterConfig& config,
                             const std::string& audio_ref, RoutingTrace& trace) {
  const auto prompt = build_ger_prompt(sample, hyps);
  auto req = gw.request(Role::Ger, sample.sample_id, prompt.render(), prompt.template_id,
                        audio_ref, config.ger_seed);
  return detail::call(gw, trace, req).text;
}

/// Internal decode plus one external decode per configured seed. A failed
/// side leaves its slot empty (degraded mode); the sample fails only when
/// both sides fail. With `fetch_ger`, ASR samples also get a correction
/// candidate.
inline HypothesisSet first_pass(const Sample& sample, const Gateway& gw,
                                const RouterConfig& config, const std::string& audio_ref,
                                bool fetch_ger_candidate, RoutingTrace& trace) {
  HypothesisSet hyps;
  const auto prompt = build_first_pass_prompt(sample);
  const std::string text = prompt.render();

  try {
    auto req = gw.request(Role::Internal, sample.sample_id, text, prompt.template_id,
                          audio_ref, config.internal_seed);
    auto r = detail::call(gw, trace, req);
    hyps.meta.push_back(detail::meta_of(Role::Internal, 0, r, req));
    hyps.internal = std::move(r.text);
  } catch (const Error& e) {
    detail::note_issue(config, trace, "internal", e);
  }

  auto ext_req = gw.request(Role::External, sample.sample_id, text, prompt.template_id,
                            audio_ref);
  for (auto& slot : gw.sample_k(ext_req, config.external_seeds)) {
    if (slot.ok()) {
      trace.calls.push_back({Role::External, slot.result->backend_id, slot.seed,
                             slot.result->latency_ms, audio_ref, true});
      GenerationRequest r = ext_req;
      r.seed = slot.seed;
      hyps.meta.push_back(
          detail::meta_of(Role::External, hyps.external_nbest.size(), *slot.result, r));
      hyps.external_nbest.push_back(std::move(slot.result->text));
    } else {
      trace.calls.push_back({Role::External, gw.backend(Role::External).spec().backend_id,
                             slot.seed, 0, audio_ref, false});
      detail::note_issue(config, trace, "external", *slot.error);
    }
  }

  if (!hyps.internal && hyps.external_nbest.empty()) {
    throw Error(ErrorCode::BackendError,
                "both internal and external first-pass decodes failed for '" +
                    sample.sample_id + "'");
  }

  if (fetch_ger_candidate && sample.task == Task::Asr && !hyps.external_nbest.empty()) {
    try {
      hyps.ger = fetch_ger(sample, hyps, gw, config, audio_ref, trace);
      const auto& last = trace.calls.back();
      hyps.meta.push_back({"ger", 0, last.backend_id, last.seed,
                           gw.backend(Role::Ger).spec().params.temperature});
    } catch (const Error& e) {
      detail::note_issue(config, trace, "ger", e);
    }
  }
  return hyps;
}

struct Decision {
  ActionToken token = ActionToken::internal();
  std::optional<std::string> payload;
  std::string source;
};

/// Produces the action token for one sample under `ctx.policy`. Malformed
/// arbiter output and arbiter failures resolve to the policy's fallback
/// token; a token naming a missing source is redirected to the available one.
inline Decision decide_action(const Sample& sample, HypothesisSet& hyps,
                              const RoutingContext& ctx, const std::string& audio_ref,
                              RoutingTrace& trace) {
  const auto& policy = ctx.policy;
  Decision d;
  d.source = std::string(to_string(policy.kind));

  auto fall_back = [&](const std::string& why) {
    d.token = policy.fallback_token;
    d.payload.reset();
    d.source = "fallback";
    trace.warnings.push_back(why + "; using " + d.token.render());
  };

  const bool complete = hyps.internal && !hyps.external_nbest.empty();
  switch (policy.kind) {
    case PolicyKind::Fixed:
      d.token = policy.fixed_token;
      break;
    case PolicyKind::CascadeGer:
      d.token = ActionToken::rewrite();
      break;
    case PolicyKind::Oracle:
      if (!complete) {
        fall_back("oracle needs both first-pass hypotheses");
        break;
      }
      try {
        if (sample.task == Task::Asr && !hyps.ger) {
          hyps.ger = fetch_ger(sample, hyps, ctx.gateway, ctx.config, audio_ref, trace);
        }
        d.token = oracle_label(sample, hyps, ctx.config.normalization);
      } catch (const Error& e) {
        detail::note_issue(ctx.config, trace, "oracle", e);
        fall_back(std::string("oracle label unavailable (") +
                  std::string(to_string(e.code())) + ")");
      }
      break;
    case PolicyKind::Model: {
      if (!complete) {
        d.token = detail::available_source(hyps);
        d.source = "fallback";
        trace.warnings.push_back("first pass incomplete; routed to the available source");
        break;
      }
      const auto prompt = build_arbiter_prompt(sample, hyps);
      auto req = ctx.gateway.request(Role::Arbiter, sample.sample_id, prompt.render(),
                                     prompt.template_id, audio_ref, ctx.config.arbiter_seed);
      std::string raw;
      try {
        raw = detail::call(ctx.gateway, trace, req).text;
      } catch (const Error& e) {
        detail::note_issue(ctx.config, trace, "arbiter", e);
        fall_back("arbiter call failed");
        break;
      }
      try {
        auto parsed = parse_model_output(raw, ctx.config.tools.names());
        d.token = parsed.token;
        if (!parsed.payload.empty()) d.payload = std::move(parsed.payload);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoActionToken && e.code() != ErrorCode::UnknownTool) throw;
        trace.errors.push_back({"arbiter", e.code(), e.message()});
        fall_back(std::string(to_string(e.code())));
      }
      break;
    }
  }

  if (!detail::token_available(d.token, hyps)) {
    const auto redirected = detail::available_source(hyps);
    trace.warnings.push_back(d.token.render() + " unavailable; routed to " +
                             redirected.render());
    d.token = redirected;
    d.payload.reset();
    d.source = "fallback";
  }
  return d;
}

/// Carries out `decision` at tool depth `depth` and returns the final text.
/// A tool action enhances the audio, re-runs the first pass on the new
/// reference and decides again one level deeper; when the tool fails or the
/// depth budget is spent, the policy's fallback token is executed instead.
inline std::string execute_action(const Decision& decision, const Sample& sample,
                                  HypothesisSet& hyps, const RoutingContext& ctx,
                                  const std::string& audio_ref, std::size_t depth,
                                  RoutingTrace& trace) {
  if (depth > ctx.config.max_tool_depth) {
    throw Error(ErrorCode::MaxDepthExceeded,
                "tool depth " + std::to_string(depth) + " exceeds " +
                    std::to_string(ctx.config.max_tool_depth));
  }
  trace.decision_path.push_back(decision.token);

  auto run_fallback = [&](const std::string& why) {
    Decision fb{ctx.policy.fallback_token, std::nullopt, "fallback"};
    if (!detail::token_available(fb.token, hyps)) fb.token = detail::available_source(hyps);
    trace.warnings.push_back(why + "; using " + fb.token.render());
    return execute_action(fb, sample, hyps, ctx, audio_ref, depth, trace);
  };

  switch (decision.token.kind()) {
    case ActionKind::Internal:
      trace.decision = decision.token;
      trace.decision_source = decision.source;
      if (!hyps.internal) {
        throw Error(ErrorCode::MissingHypothesis, "no internal hypothesis to return");
      }
      return *hyps.internal;

    case ActionKind::External:
      trace.decision = decision.token;
      trace.decision_source = decision.source;
      return hyps.external_nbest.at(external_consensus_index(sample, hyps));

    case ActionKind::Rewrite: {
      trace.decision = decision.token;
      trace.decision_source = decision.source;
      if (decision.payload && !ctx.policy.separate_rewrite_call) return *decision.payload;
      if (hyps.ger) return *hyps.ger;
      const Role role = detail::rewrite_role(ctx.gateway);
      const auto prompt = build_rewrite_prompt(sample, hyps);
      auto req = ctx.gateway.request(role, sample.sample_id, prompt.render(),
                                     prompt.template_id, audio_ref, ctx.config.rewrite_seed);
      return detail::call(ctx.gateway, trace, req).text;
    }

    case ActionKind::Tool: {
      if (depth + 1 > ctx.config.max_tool_depth) {
        trace.errors.push_back({"tool", ErrorCode::MaxDepthExceeded,
                                "tool budget of " + std::to_string(ctx.config.max_tool_depth) +
                                    " exhausted"});
        return run_fallback("tool depth exhausted");
      }
      std::string enhanced;
      try {
        enhanced = apply_tool(ctx.config.tools, decision.token.tool_name(), audio_ref);
      } catch (const Error& e) {
        trace.errors.push_back({"tool", e.code(), e.message()});
        return run_fallback("tool " + decision.token.tool_name() + " failed");
      }
      trace.tool_applications.push_back({decision.token.tool_name(), audio_ref, enhanced});
      HypothesisSet fresh = first_pass(sample, ctx.gateway, ctx.config, enhanced, false, trace);
      hyps = std::move(fresh);
      const Decision next = decide_action(sample, hyps, ctx, enhanced, trace);
      return execute_action(next, sample, hyps, ctx, enhanced, depth + 1, trace);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled action token");
}

/// Full routing of one sample.
inline RoutingTrace route_sample(const Sample& sample, const RoutingContext& ctx) {
  RoutingTrace trace;
  trace.sample_id = sample.sample_id;
  trace.dataset_id = sample.dataset_id;
  trace.task = sample.task;
  HypothesisSet hyps =
      first_pass(sample, ctx.gateway, ctx.config, sample.audio_ref, false, trace);
  const Decision d = decide_action(sample, hyps, ctx, sample.audio_ref, trace);
  trace.final_text = execute_action(d, sample, hyps, ctx, sample.audio_ref, 0, trace);
  trace.hypotheses = std::move(hyps);
  return trace;
}

// ---------------------------------------------------------------------------
// Pipeline

struct SampleFailure {
  std::string sample_id;
  std::string dataset_id;
  std::string stage;
  ErrorCode code = ErrorCode::BackendError;
  std::string message;
};

inline json to_json(const SampleFailure& f) {
  return {{"sample_id", f.sample_id},
          {"dataset_id", f.dataset_id},
          {"stage", f.stage},
          {"error", std::string(to_string(f.code))},
          {"message", f.message}};
}

/// Inputs that identify a run for its manifest.
struct RunIdentity {
  std::string config_hash;
  std::string dataset_digest;
  std::map<std::string, std::string> fixture_digests;
};

inline json seeds_json(const RouterConfig& config) {
  return {{"internal", config.internal_seed},
          {"external", config.external_seeds},
          {"ger", config.ger_seed},
          {"arbiter", config.arbiter_seed},
          {"rewrite", config.rewrite_seed}};
}

inline json template_versions_json() {
  json j = json::object();
  for (const auto& t : templates::catalog()) j[std::string(t.id)] = std::string(t.version);
  return j;
}

struct PipelineResult {
  std::vector<RoutingTrace> traces;
  std::vector<SampleFailure> failures;
  json manifest;
};

/// Routes every sample; traces and failures keep input order for any worker
/// count. Only strict-mode replay misses and configuration errors abort.
inline PipelineResult run_pipeline(std::span<const Sample> samples, const Gateway& gateway,
                                   const ArbitrationPolicy& policy, const RouterConfig& config,
                                   std::size_t workers = 1, const RunIdentity& identity = {}) {
  policy.validate();
  config.validate();
  const RoutingContext ctx{gateway, config, policy};

  std::vector<std::optional<RoutingTrace>> traces(samples.size());
  std::vector<std::optional<SampleFailure>> failures(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const auto& s = samples[i];
    try {
      traces[i] = route_sample(s, ctx);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError ||
          (config.strict && e.code() == ErrorCode::FixtureMiss)) {
        throw;
      }
      failures[i] = SampleFailure{s.sample_id, s.dataset_id, "route", e.code(), e.message()};
    }
  });

  PipelineResult out;
  for (auto& t : traces) {
    if (t) out.traces.push_back(std::move(*t));
  }
  for (auto& f : failures) {
    if (f) out.failures.push_back(std::move(*f));
  }

  out.manifest = {{"command", "route"},
                  {"policy", policy.to_json()},
                  {"config_hash", identity.config_hash},
                  {"dataset_digest", identity.dataset_digest},
                  {"fixture_digests", identity.fixture_digests},
                  {"seeds", seeds_json(config)},
                  {"template_versions", template_versions_json()},
                  {"max_tool_depth", config.max_tool_depth},
                  {"strict", config.strict},
                  {"tools", config.tools.names()},
                  {"sample_count", samples.size()},
                  {"trace_count", out.traces.size()},
                  {"failure_count", out.failures.size()}};
  return out;
}

// ---------------------------------------------------------------------------
// Trace JSON

inline json to_json(const RoutingTrace& t) {
  json path = json::array();
  for (const auto& tok : t.decision_path) path.push_back(tok.render());
  json tools = json::array();
  for (const auto& a : t.tool_applications) {
    tools.push_back({{"tool", a.tool_name},
                     {"old_audio_ref", a.old_audio_ref},
                     {"new_audio_ref", a.new_audio_ref}});
  }
  json calls = json::array();
  for (const auto& c : t.calls) {
    calls.push_back({{"role", std::string(to_string(c.role))},
                     {"backend_id", c.backend_id},
                     {"seed", c.seed},
                     {"latency_ms", c.latency_ms},
                     {"audio_ref", c.audio_ref},
                     {"ok", c.ok}});
  }
  json errors = json::array();
  for (const auto& e : t.errors) {
    errors.push_back({{"stage", e.stage},
                      {"error", std::string(to_string(e.code))},
                      {"message", e.message}});
  }
  return {{"sample_id", t.sample_id},
          {"dataset_id", t.dataset_id},
          {"task", std::string(to_string(t.task))},
          {"hypotheses", to_json(t.hypotheses)},
          {"decision", t.decision.render()},
          {"decision_path", std::move(path)},
          {"decision_source", t.decision_source},
          {"tool_applications", std::move(tools)},
          {"final_text", t.final_text},
          {"calls", std::move(calls)},
          {"errors", std::move(errors)},
          {"warnings", t.warnings}};
}

/// Reads the fields evaluation needs; bookkeeping fields are optional.
inline RoutingTrace trace_from_json(const json& j) {
  RoutingTrace t;
  t.sample_id = detail::require_string(j, "sample_id");
  t.dataset_id = detail::optional_string(j, "dataset_id").value_or("default");
  t.task = task_from_string(detail::require_string(j, "task"));
  if (auto it = j.find("hypotheses"); it != j.end() && !it->is_null()) {
    t.hypotheses = hypotheses_from_json(*it);
  }
  t.decision = action_token_from_string(detail::require_string(j, "decision"));
  if (auto it = j.find("decision_path"); it != j.end() && it->is_array()) {
    for (const auto& tok : *it) t.decision_path.push_back(action_token_from_string(tok.get<std::string>()));
  }
  t.decision_source = detail::optional_string(j, "decision_source").value_or("");
  if (auto it = j.find("tool_applications"); it != j.end() && it->is_array()) {
    for (const auto& a : *it) {
      t.tool_applications.push_back({detail::require_string(a, "tool"),
                                     detail::require_string(a, "old_audio_ref"),
                                     detail::require_string(a, "new_audio_ref")});
    }
  }
  t.final_text = detail::require_string(j, "final_text");
  return t;
}

}  // namespace shh
