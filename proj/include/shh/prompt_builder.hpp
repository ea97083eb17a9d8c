#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shh/action_token.hpp"
#include "shh/error.hpp"
#include "shh/prompt_templates.hpp"
#include "shh/text_metrics.hpp"
#include "shh/types.hpp"

namespace shh {

struct PromptPart {
  std::string kind;  // "audio", "hypotheses" or "question"
  std::string text;
  bool operator==(const PromptPart&) const = default;
};

struct PromptBundle {
  std::string system_instruction;
  std::vector<PromptPart> user_content;
  std::string template_id;
  std::string template_version;

  bool operator==(const PromptBundle&) const = default;

  /// Flattened prompt text sent to backends.
  std::string render() const {
    std::string out = system_instruction;
    for (const auto& part : user_content) {
      out += "\n\n";
      if (part.kind == "audio") out += "Audio: ";
      out += part.text;
    }
    return out;
  }
};

inline json to_json(const PromptBundle& b) {
  json parts = json::array();
  for (const auto& p : b.user_content) {
    parts.push_back({{"type", p.kind}, {"value", p.text}});
  }
  return {{"template_id", b.template_id},
          {"template_version", b.template_version},
          {"system_instruction", b.system_instruction},
          {"user_content", std::move(parts)}};
}

namespace detail {

inline bool is_ascii_space_char(char c) {
  return is_ascii_space(static_cast<unsigned char>(c));
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_ascii_space_char(s[b])) ++b;
  while (e > b && is_ascii_space_char(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string count_word(std::size_t n) {
  static constexpr std::array<std::string_view, 11> words = {
      "Zero", "One", "Two", "Three", "Four", "Five",
      "Six",  "Seven", "Eight", "Nine", "Ten"};
  return n < words.size() ? std::string(words[n]) : std::to_string(n);
}

inline std::string substitute(std::string_view text,
                              const std::map<std::string, std::string>& vars) {
  std::string out(text);
  for (const auto& [key, value] : vars) {
    const std::string needle = "{" + key + "}";
    for (auto pos = out.find(needle); pos != std::string::npos;
         pos = out.find(needle, pos + value.size())) {
      out.replace(pos, needle.size(), value);
    }
  }
  return out;
}

inline PromptBundle make_bundle(const templates::Template& t,
                                std::string instruction,
                                std::vector<PromptPart> parts) {
  return {std::move(instruction), std::move(parts), std::string(t.id),
          std::string(t.version)};
}

inline PromptBundle make_bundle(const templates::Template& t,
                                std::vector<PromptPart> parts) {
  return make_bundle(t, std::string(t.text), std::move(parts));
}

inline std::string numbered(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

inline void require_task(const Sample& s, Task t) {
  if (s.task != t) {
    throw Error(ErrorCode::InvalidArgument,
                "sample '" + s.sample_id + "' is not a " +
                    std::string(to_string(t)) + " sample");
  }
}

inline void require_question(const Sample& s) {
  if (!s.question || s.options.empty()) {
    throw Error(ErrorCode::MissingOptions,
                "sample '" + s.sample_id + "' has no question/options");
  }
}

inline PromptPart question_part(const Sample& s) {
  return {"question", "Question: " + *s.question + "\nOptions: " + s.options_line()};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Choice extraction

/// Resolves free-form answer text to an option. Tried in order: a leading
/// label with delimiter ("C.", "C)", "C:", "(c)", or the bare label alone),
/// then a unique case-insensitive containment of an option's text.
/// Throws Unparseable or Ambiguous.
inline ChoiceId extract_choice(std::string_view answer_text,
                               const OptionSet& options) {
  if (options.empty()) {
    throw Error(ErrorCode::MissingOptions, "empty option set");
  }
  const std::string text = detail::trim(answer_text);
  const std::string lower = detail::to_lower(text);

  for (const auto& o : options) {
    const std::string label = detail::to_lower(o.letter);
    if (label.empty()) continue;
    if (lower == label || lower.starts_with("(" + label + ")")) {
      return {o.letter, o.text};
    }
    if (lower.size() > label.size() && lower.starts_with(label)) {
      const char d = lower[label.size()];
      if (d == '.' || d == ')' || d == ':') return {o.letter, o.text};
    }
  }

  const OptionItem* found = nullptr;
  for (const auto& o : options) {
    const std::string needle = detail::to_lower(detail::trim(o.text));
    if (needle.empty() || lower.find(needle) == std::string::npos) continue;
    if (found) {
      throw Error(ErrorCode::Ambiguous,
                  "answer '" + text + "' matches several options");
    }
    found = &o;
  }
  if (!found) {
    throw Error(ErrorCode::Unparseable, "no option in answer '" + text + "'");
  }
  return {found->letter, found->text};
}

/// Like extract_choice, but unparseable or ambiguous text maps to nullopt.
inline std::optional<ChoiceId> try_extract_choice(std::string_view answer_text,
                                                  const OptionSet& options) {
  try {
    return extract_choice(answer_text, options);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Unparseable || e.code() == ErrorCode::Ambiguous) {
      return std::nullopt;
    }
    throw;
  }
}

/// Index of the external sample whose choice has the plurality among all
/// parseable samples; ties go to the choice seen first. Falls back to 0.
inline std::size_t external_consensus_index(const Sample& sample,
                                            const HypothesisSet& hyps) {
  if (hyps.external_nbest.empty()) {
    throw Error(ErrorCode::MissingHypothesis, "no external hypothesis");
  }
  if (sample.task != Task::Qa || hyps.external_nbest.size() == 1) return 0;

  std::vector<std::pair<std::string, std::size_t>> first_seen;  // letter -> index
  std::map<std::string, std::size_t> votes;
  for (std::size_t i = 0; i < hyps.external_nbest.size(); ++i) {
    auto c = try_extract_choice(hyps.external_nbest[i], sample.options);
    if (!c) continue;
    if (votes[c->letter]++ == 0) first_seen.emplace_back(c->letter, i);
  }
  std::size_t best_index = 0;
  std::size_t best_votes = 0;
  for (const auto& [letter, index] : first_seen) {
    if (votes[letter] > best_votes) {
      best_votes = votes[letter];
      best_index = index;
    }
  }
  return best_index;
}

// ---------------------------------------------------------------------------
// Arbiter prompts

inline PromptBundle build_asr_prompt(const Sample& sample,
                                     const HypothesisSet& hyps) {
  detail::require_task(sample, Task::Asr);
  if (!hyps.internal) {
    throw Error(ErrorCode::MissingHypothesis,
                "sample '" + sample.sample_id + "' has no internal hypothesis");
  }
  if (hyps.external_nbest.empty()) {
    throw Error(ErrorCode::MissingHypothesis,
                "sample '" + sample.sample_id + "' has no external hypothesis");
  }
  const std::size_t n = hyps.external_nbest.size();
  const std::string instruction = detail::substitute(
      templates::kAsrArbiter.text,
      {{"count", detail::count_word(n)},
       {"hypothesis_noun", n == 1 ? "hypothesis" : "hypotheses"}});
  std::string hyp_text = "External hypotheses:\n" +
                         detail::numbered(hyps.external_nbest) +
                         "\nInternal transcription: " + *hyps.internal;
  return detail::make_bundle(templates::kAsrArbiter, instruction,
                             {{"audio", sample.audio_ref},
                              {"hypotheses", std::move(hyp_text)}});
}

inline PromptBundle build_qa_prompt(const Sample& sample,
                                    const HypothesisSet& hyps) {
  detail::require_task(sample, Task::Qa);
  detail::require_question(sample);
  if (!hyps.internal || hyps.external_nbest.empty()) {
    throw Error(ErrorCode::MissingHypothesis,
                "sample '" + sample.sample_id + "' lacks a first-pass answer");
  }
  const auto& external =
      hyps.external_nbest[external_consensus_index(sample, hyps)];
  return detail::make_bundle(
      templates::kQaArbiter,
      {{"audio", sample.audio_ref},
       detail::question_part(sample),
       {"hypotheses", "External candidate: " + external +
                          "\nInternal prediction: " + *hyps.internal}});
}

inline PromptBundle build_arbiter_prompt(const Sample& sample,
                                         const HypothesisSet& hyps) {
  return sample.task == Task::Asr ? build_asr_prompt(sample, hyps)
                                  : build_qa_prompt(sample, hyps);
}

// ---------------------------------------------------------------------------
// Other passes

/// Instruction for a first-pass internal or external decode.
inline PromptBundle build_first_pass_prompt(const Sample& sample) {
  if (sample.task == Task::Asr) {
    return detail::make_bundle(templates::kAsrTranscribe,
                               {{"audio", sample.audio_ref}});
  }
  detail::require_question(sample);
  return detail::make_bundle(templates::kQaAnswer,
                             {{"audio", sample.audio_ref},
                              detail::question_part(sample)});
}

/// Correction pass conditioned on the audio and the external hypotheses.
inline PromptBundle build_ger_prompt(const Sample& sample,
                                     const HypothesisSet& hyps) {
  detail::require_task(sample, Task::Asr);
  if (hyps.external_nbest.empty()) {
    throw Error(ErrorCode::MissingHypothesis,
                "sample '" + sample.sample_id + "' has no external hypothesis");
  }
  return detail::make_bundle(
      templates::kAsrGer,
      {{"audio", sample.audio_ref},
       {"hypotheses",
        "Hypotheses:\n" + detail::numbered(hyps.external_nbest)}});
}

/// Fresh answer for the rewrite action. ASR sees every hypothesis; QA sees
/// only the audio and the question.
inline PromptBundle build_rewrite_prompt(const Sample& sample,
                                         const HypothesisSet& hyps) {
  if (sample.task == Task::Qa) {
    detail::require_question(sample);
    return detail::make_bundle(templates::kQaRewrite,
                               {{"audio", sample.audio_ref},
                                detail::question_part(sample)});
  }
  std::string hyp_text;
  if (hyps.internal) hyp_text += "Internal transcription: " + *hyps.internal;
  if (!hyps.external_nbest.empty()) {
    if (!hyp_text.empty()) hyp_text += '\n';
    hyp_text += "External hypotheses:\n" + detail::numbered(hyps.external_nbest);
  }
  return detail::make_bundle(templates::kAsrRewrite,
                             {{"audio", sample.audio_ref},
                              {"hypotheses", std::move(hyp_text)}});
}

// ---------------------------------------------------------------------------
// Targets and arbiter output

/// Token surface form, one space, then the final answer.
inline std::string build_target(const ActionToken& token,
                                std::string_view final_text) {
  if (final_text.empty()) {
    throw Error(ErrorCode::EmptyTarget, "final text is empty");
  }
  return token.render() + " " + std::string(final_text);
}

struct ModelOutput {
  ActionToken token;
  std::string payload;
  bool operator==(const ModelOutput&) const = default;
};

inline const std::vector<std::string>& default_tool_names() {
  static const std::vector<std::string> names = {"bnr", "studio"};
  return names;
}

/// Extracts the leading action token (after optional whitespace); the trimmed
/// remainder, newlines included, is the payload. Tool tokens must name one of
/// `known_tools`.
inline ModelOutput parse_model_output(
    std::string_view text,
    std::span<const std::string> known_tools = default_tool_names()) {
  std::size_t start = 0;
  while (start < text.size() && detail::is_ascii_space_char(text[start])) ++start;
  const auto close = text.find('>', start);
  if (start >= text.size() || text[start] != '<' || close == std::string_view::npos) {
    throw Error(ErrorCode::NoActionToken,
                "output does not start with an action token");
  }
  const auto head = text.substr(start, close - start + 1);
  auto token = parse_action_token(head);
  if (!token) {
    throw Error(ErrorCode::NoActionToken,
                "unrecognised token '" + std::string(head) + "'");
  }
  if (token->is_tool() &&
      std::find(known_tools.begin(), known_tools.end(), token->tool_name()) ==
          known_tools.end()) {
    throw Error(ErrorCode::UnknownTool,
                "tool '" + token->tool_name() + "' is not registered");
  }
  return {*token, detail::trim(text.substr(close + 1))};
}

}  // namespace shh
