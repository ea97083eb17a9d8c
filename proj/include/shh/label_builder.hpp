#pragma once

// Oracle action labels for supervised training: which source (internal,
// external, rewrite) should have been trusted for a given sample.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shh/action_token.hpp"
#include "shh/error.hpp"
#include "shh/prompt_builder.hpp"
#include "shh/text_metrics.hpp"
#include "shh/types.hpp"

namespace shh {

struct AsrLabel {
  ActionToken token = ActionToken::internal();
  ErrorCounts internal;
  ErrorCounts external;
  ErrorCounts ger;

  double wer_internal() const { return internal.ratio(); }
  double wer_external() const { return external.ratio(); }
  double wer_ger() const { return ger.ratio(); }
};

/// Internal wins when its WER is zero or no worse than both others, then
/// external when no worse than the correction, else rewrite. The external
/// side is scored on its top-1 hypothesis. All three share one reference, so
/// the comparison runs on integer edit counts.
inline AsrLabel label_asr(std::string_view gold, const HypothesisSet& hyps,
                          const NormalizationPolicy& policy = {}) {
  if (!hyps.ger) {
    throw Error(ErrorCode::MissingGer, "ASR labeling needs a correction candidate");
  }
  if (!hyps.internal) {
    throw Error(ErrorCode::MissingHypothesis, "no internal hypothesis");
  }
  AsrLabel label;
  label.internal = ErrorCounts::from(align_text(gold, *hyps.internal, policy));
  label.external = ErrorCounts::from(align_text(gold, hyps.external_top1(), policy));
  label.ger = ErrorCounts::from(align_text(gold, *hyps.ger, policy));

  const auto e_int = label.internal.edits;
  const auto e_ext = label.external.edits;
  const auto e_ger = label.ger.edits;
  if (e_int == 0 || e_int <= std::min(e_ext, e_ger)) {
    label.token = ActionToken::internal();
  } else if (e_ext <= e_ger) {
    label.token = ActionToken::external();
  } else {
    label.token = ActionToken::rewrite();
  }
  return label;
}

namespace detail {

inline void check_choice(const OptionSet& options, const std::string& letter) {
  if (!find_option(options, letter)) {
    throw Error(ErrorCode::InvalidChoice, "'" + letter + "' is not an option");
  }
}

}  // namespace detail

/// Internal when the internal choice is right; external when strictly more
/// than half of the k external samples are right; rewrite otherwise.
/// A missing choice (unparseable answer) counts as wrong.
inline ActionToken label_qa(const OptionSet& options, const std::string& gold,
                            const std::optional<std::string>& internal_choice,
                            std::span<const std::optional<std::string>> external_choices) {
  if (external_choices.empty()) {
    throw Error(ErrorCode::InvalidArgument, "need at least one external choice");
  }
  detail::check_choice(options, gold);
  if (internal_choice) detail::check_choice(options, *internal_choice);
  std::size_t hits = 0;
  for (const auto& c : external_choices) {
    if (!c) continue;
    detail::check_choice(options, *c);
    if (*c == gold) ++hits;
  }

  if (internal_choice && *internal_choice == gold) return ActionToken::internal();
  if (2 * hits > external_choices.size()) return ActionToken::external();
  return ActionToken::rewrite();
}

inline ActionToken label_qa(const OptionSet& options, const std::string& gold,
                            const std::string& internal_choice,
                            const std::vector<std::string>& external_choices) {
  std::vector<std::optional<std::string>> ext(external_choices.begin(),
                                              external_choices.end());
  return label_qa(options, gold, std::optional<std::string>(internal_choice), ext);
}

/// Labels a QA sample from raw answer texts.
inline ActionToken label_qa_from_text(const Sample& sample, const HypothesisSet& hyps) {
  if (hyps.external_nbest.empty()) {
    throw Error(ErrorCode::MissingHypothesis, "no external answers");
  }
  auto letter_of = [&](const std::optional<std::string>& text) -> std::optional<std::string> {
    if (!text) return std::nullopt;
    auto c = try_extract_choice(*text, sample.options);
    return c ? std::optional<std::string>(c->letter) : std::nullopt;
  };
  std::vector<std::optional<std::string>> ext;
  for (const auto& e : hyps.external_nbest) ext.push_back(letter_of(e));
  return label_qa(sample.options, sample.gold_choice_id().letter,
                  letter_of(hyps.internal), ext);
}

/// Oracle label for any sample, dispatching on its task.
inline ActionToken oracle_label(const Sample& sample, const HypothesisSet& hyps,
                                const NormalizationPolicy& policy = {}) {
  if (sample.task == Task::Asr) {
    if (!sample.gold_transcript) throw Error(ErrorCode::MissingGold, sample.sample_id);
    return label_asr(*sample.gold_transcript, hyps, policy).token;
  }
  return label_qa_from_text(sample, hyps);
}

/// Gold answer text the training target ends with.
inline std::string gold_text(const Sample& sample) {
  if (sample.task == Task::Asr) {
    if (!sample.gold_transcript) throw Error(ErrorCode::MissingGold, sample.sample_id);
    return *sample.gold_transcript;
  }
  return sample.gold_choice_id().render();
}

struct LabeledExample {
  Sample sample;
  HypothesisSet hypotheses;
  ActionToken oracle_token = ActionToken::internal();
  std::string gold;
  std::string sft_target;
  std::optional<AsrLabel> asr_detail;
};

inline LabeledExample make_labeled_example(const Sample& sample, HypothesisSet hyps,
                                           const NormalizationPolicy& policy = {}) {
  LabeledExample ex;
  ex.sample = sample;
  if (sample.task == Task::Asr) {
    if (!sample.gold_transcript) throw Error(ErrorCode::MissingGold, sample.sample_id);
    ex.asr_detail = label_asr(*sample.gold_transcript, hyps, policy);
    ex.oracle_token = ex.asr_detail->token;
  } else {
    ex.oracle_token = label_qa_from_text(sample, hyps);
  }
  ex.hypotheses = std::move(hyps);
  ex.gold = gold_text(sample);
  ex.sft_target = build_target(ex.oracle_token, ex.gold);
  return ex;
}

inline json to_json(const LabeledExample& ex) {
  json j = {{"sample_id", ex.sample.sample_id},
            {"task", std::string(to_string(ex.sample.task))},
            {"sample", to_json(ex.sample)},
            {"hypotheses", to_json(ex.hypotheses)},
            {"oracle_token", ex.oracle_token.render()},
            {"gold", ex.gold},
            {"sft_target", ex.sft_target}};
  if (ex.asr_detail) {
    const auto& d = *ex.asr_detail;
    j["wer"] = {{"internal", d.wer_internal()},
                {"external", d.wer_external()},
                {"ger", d.wer_ger()}};
  }
  return j;
}

inline LabeledExample labeled_example_from_json(const json& j) {
  LabeledExample ex;
  ex.sample = sample_from_json(detail::require(j, "sample"));
  ex.hypotheses = hypotheses_from_json(detail::require(j, "hypotheses"));
  ex.oracle_token = action_token_from_string(detail::require_string(j, "oracle_token"));
  if (ex.oracle_token.is_tool()) {
    throw Error(ErrorCode::SchemaError, "tool tokens are never oracle labels");
  }
  ex.gold = detail::require_string(j, "gold");
  ex.sft_target = detail::require_string(j, "sft_target");
  if (!ex.sft_target.starts_with(ex.oracle_token.render())) {
    throw Error(ErrorCode::SchemaError, "sft_target does not start with the oracle token");
  }
  return ex;
}

}  // namespace shh
