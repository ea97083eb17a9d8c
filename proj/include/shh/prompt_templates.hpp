#pragma once

// Versioned instruction templates. Any change to the text of a template must
// bump its version; rendered prompt bytes are a function of (inputs, version).
//
// "{count}" / "{hypothesis_noun}" are substituted with the number of
// external hypotheses rendered ("Five" / "hypotheses").

#include <string_view>
#include <vector>

namespace shh::templates {

struct Template {
  std::string_view id;
  std::string_view version;
  std::string_view text;
};

inline constexpr Template kAsrArbiter{
    "asr_arbiter", "1",
    "You are an omni-agent for speech understanding with access to three inputs:\n"
    "(1) The original audio;\n"
    "(2) {count} transcription {hypothesis_noun} from another ASR system (external);\n"
    "(3) Your own first-pass transcription (internal).\n"
    "\n"
    "Your task is to:\n"
    "- First decide whether your internal transcription is reliable.\n"
    "- If yes, output <internal> and your transcription.\n"
    "- If the external system is more reliable, output <external> and use one of its hypotheses.\n"
    "- Otherwise, output <rewrite> and generate a new answer using both sources and the audio."};

inline constexpr Template kQaArbiter{
    "qa_arbiter", "1",
    "You are an audio understanding model with access to three inputs:\n"
    "(1) The original audio;\n"
    "(2) One answer candidate generated by another model (external);\n"
    "(3) Your own prediction (internal).\n"
    "\n"
    "Your task is to decide which of the following strategies to apply:\n"
    "- If your internal prediction is correct and acceptable, output <internal> and repeat your answer.\n"
    "- If the external candidate is correct while your internal prediction is incorrect, output <external> and use the external answer.\n"
    "- If all given answers are incorrect, output <rewrite> and re-answer the question correctly based only on the original audio.\n"
    "\n"
    "Return the selected token (<internal>/<external>/<rewrite>) followed by your final answer."};

inline constexpr Template kAsrTranscribe{
    "asr_transcribe", "1", "Transcribe the speech in the audio. Output only the transcription."};

inline constexpr Template kQaAnswer{
    "qa_answer", "1",
    "Listen to the audio and answer the question. Reply with the option letter "
    "followed by the option text, for example \"A. Option\"."};

// Correction pass over the external hypotheses (label construction).
inline constexpr Template kAsrGer{
    "asr_ger", "1",
    "Transcribe the original audio. The hypotheses below come from another ASR "
    "system and may contain errors; use them together with the audio. Output "
    "only the corrected transcription."};

// On-demand rewrite at inference: audio plus every available hypothesis.
inline constexpr Template kAsrRewrite{
    "asr_rewrite", "1",
    "Rewrite the transcription of the original audio. Consider the audio, your "
    "own first-pass transcription and the external hypotheses below, then "
    "output only the final transcription."};

inline constexpr Template kQaRewrite{
    "qa_rewrite", "1",
    "All given answers were judged incorrect. Re-answer the question correctly "
    "based only on the original audio. Reply with the option letter followed by "
    "the option text."};

inline std::vector<Template> catalog() {
  return {kAsrArbiter, kQaArbiter, kAsrTranscribe, kQaAnswer,
          kAsrGer,     kAsrRewrite, kQaRewrite};
}

}  // namespace shh::templates
