#pragma once

// Text normalization and word-level edit-distance alignment.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shh/error.hpp"

namespace shh {

struct NormalizationPolicy {
  bool lowercase = true;
  bool strip_punctuation = true;
  bool collapse_whitespace = true;
  bool apostrophe_to_space = true;
  // ECMAScript regex -> replacement, applied in order before the other rules.
  std::vector<std::pair<std::string, std::string>> custom_replacements;

  static NormalizationPolicy none() {
    return NormalizationPolicy{false, false, false, false, {}};
  }
};

namespace detail {

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) ||
         (c >= 0x5b && c <= 0x60) || (c >= 0x7b && c <= 0x7e);
}

// Length of a recognised three-byte UTF-8 punctuation sequence at `pos`, and
// whether it is an apostrophe. Returns 0 when nothing matches.
inline std::size_t utf8_punct_at(std::string_view s, std::size_t pos,
                                 bool& apostrophe) {
  if (pos + 2 >= s.size() || static_cast<unsigned char>(s[pos]) != 0xE2 ||
      static_cast<unsigned char>(s[pos + 1]) != 0x80) {
    return 0;
  }
  switch (static_cast<unsigned char>(s[pos + 2])) {
    case 0x98:  // left single quote
    case 0x99:  // right single quote
      apostrophe = true;
      return 3;
    case 0x93:  // en dash
    case 0x94:  // em dash
    case 0x9C:  // left double quote
    case 0x9D:  // right double quote
    case 0xA6:  // ellipsis
      apostrophe = false;
      return 3;
    default:
      return 0;
  }
}

}  // namespace detail

/// Deterministic and idempotent. Punctuation is replaced by a space so that
/// "hello,world" yields two tokens; apostrophes follow `apostrophe_to_space`
/// and are otherwise kept (curly forms folded to ASCII).
inline std::string normalize_text(std::string_view raw,
                                  const NormalizationPolicy& policy = {}) {
  std::string text(raw);
  for (const auto& [pattern, replacement] : policy.custom_replacements) {
    text = std::regex_replace(text, std::regex(pattern), replacement);
  }

  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    bool apostrophe = false;
    std::size_t width = 0;
    if (c == '\'') {
      apostrophe = true;
      width = 1;
    } else {
      width = detail::utf8_punct_at(text, i, apostrophe);
    }

    if (width > 0 && apostrophe) {
      out += policy.apostrophe_to_space ? ' ' : '\'';
      i += width;
      continue;
    }
    if (width > 0 || detail::is_ascii_punct(c)) {
      if (width == 0) width = 1;
      if (policy.strip_punctuation) {
        out += ' ';
      } else {
        out.append(text, i, width);
      }
      i += width;
      continue;
    }
    if (detail::is_ascii_space(c)) {
      out += policy.collapse_whitespace ? ' ' : static_cast<char>(c);
    } else if (policy.lowercase && c >= 'A' && c <= 'Z') {
      out += static_cast<char>(c - 'A' + 'a');
    } else {
      out += static_cast<char>(c);
    }
    ++i;
  }

  if (!policy.collapse_whitespace) return out;

  std::string collapsed;
  collapsed.reserve(out.size());
  for (char ch : out) {
    if (ch == ' ') {
      if (!collapsed.empty() && collapsed.back() != ' ') collapsed += ' ';
    } else {
      collapsed += ch;
    }
  }
  if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  return collapsed;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           detail::is_ascii_space(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    const std::size_t start = i;
    while (i < text.size() &&
           !detail::is_ascii_space(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

enum class EditOp { Correct, Substitution, Deletion, Insertion };

struct AlignedPair {
  EditOp op;
  std::optional<std::size_t> ref_index;
  std::optional<std::size_t> hyp_index;

  bool operator==(const AlignedPair&) const = default;
};

struct Alignment {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t correct = 0;
  std::vector<AlignedPair> ops;

  std::size_t edit_total() const {
    return substitutions + deletions + insertions;
  }
  std::size_t ref_length() const { return correct + substitutions + deletions; }
  std::size_t hyp_length() const {
    return correct + substitutions + insertions;
  }
};

/// Minimum-edit alignment under unit S/D/I costs. When several alignments
/// reach the minimum, the backtrace prefers substitution (or match), then
/// deletion, then insertion.
inline Alignment align_edit(std::span<const std::string> ref,
                            std::span<const std::string> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return cost[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag =
          at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  Alignment result;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool match = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (match ? 0 : 1)) {
        result.ops.push_back(
            {match ? EditOp::Correct : EditOp::Substitution, i - 1, j - 1});
        ++(match ? result.correct : result.substitutions);
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      result.ops.push_back({EditOp::Deletion, i - 1, std::nullopt});
      ++result.deletions;
      --i;
    } else {
      result.ops.push_back({EditOp::Insertion, std::nullopt, j - 1});
      ++result.insertions;
      --j;
    }
  }
  std::reverse(result.ops.begin(), result.ops.end());
  return result;
}

/// Numerator and denominator of a WER, kept separate so corpora can be pooled.
struct ErrorCounts {
  std::size_t edits = 0;
  std::size_t ref_len = 0;

  static ErrorCounts from(const Alignment& a) {
    return {a.edit_total(), a.ref_length()};
  }
  ErrorCounts& operator+=(const ErrorCounts& o) {
    edits += o.edits;
    ref_len += o.ref_len;
    return *this;
  }
  double ratio() const {
    return static_cast<double>(edits) / static_cast<double>(ref_len);
  }
};

/// Normalizes both sides and aligns them. Throws EmptyReference when the
/// normalized reference has no tokens.
inline Alignment align_text(std::string_view ref, std::string_view hyp,
                            const NormalizationPolicy& policy = {}) {
  const auto ref_tokens = tokenize(normalize_text(ref, policy));
  if (ref_tokens.empty()) {
    throw Error(ErrorCode::EmptyReference,
                "reference normalizes to zero tokens");
  }
  const auto hyp_tokens = tokenize(normalize_text(hyp, policy));
  return align_edit(ref_tokens, hyp_tokens);
}

/// Edits over reference length; exceeds 1.0 under heavy insertion.
inline double wer(std::string_view ref, std::string_view hyp,
                  const NormalizationPolicy& policy = {}) {
  return ErrorCounts::from(align_text(ref, hyp, policy)).ratio();
}

/// Pooled corpus WER: total edits over total reference tokens.
inline double aggregate_wer(std::span<const ErrorCounts> items) {
  if (items.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "no alignments to aggregate");
  }
  ErrorCounts total;
  for (const auto& item : items) total += item;
  if (total.ref_len == 0) {
    throw Error(ErrorCode::EmptyReference, "corpus has zero reference tokens");
  }
  return total.ratio();
}

inline double aggregate_wer(std::span<const Alignment> alignments) {
  std::vector<ErrorCounts> counts;
  counts.reserve(alignments.size());
  for (const auto& a : alignments) counts.push_back(ErrorCounts::from(a));
  return aggregate_wer(std::span<const ErrorCounts>(counts));
}

/// Unweighted mean of per-dataset corpus WERs (the summary-column convention).
inline double macro_average(std::span<const double> per_dataset) {
  if (per_dataset.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "no datasets to average");
  }
  double sum = 0.0;
  for (double v : per_dataset) sum += v;
  return sum / static_cast<double>(per_dataset.size());
}

}  // namespace shh
