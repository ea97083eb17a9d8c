#pragma once

// Metrics over routing traces: pooled WER per dataset with a macro average,
// QA accuracy per subset, per-token precision/recall/F1, the confusion matrix
// of predicted vs oracle tokens, and oracle (best-candidate) bounds.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shh/action_token.hpp"
#include "shh/error.hpp"
#include "shh/label_builder.hpp"
#include "shh/prompt_builder.hpp"
#include "shh/router.hpp"
#include "shh/text_metrics.hpp"
#include "shh/types.hpp"

namespace shh {

// ---------------------------------------------------------------------------
// Token classification metrics

/// The three source tokens first, then any other token seen, sorted.
inline std::vector<ActionToken> token_labels(std::span<const ActionToken> a,
                                             std::span<const ActionToken> b) {
  std::vector<ActionToken> labels = {ActionToken::internal(), ActionToken::external(),
                                     ActionToken::rewrite()};
  std::vector<ActionToken> extra;
  for (auto seq : {a, b}) {
    for (const auto& t : seq) {
      if (std::find(labels.begin(), labels.end(), t) == labels.end() &&
          std::find(extra.begin(), extra.end(), t) == extra.end()) {
        extra.push_back(t);
      }
    }
  }
  std::sort(extra.begin(), extra.end(),
            [](const ActionToken& x, const ActionToken& y) { return x.render() < y.render(); });
  labels.insert(labels.end(), extra.begin(), extra.end());
  return labels;
}

/// Rows are oracle tokens, columns predicted tokens.
struct ConfusionMatrix {
  std::vector<ActionToken> labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t index_of(const ActionToken& t) const {
    auto it = std::find(labels.begin(), labels.end(), t);
    if (it == labels.end()) throw Error(ErrorCode::InvalidArgument, "unknown label " + t.render());
    return static_cast<std::size_t>(it - labels.begin());
  }
  std::size_t at(const ActionToken& oracle, const ActionToken& predicted) const {
    return counts[index_of(oracle)][index_of(predicted)];
  }
  std::size_t row_sum(std::size_t i) const {
    std::size_t s = 0;
    for (auto v : counts[i]) s += v;
    return s;
  }
  std::size_t col_sum(std::size_t j) const {
    std::size_t s = 0;
    for (const auto& row : counts) s += row[j];
    return s;
  }
  std::size_t total() const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) s += row_sum(i);
    return s;
  }
};

namespace detail {

inline void check_lengths(std::span<const ActionToken> predicted,
                          std::span<const ActionToken> oracle) {
  if (predicted.size() != oracle.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(predicted.size()) + " predictions vs " +
                    std::to_string(oracle.size()) + " oracle tokens");
  }
}

inline double safe_div(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

inline ConfusionMatrix confusion(std::span<const ActionToken> predicted,
                                 std::span<const ActionToken> oracle) {
  detail::check_lengths(predicted, oracle);
  ConfusionMatrix m;
  m.labels = token_labels(oracle, predicted);
  m.counts.assign(m.labels.size(), std::vector<std::size_t>(m.labels.size(), 0));
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    ++m.counts[m.index_of(oracle[i])][m.index_of(predicted[i])];
  }
  return m;
}

struct TokenScore {
  ActionToken token = ActionToken::internal();
  std::size_t oracle_count = 0;
  std::size_t predicted_count = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool supported = false;  // false when the token occurs on neither side
};

/// Zero denominators give 0 rather than NaN.
inline double f1_score(double precision, double recall) {
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

/// Per-token scores counted directly from the paired sequences.
inline std::vector<TokenScore> token_metrics(std::span<const ActionToken> predicted,
                                             std::span<const ActionToken> oracle) {
  detail::check_lengths(predicted, oracle);
  std::vector<TokenScore> out;
  for (const auto& label : token_labels(oracle, predicted)) {
    TokenScore s;
    s.token = label;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const bool p = predicted[i] == label;
      const bool o = oracle[i] == label;
      s.predicted_count += p;
      s.oracle_count += o;
      s.tp += p && o;
      s.fp += p && !o;
      s.fn += o && !p;
    }
    s.precision = detail::safe_div(s.tp, s.tp + s.fp);
    s.recall = detail::safe_div(s.tp, s.tp + s.fn);
    s.f1 = f1_score(s.precision, s.recall);
    s.supported = s.oracle_count > 0 || s.predicted_count > 0;
    out.push_back(s);
  }
  return out;
}

inline std::map<std::string, std::size_t> token_distribution(std::span<const ActionToken> tokens) {
  std::map<std::string, std::size_t> d = {{ActionToken::internal().render(), 0},
                                          {ActionToken::external().render(), 0},
                                          {ActionToken::rewrite().render(), 0}};
  for (const auto& t : tokens) ++d[t.render()];
  return d;
}

// ---------------------------------------------------------------------------
// Task metrics

struct DatasetWer {
  std::string dataset_id;
  std::size_t samples = 0;
  ErrorCounts counts;
  double wer = 0.0;
};

struct AsrSummary {
  std::vector<DatasetWer> datasets;  // sorted by dataset_id
  double macro_wer = 0.0;
  ErrorCounts pooled;
  double pooled_wer = 0.0;
};

struct QaSubset {
  std::string dataset_id;
  std::size_t samples = 0;
  std::size_t correct = 0;
  std::size_t unparseable = 0;
  double accuracy = 0.0;
};

struct QaSummary {
  std::vector<QaSubset> subsets;  // sorted by dataset_id
  double weighted_accuracy = 0.0;  // sample-weighted across subsets
  double macro_accuracy = 0.0;     // unweighted mean of subset accuracies
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t unparseable = 0;
};

using SampleIndex = std::map<std::string, const Sample*>;

inline SampleIndex index_samples(std::span<const Sample> samples) {
  SampleIndex idx;
  for (const auto& s : samples) idx[s.sample_id] = &s;
  return idx;
}

namespace detail {

inline const Sample& lookup(const SampleIndex& idx, const std::string& id) {
  auto it = idx.find(id);
  if (it == idx.end()) throw Error(ErrorCode::MissingGold, "no gold for sample '" + id + "'");
  return *it->second;
}

}  // namespace detail

/// Pooled corpus WER per dataset, then the unweighted mean across datasets.
inline AsrSummary eval_asr(std::span<const RoutingTrace> traces, const SampleIndex& samples,
                           const NormalizationPolicy& policy = {}) {
  std::map<std::string, DatasetWer> by_dataset;
  for (const auto& t : traces) {
    if (t.task != Task::Asr) continue;
    const Sample& s = detail::lookup(samples, t.sample_id);
    if (!s.gold_transcript) throw Error(ErrorCode::MissingGold, t.sample_id);
    auto& d = by_dataset[s.dataset_id];
    d.dataset_id = s.dataset_id;
    ++d.samples;
    d.counts += ErrorCounts::from(align_text(*s.gold_transcript, t.final_text, policy));
  }
  AsrSummary out;
  std::vector<double> rates;
  for (auto& [id, d] : by_dataset) {
    d.wer = d.counts.ratio();
    rates.push_back(d.wer);
    out.pooled += d.counts;
    out.datasets.push_back(d);
  }
  if (!rates.empty()) {
    out.macro_wer = macro_average(rates);
    out.pooled_wer = out.pooled.ratio();
  }
  return out;
}

/// Accuracy per subset; unparseable answers count as wrong and are tallied.
inline QaSummary eval_qa(std::span<const RoutingTrace> traces, const SampleIndex& samples) {
  std::map<std::string, QaSubset> by_dataset;
  for (const auto& t : traces) {
    if (t.task != Task::Qa) continue;
    const Sample& s = detail::lookup(samples, t.sample_id);
    const auto gold = s.gold_choice_id();
    auto& d = by_dataset[s.dataset_id];
    d.dataset_id = s.dataset_id;
    ++d.samples;
    try {
      if (extract_choice(t.final_text, s.options).letter == gold.letter) ++d.correct;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Unparseable && e.code() != ErrorCode::Ambiguous) throw;
      ++d.unparseable;
    }
  }
  QaSummary out;
  double acc_sum = 0.0;
  for (auto& [id, d] : by_dataset) {
    d.accuracy = detail::safe_div(d.correct, d.samples);
    acc_sum += d.accuracy;
    out.total += d.samples;
    out.correct += d.correct;
    out.unparseable += d.unparseable;
    out.subsets.push_back(d);
  }
  out.weighted_accuracy = detail::safe_div(out.correct, out.total);
  out.macro_accuracy = out.subsets.empty() ? 0.0 : acc_sum / static_cast<double>(out.subsets.size());
  return out;
}

// ---------------------------------------------------------------------------
// Oracle bound

struct OracleBound {
  Task task = Task::Asr;
  ErrorCounts counts;       // ASR: best candidate per sample, pooled
  std::size_t correct = 0;  // QA: samples with at least one correct candidate
  std::size_t total = 0;
  double value = 0.0;       // pooled WER or accuracy
};

/// ASR candidates are the internal hypothesis, the external top-1 and the
/// correction candidate; QA candidates are the internal answer, every
/// external sample and the correction candidate. Missing candidates are
/// skipped; samples of the other task are ignored.
inline OracleBound oracle_bound(std::span<const Sample> samples,
                                std::span<const HypothesisSet> hypotheses, Task task,
                                const NormalizationPolicy& policy = {}) {
  if (samples.size() != hypotheses.size()) {
    throw Error(ErrorCode::LengthMismatch, "one hypothesis set per sample is required");
  }
  OracleBound out;
  out.task = task;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.task != task) continue;
    const HypothesisSet& h = hypotheses[i];
    std::vector<const std::string*> candidates;
    if (h.internal) candidates.push_back(&*h.internal);
    if (task == Task::Asr) {
      if (!h.external_nbest.empty()) candidates.push_back(&h.external_nbest.front());
    } else {
      for (const auto& e : h.external_nbest) candidates.push_back(&e);
    }
    if (h.ger) candidates.push_back(&*h.ger);
    if (candidates.empty()) {
      throw Error(ErrorCode::MissingHypothesis, "sample '" + s.sample_id + "' has no candidates");
    }
    ++out.total;

    if (task == Task::Asr) {
      if (!s.gold_transcript) throw Error(ErrorCode::MissingGold, s.sample_id);
      std::optional<ErrorCounts> best;
      for (const auto* c : candidates) {
        auto counts = ErrorCounts::from(align_text(*s.gold_transcript, *c, policy));
        if (!best || counts.edits < best->edits) best = counts;
      }
      out.counts += *best;
    } else {
      const auto gold = s.gold_choice_id();
      for (const auto* c : candidates) {
        auto choice = try_extract_choice(*c, s.options);
        if (choice && choice->letter == gold.letter) {
          ++out.correct;
          break;
        }
      }
    }
  }
  if (task == Task::Asr) {
    out.value = out.counts.ref_len ? out.counts.ratio() : 0.0;
  } else {
    out.value = detail::safe_div(out.correct, out.total);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct EvalReport {
  std::optional<AsrSummary> asr;
  std::optional<QaSummary> qa;
  std::vector<TokenScore> token_scores;
  std::optional<ConfusionMatrix> confusion_matrix;
  std::map<std::string, std::size_t> predicted_distribution;
  std::map<std::string, std::size_t> oracle_distribution;
  std::size_t samples_without_oracle = 0;
  std::optional<OracleBound> oracle_asr;
  std::optional<OracleBound> oracle_qa;

  std::string task() const {
    if (asr && qa) return "mixed";
    if (qa) return "qa";
    return "asr";
  }
};

/// Oracle token for a trace, recomputed from its hypotheses and gold;
/// std::nullopt when the hypotheses cannot support a label (e.g. no
/// correction candidate for ASR).
inline std::optional<ActionToken> recompute_oracle_token(const RoutingTrace& t, const Sample& s,
                                                         const NormalizationPolicy& policy) {
  try {
    return oracle_label(s, t.hypotheses, policy);
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Full report over traces. `oracle_tokens` (sample_id -> token) overrides
/// recomputation, typically from a labeled file.
inline EvalReport evaluate(std::span<const RoutingTrace> traces, std::span<const Sample> samples,
                           const NormalizationPolicy& policy = {},
                           const std::map<std::string, ActionToken>& oracle_tokens = {}) {
  const auto idx = index_samples(samples);
  EvalReport r;
  const bool any_asr = std::any_of(traces.begin(), traces.end(),
                                   [](const RoutingTrace& t) { return t.task == Task::Asr; });
  const bool any_qa = std::any_of(traces.begin(), traces.end(),
                                  [](const RoutingTrace& t) { return t.task == Task::Qa; });
  if (any_asr || !any_qa) r.asr = eval_asr(traces, idx, policy);
  if (any_qa) r.qa = eval_qa(traces, idx);

  std::vector<ActionToken> predicted;
  std::vector<ActionToken> oracle;
  for (const auto& t : traces) {
    std::optional<ActionToken> o;
    if (auto it = oracle_tokens.find(t.sample_id); it != oracle_tokens.end()) {
      o = it->second;
    } else {
      o = recompute_oracle_token(t, detail::lookup(idx, t.sample_id), policy);
    }
    if (!o) {
      ++r.samples_without_oracle;
      continue;
    }
    predicted.push_back(t.decision);
    oracle.push_back(*o);
  }
  if (!predicted.empty()) {
    r.token_scores = token_metrics(predicted, oracle);
    r.confusion_matrix = confusion(predicted, oracle);
    r.predicted_distribution = token_distribution(predicted);
    r.oracle_distribution = token_distribution(oracle);
  }

  // The bound needs every candidate; routed traces usually lack the
  // correction candidate, in which case it is left out.
  std::vector<Sample> bound_samples;
  std::vector<HypothesisSet> bound_hyps;
  for (const auto& t : traces) {
    bound_samples.push_back(detail::lookup(idx, t.sample_id));
    bound_hyps.push_back(t.hypotheses);
  }
  auto complete_for = [&](Task task) {
    bool any = false;
    for (std::size_t i = 0; i < bound_samples.size(); ++i) {
      if (bound_samples[i].task != task) continue;
      any = true;
      const auto& h = bound_hyps[i];
      if (!h.internal || h.external_nbest.empty() || !h.ger) return false;
    }
    return any;
  };
  if (complete_for(Task::Asr)) r.oracle_asr = oracle_bound(bound_samples, bound_hyps, Task::Asr, policy);
  if (complete_for(Task::Qa)) r.oracle_qa = oracle_bound(bound_samples, bound_hyps, Task::Qa, policy);
  return r;
}

// ---------------------------------------------------------------------------
// Report JSON

inline json to_json(const OracleBound& b) {
  json j = {{"task", std::string(to_string(b.task))}, {"value", b.value}, {"samples", b.total}};
  if (b.task == Task::Asr) {
    j["edits"] = b.counts.edits;
    j["ref_words"] = b.counts.ref_len;
  } else {
    j["correct"] = b.correct;
  }
  return j;
}

inline OracleBound oracle_bound_from_json(const json& j) {
  OracleBound b;
  b.task = task_from_string(j.at("task").get<std::string>());
  b.value = j.at("value").get<double>();
  b.total = j.value("samples", std::size_t{0});
  b.counts.edits = j.value("edits", std::size_t{0});
  b.counts.ref_len = j.value("ref_words", std::size_t{0});
  b.correct = j.value("correct", std::size_t{0});
  return b;
}

inline json to_json(const EvalReport& r) {
  json j = {{"task", r.task()}};
  if (r.asr) {
    json rows = json::array();
    for (const auto& d : r.asr->datasets) {
      rows.push_back({{"dataset_id", d.dataset_id},
                      {"samples", d.samples},
                      {"ref_words", d.counts.ref_len},
                      {"edits", d.counts.edits},
                      {"wer", d.wer}});
    }
    j["asr"] = {{"datasets", std::move(rows)},
                {"macro_wer", r.asr->macro_wer},
                {"pooled_wer", r.asr->pooled_wer},
                {"pooled_edits", r.asr->pooled.edits},
                {"pooled_ref_words", r.asr->pooled.ref_len}};
  }
  if (r.qa) {
    json rows = json::array();
    for (const auto& s : r.qa->subsets) {
      rows.push_back({{"dataset_id", s.dataset_id},
                      {"samples", s.samples},
                      {"correct", s.correct},
                      {"unparseable", s.unparseable},
                      {"accuracy", s.accuracy}});
    }
    j["qa"] = {{"subsets", std::move(rows)},
               {"weighted_accuracy", r.qa->weighted_accuracy},
               {"macro_accuracy", r.qa->macro_accuracy},
               {"total", r.qa->total},
               {"correct", r.qa->correct},
               {"unparseable", r.qa->unparseable}};
  }
  json scores = json::array();
  for (const auto& s : r.token_scores) {
    scores.push_back({{"token", s.token.render()},
                      {"oracle_count", s.oracle_count},
                      {"predicted_count", s.predicted_count},
                      {"tp", s.tp},
                      {"fp", s.fp},
                      {"fn", s.fn},
                      {"precision", s.precision},
                      {"recall", s.recall},
                      {"f1", s.f1},
                      {"supported", s.supported}});
  }
  j["token_metrics"] = std::move(scores);
  if (r.confusion_matrix) {
    json labels = json::array();
    for (const auto& l : r.confusion_matrix->labels) labels.push_back(l.render());
    j["confusion"] = {{"labels", std::move(labels)}, {"counts", r.confusion_matrix->counts}};
  }
  j["distribution"] = {{"predicted", r.predicted_distribution},
                       {"oracle", r.oracle_distribution}};
  j["samples_without_oracle"] = r.samples_without_oracle;
  if (r.oracle_asr) j["oracle_bound_asr"] = to_json(*r.oracle_asr);
  if (r.oracle_qa) j["oracle_bound_qa"] = to_json(*r.oracle_qa);
  return j;
}

inline EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  try {
    if (auto it = j.find("asr"); it != j.end()) {
      AsrSummary a;
      for (const auto& row : it->at("datasets")) {
        DatasetWer d;
        d.dataset_id = row.at("dataset_id").get<std::string>();
        d.samples = row.at("samples").get<std::size_t>();
        d.counts = {row.at("edits").get<std::size_t>(), row.at("ref_words").get<std::size_t>()};
        d.wer = row.at("wer").get<double>();
        a.datasets.push_back(d);
      }
      a.macro_wer = it->at("macro_wer").get<double>();
      a.pooled_wer = it->at("pooled_wer").get<double>();
      a.pooled = {it->value("pooled_edits", std::size_t{0}),
                  it->value("pooled_ref_words", std::size_t{0})};
      r.asr = a;
    }
    if (auto it = j.find("qa"); it != j.end()) {
      QaSummary q;
      for (const auto& row : it->at("subsets")) {
        QaSubset s;
        s.dataset_id = row.at("dataset_id").get<std::string>();
        s.samples = row.at("samples").get<std::size_t>();
        s.correct = row.at("correct").get<std::size_t>();
        s.unparseable = row.at("unparseable").get<std::size_t>();
        s.accuracy = row.at("accuracy").get<double>();
        q.subsets.push_back(s);
      }
      q.weighted_accuracy = it->at("weighted_accuracy").get<double>();
      q.macro_accuracy = it->at("macro_accuracy").get<double>();
      q.total = it->value("total", std::size_t{0});
      q.correct = it->value("correct", std::size_t{0});
      q.unparseable = it->value("unparseable", std::size_t{0});
      r.qa = q;
    }
    for (const auto& row : j.value("token_metrics", json::array())) {
      TokenScore s;
      s.token = action_token_from_string(row.at("token").get<std::string>());
      s.oracle_count = row.at("oracle_count").get<std::size_t>();
      s.predicted_count = row.at("predicted_count").get<std::size_t>();
      s.tp = row.at("tp").get<std::size_t>();
      s.fp = row.at("fp").get<std::size_t>();
      s.fn = row.at("fn").get<std::size_t>();
      s.precision = row.at("precision").get<double>();
      s.recall = row.at("recall").get<double>();
      s.f1 = row.at("f1").get<double>();
      s.supported = row.at("supported").get<bool>();
      r.token_scores.push_back(s);
    }
    if (auto it = j.find("confusion"); it != j.end()) {
      ConfusionMatrix m;
      for (const auto& l : it->at("labels")) m.labels.push_back(action_token_from_string(l.get<std::string>()));
      m.counts = it->at("counts").get<std::vector<std::vector<std::size_t>>>();
      r.confusion_matrix = m;
    }
    if (auto it = j.find("distribution"); it != j.end()) {
      r.predicted_distribution = it->at("predicted").get<std::map<std::string, std::size_t>>();
      r.oracle_distribution = it->at("oracle").get<std::map<std::string, std::size_t>>();
    }
    r.samples_without_oracle = j.value("samples_without_oracle", std::size_t{0});
    if (auto it = j.find("oracle_bound_asr"); it != j.end()) r.oracle_asr = oracle_bound_from_json(*it);
    if (auto it = j.find("oracle_bound_qa"); it != j.end()) r.oracle_qa = oracle_bound_from_json(*it);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string fmt_ratio(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

inline std::string text_table(const std::string& title, const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], r[i].size());
    }
  }
  std::string out = title + "\n";
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += "  ";
      // First column left-aligned, numbers right-aligned.
      const std::string pad(width[i] - cells[i].size(), ' ');
      out += i == 0 ? cells[i] + pad : pad + cells[i];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) line(r);
  return out;
}

}  // namespace detail

struct RenderedReport {
  std::map<std::string, std::string> csv_files;  // file name -> contents
  std::string text;
};

/// Fixed file set and column order; an empty report yields header-only files.
inline RenderedReport report_render(const EvalReport& r) {
  using detail::fmt_ratio;
  RenderedReport out;

  const std::vector<std::string> wer_header = {"dataset_id", "samples", "ref_words", "edits", "wer"};
  std::vector<std::vector<std::string>> wer_rows;
  if (r.asr) {
    for (const auto& d : r.asr->datasets) {
      wer_rows.push_back({d.dataset_id, std::to_string(d.samples), std::to_string(d.counts.ref_len),
                          std::to_string(d.counts.edits), fmt_ratio(d.wer)});
    }
  }
  out.csv_files["wer_by_dataset.csv"] = detail::csv(wer_header, wer_rows);

  const std::vector<std::string> acc_header = {"dataset_id", "samples", "correct", "unparseable",
                                               "accuracy"};
  std::vector<std::vector<std::string>> acc_rows;
  if (r.qa) {
    for (const auto& s : r.qa->subsets) {
      acc_rows.push_back({s.dataset_id, std::to_string(s.samples), std::to_string(s.correct),
                          std::to_string(s.unparseable), fmt_ratio(s.accuracy)});
    }
  }
  out.csv_files["accuracy_by_subset.csv"] = detail::csv(acc_header, acc_rows);

  const std::vector<std::string> tok_header = {"token", "oracle_count", "predicted_count", "tp", "fp",
                                               "fn", "precision", "recall", "f1", "supported"};
  std::vector<std::vector<std::string>> tok_rows;
  for (const auto& s : r.token_scores) {
    tok_rows.push_back({s.token.render(), std::to_string(s.oracle_count),
                        std::to_string(s.predicted_count), std::to_string(s.tp),
                        std::to_string(s.fp), std::to_string(s.fn), fmt_ratio(s.precision),
                        fmt_ratio(s.recall), fmt_ratio(s.f1), s.supported ? "1" : "0"});
  }
  out.csv_files["token_metrics.csv"] = detail::csv(tok_header, tok_rows);

  std::vector<std::string> cm_header = {"oracle\\predicted"};
  std::vector<std::vector<std::string>> cm_rows;
  if (r.confusion_matrix) {
    const auto& m = *r.confusion_matrix;
    for (const auto& l : m.labels) cm_header.push_back(l.render());
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      std::vector<std::string> row = {m.labels[i].render()};
      for (auto v : m.counts[i]) row.push_back(std::to_string(v));
      cm_rows.push_back(std::move(row));
    }
  }
  out.csv_files["confusion.csv"] = detail::csv(cm_header, cm_rows);

  const std::vector<std::string> dist_header = {"token", "oracle", "predicted"};
  std::vector<std::vector<std::string>> dist_rows;
  std::map<std::string, std::pair<std::size_t, std::size_t>> dist;
  for (const auto& [k, v] : r.oracle_distribution) dist[k].first = v;
  for (const auto& [k, v] : r.predicted_distribution) dist[k].second = v;
  for (const auto& [k, v] : dist) {
    dist_rows.push_back({k, std::to_string(v.first), std::to_string(v.second)});
  }
  out.csv_files["token_distribution.csv"] = detail::csv(dist_header, dist_rows);

  const std::vector<std::string> sum_header = {"metric", "value"};
  std::vector<std::vector<std::string>> sum_rows;
  if (r.asr && !r.asr->datasets.empty()) {
    sum_rows.push_back({"macro_wer", fmt_ratio(r.asr->macro_wer)});
    sum_rows.push_back({"pooled_wer", fmt_ratio(r.asr->pooled_wer)});
  }
  if (r.qa && !r.qa->subsets.empty()) {
    sum_rows.push_back({"accuracy_weighted", fmt_ratio(r.qa->weighted_accuracy)});
    sum_rows.push_back({"accuracy_macro", fmt_ratio(r.qa->macro_accuracy)});
  }
  if (r.oracle_asr) sum_rows.push_back({"oracle_bound_wer", fmt_ratio(r.oracle_asr->value)});
  if (r.oracle_qa) sum_rows.push_back({"oracle_bound_accuracy", fmt_ratio(r.oracle_qa->value)});
  out.csv_files["summary.csv"] = detail::csv(sum_header, sum_rows);

  std::string text;
  if (!wer_rows.empty()) text += detail::text_table("WER by dataset", wer_header, wer_rows) + "\n";
  if (!acc_rows.empty()) text += detail::text_table("Accuracy by subset", acc_header, acc_rows) + "\n";
  if (!tok_rows.empty()) text += detail::text_table("Action tokens", tok_header, tok_rows) + "\n";
  if (!cm_rows.empty()) text += detail::text_table("Confusion (rows: oracle)", cm_header, cm_rows) + "\n";
  text += detail::text_table("Summary", sum_header, sum_rows);
  out.text = std::move(text);
  return out;
}

}  // namespace shh
