#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "shh/evaluation.hpp"
#include "support.hpp"

using namespace shh;
using Catch::Approx;

namespace {

const ActionToken IN = ActionToken::internal();
const ActionToken EX = ActionToken::external();
const ActionToken RE = ActionToken::rewrite();

RoutingTrace trace(const Sample& s, std::string final_text, ActionToken decision = ActionToken::internal()) {
  RoutingTrace t;
  t.sample_id = s.sample_id;
  t.dataset_id = s.dataset_id;
  t.task = s.task;
  t.final_text = std::move(final_text);
  t.decision = decision;
  return t;
}

const TokenScore& score_of(const std::vector<TokenScore>& v, const ActionToken& t) {
  for (const auto& s : v) {
    if (s.token == t) return s;
  }
  FAIL("token not scored");
  return v.front();
}

}  // namespace

TEST_CASE("eval_asr pools per dataset and macro-averages datasets") {
  std::vector<Sample> samples = {shh_test::asr_sample("a", "a b c d", "d1"),
                                 shh_test::asr_sample("b", "e", "d1"),
                                 shh_test::asr_sample("c", "x y", "d2")};
  std::vector<RoutingTrace> traces = {trace(samples[0], "a b x d"), trace(samples[1], ""),
                                      trace(samples[2], "x y")};
  auto idx = index_samples(samples);
  auto r = eval_asr(traces, idx);
  REQUIRE(r.datasets.size() == 2);
  CHECK(r.datasets[0].dataset_id == "d1");
  CHECK(r.datasets[0].wer == Approx(0.4));
  CHECK(r.datasets[0].counts.edits == 2);
  CHECK(r.datasets[0].counts.ref_len == 5);
  CHECK(r.datasets[1].wer == 0.0);
  CHECK(r.macro_wer == Approx(0.2));
  CHECK(r.pooled_wer == Approx(2.0 / 7.0));

  std::vector<RoutingTrace> perfect = {trace(samples[0], "A b, c d."), trace(samples[1], "e"),
                                       trace(samples[2], "x y")};
  CHECK(eval_asr(perfect, idx).macro_wer == 0.0);

  std::vector<RoutingTrace> orphan = {trace(shh_test::asr_sample("zz", "q"), "q")};
  CHECK_THROWS_MATCHES(eval_asr(orphan, idx), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::MissingGold; }));
}

TEST_CASE("eval_qa counts correct and unparseable answers") {
  std::vector<Sample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(shh_test::qa_sample("q" + std::to_string(i), "C"));
  samples.push_back(shh_test::qa_sample("r0", "A", "other"));
  std::vector<RoutingTrace> traces = {trace(samples[0], "C. Forest fire"), trace(samples[1], "c"),
                                      trace(samples[2], "(C)"), trace(samples[3], "no idea"),
                                      trace(samples[4], "A")};
  auto r = eval_qa(traces, index_samples(samples));
  REQUIRE(r.subsets.size() == 2);
  CHECK(r.subsets[0].dataset_id == "other");
  CHECK(r.subsets[0].accuracy == 1.0);
  CHECK(r.subsets[1].accuracy == Approx(0.75));
  CHECK(r.subsets[1].unparseable == 1);
  CHECK(r.unparseable == 1);
  CHECK(r.weighted_accuracy == Approx(4.0 / 5.0));
  CHECK(r.macro_accuracy == Approx((1.0 + 0.75) / 2.0));
}

TEST_CASE("token metrics on the hand-computed example") {
  const std::vector<ActionToken> oracle = {IN, IN, EX, RE};
  const std::vector<ActionToken> pred = {IN, EX, EX, EX};
  auto scores = token_metrics(pred, oracle);
  const auto& ex = score_of(scores, EX);
  CHECK(ex.precision == Approx(1.0 / 3.0));
  CHECK(ex.recall == 1.0);
  CHECK(ex.f1 == Approx(0.5));
  const auto& in = score_of(scores, IN);
  CHECK(in.precision == 1.0);
  CHECK(in.recall == 0.5);
  const auto& re = score_of(scores, RE);
  CHECK(re.precision == 0.0);
  CHECK(re.recall == 0.0);
  CHECK(re.f1 == 0.0);
  CHECK(re.supported);

  auto m = confusion(pred, oracle);
  CHECK(m.at(IN, IN) == 1);
  CHECK(m.at(IN, EX) == 1);
  CHECK(m.at(EX, EX) == 1);
  CHECK(m.at(RE, EX) == 1);
  CHECK(m.total() == 4);
  CHECK(m.row_sum(m.index_of(IN)) == 2);
  CHECK(m.col_sum(m.index_of(EX)) == 3);
}

TEST_CASE("identical sequences score 1 and absent tokens are unsupported") {
  const std::vector<ActionToken> seq = {IN, EX, IN, ActionToken::tool("bnr")};
  auto scores = token_metrics(seq, seq);
  REQUIRE(scores.size() == 4);
  for (const auto& s : scores) {
    if (s.token == RE) {
      CHECK_FALSE(s.supported);
      CHECK(s.precision == 0.0);
      CHECK(s.f1 == 0.0);
    } else {
      CHECK(s.supported);
      CHECK(s.precision == 1.0);
      CHECK(s.recall == 1.0);
      CHECK(s.f1 == 1.0);
    }
  }
  auto m = confusion(seq, seq);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      if (i != j) CHECK(m.counts[i][j] == 0);
    }
  }
  CHECK(m.labels.back() == ActionToken::tool("bnr"));

  const std::vector<ActionToken> shorter = {IN};
  CHECK_THROWS_AS(token_metrics(shorter, seq), Error);
  CHECK_THROWS_AS(confusion(shorter, seq), Error);
}

TEST_CASE("token metrics agree with the confusion matrix on random sequences") {
  std::mt19937_64 rng(29);
  const std::vector<ActionToken> alphabet = {IN, EX, RE, ActionToken::tool("bnr")};
  for (int n = 0; n < 300; ++n) {
    const std::size_t len = rng() % 30;
    std::vector<ActionToken> p, o;
    for (std::size_t i = 0; i < len; ++i) {
      p.push_back(alphabet[rng() % (n % 2 ? 4 : 3)]);
      o.push_back(alphabet[rng() % 3]);
    }
    auto m = confusion(p, o);
    auto scores = token_metrics(p, o);
    auto od = token_distribution(o);
    auto pd = token_distribution(p);
    REQUIRE(m.total() == len);
    for (const auto& s : scores) {
      const auto k = m.index_of(s.token);
      const auto tp = m.counts[k][k];
      const auto row = m.row_sum(k), col = m.col_sum(k);
      REQUIRE(s.tp == tp);
      REQUIRE(s.oracle_count == row);
      REQUIRE(s.predicted_count == col);
      REQUIRE(row == od[s.token.render()]);
      REQUIRE(col == pd[s.token.render()]);
      const double precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
      const double recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
      REQUIRE(s.precision == precision);
      REQUIRE(s.recall == recall);
      REQUIRE(s.f1 == f1_score(precision, recall));
      REQUIRE(s.precision >= 0.0);
      REQUIRE(s.f1 <= 1.0);
    }
  }
}

TEST_CASE("rare but correct rewrites give precision above recall") {
  std::vector<ActionToken> oracle, pred;
  for (int i = 0; i < 10; ++i) {
    oracle.push_back(RE);
    pred.push_back(i < 2 ? RE : IN);
  }
  for (int i = 0; i < 20; ++i) {
    oracle.push_back(IN);
    pred.push_back(IN);
  }
  const auto& re = score_of(token_metrics(pred, oracle), RE);
  CHECK(re.precision == 1.0);
  CHECK(re.recall == Approx(0.2));
  CHECK(re.precision > re.recall);
}

TEST_CASE("oracle bound picks the best candidate per sample") {
  // Internal is best on s1, external on s2, so the bound beats both fixed
  // policies: fixed internal 0+2=2/6, fixed external 2+0=2/6, oracle 0/6.
  std::vector<Sample> samples = {shh_test::asr_sample("s1", "a b c"),
                                 shh_test::asr_sample("s2", "d e f")};
  std::vector<HypothesisSet> hyps(2);
  hyps[0].internal = "a b c";
  hyps[0].external_nbest = {"a x y"};
  hyps[0].ger = "a b y";
  hyps[1].internal = "d x y";
  hyps[1].external_nbest = {"d e f"};
  hyps[1].ger = "d e y";
  auto b = oracle_bound(samples, hyps, Task::Asr);
  CHECK(b.value == 0.0);
  CHECK(b.total == 2);

  auto idx = index_samples(samples);
  std::vector<RoutingTrace> fixed_in = {trace(samples[0], *hyps[0].internal),
                                        trace(samples[1], *hyps[1].internal)};
  std::vector<RoutingTrace> fixed_ex = {trace(samples[0], hyps[0].external_nbest[0]),
                                        trace(samples[1], hyps[1].external_nbest[0])};
  CHECK(eval_asr(fixed_in, idx).pooled_wer == Approx(2.0 / 6.0));
  CHECK(b.value < eval_asr(fixed_in, idx).pooled_wer);
  CHECK(b.value < eval_asr(fixed_ex, idx).pooled_wer);

  // Identical candidates: the bound equals any fixed policy.
  for (auto& h : hyps) {
    h.external_nbest = {*h.internal};
    h.ger = *h.internal;
  }
  CHECK(oracle_bound(samples, hyps, Task::Asr).value == eval_asr(fixed_in, idx).pooled_wer);

  std::vector<HypothesisSet> short_hyps(1);
  CHECK_THROWS_AS(oracle_bound(samples, short_hyps, Task::Asr), Error);
}

TEST_CASE("QA oracle bound counts any correct candidate") {
  std::vector<Sample> samples = {shh_test::qa_sample("q1", "C"), shh_test::qa_sample("q2", "A")};
  std::vector<HypothesisSet> hyps(2);
  hyps[0].internal = "B";
  hyps[0].external_nbest = {"B", "D", "C. Forest fire"};
  hyps[1].internal = "A";
  hyps[1].external_nbest = {"B"};
  CHECK(oracle_bound(samples, hyps, Task::Qa).value == 1.0);
  hyps[1].internal = "nonsense";
  CHECK(oracle_bound(samples, hyps, Task::Qa).value == 0.5);
}

TEST_CASE("oracle bound dominates random fixed policies") {
  std::mt19937_64 rng(31);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  auto phrase = [&](std::size_t min_len) {
    std::string s;
    for (std::size_t i = min_len + rng() % 3; i > 0; --i) s += vocab[rng() % 4] + " ";
    return s;
  };
  for (int n = 0; n < 50; ++n) {
    std::vector<Sample> samples;
    std::vector<HypothesisSet> hyps;
    for (int i = 0; i < 10; ++i) {
      samples.push_back(shh_test::asr_sample("s" + std::to_string(i), phrase(1)));
      HypothesisSet h;
      h.internal = phrase(0);
      h.external_nbest = {phrase(0)};
      h.ger = phrase(0);
      hyps.push_back(h);
    }
    auto idx = index_samples(samples);
    const double bound = oracle_bound(samples, hyps, Task::Asr).value;
    for (int source = 0; source < 3; ++source) {
      std::vector<RoutingTrace> ts;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& h = hyps[i];
        ts.push_back(trace(samples[i], source == 0   ? *h.internal
                                       : source == 1 ? h.external_nbest[0]
                                                     : *h.ger));
      }
      REQUIRE(bound <= eval_asr(ts, idx).pooled_wer);
    }
  }
}

TEST_CASE("evaluate recomputes oracle tokens unless given") {
  std::vector<Sample> samples = {shh_test::asr_sample("s1", "a b"), shh_test::asr_sample("s2", "c d")};
  std::vector<RoutingTrace> traces = {trace(samples[0], "a b", IN), trace(samples[1], "c x", IN)};
  traces[0].hypotheses.internal = "a b";
  traces[0].hypotheses.external_nbest = {"a"};
  traces[0].hypotheses.ger = "a b";
  traces[1].hypotheses.internal = "c x";
  traces[1].hypotheses.external_nbest = {"c d"};
  traces[1].hypotheses.ger = "c";

  auto r = evaluate(traces, samples);
  CHECK(r.samples_without_oracle == 0);
  CHECK(r.oracle_distribution.at("<internal>") == 1);
  CHECK(r.oracle_distribution.at("<external>") == 1);
  CHECK(r.predicted_distribution.at("<internal>") == 2);
  REQUIRE(r.oracle_asr);
  CHECK(r.oracle_asr->value == 0.0);
  CHECK(r.task() == "asr");

  auto given = evaluate(traces, samples, {}, {{"s2", RE}});
  CHECK(given.oracle_distribution.at("<rewrite>") == 1);

  traces[1].hypotheses.ger.reset();
  auto partial = evaluate(traces, samples);
  CHECK_FALSE(partial.oracle_asr);

  traces[0].hypotheses = {};
  auto missing = evaluate(traces, samples);
  CHECK(missing.samples_without_oracle == 2);
  CHECK(missing.token_scores.empty());
  CHECK_FALSE(missing.confusion_matrix);
}

TEST_CASE("report JSON round-trips and rendering is stable") {
  std::vector<Sample> samples = {shh_test::asr_sample("s1", "a b c d", "d1"),
                                 shh_test::qa_sample("q1", "C")};
  std::vector<RoutingTrace> traces = {trace(samples[0], "a b x d", EX), trace(samples[1], "C", RE)};
  auto r = evaluate(traces, samples, {}, {{"s1", IN}, {"q1", RE}});
  CHECK(r.task() == "mixed");
  auto back = eval_report_from_json(json::parse(to_json(r).dump()));
  CHECK(to_json(back) == to_json(r));

  auto first = report_render(r);
  auto second = report_render(back);
  CHECK(first.csv_files == second.csv_files);
  CHECK(first.text == second.text);
  CHECK(first.csv_files.at("wer_by_dataset.csv") ==
        "dataset_id,samples,ref_words,edits,wer\nd1,1,4,1,0.250000\n");
  CHECK(first.csv_files.at("confusion.csv").starts_with(
      "oracle\\predicted,<internal>,<external>,<rewrite>\n<internal>,0,1,0\n"));
  CHECK(first.csv_files.at("summary.csv").find("accuracy_weighted,1.000000") != std::string::npos);
}

TEST_CASE("empty report renders header-only tables") {
  auto r = evaluate({}, {});
  auto out = report_render(r);
  const std::vector<std::string> names = {"wer_by_dataset.csv", "accuracy_by_subset.csv",
                                          "token_metrics.csv", "confusion.csv",
                                          "token_distribution.csv", "summary.csv"};
  REQUIRE(out.csv_files.size() == names.size());
  for (const auto& n : names) {
    REQUIRE(out.csv_files.contains(n));
    const auto& body = out.csv_files.at(n);
    CHECK(std::count(body.begin(), body.end(), '\n') == 1);
  }
  CHECK(report_render(r).csv_files == out.csv_files);
}

TEST_CASE("csv fields are quoted when needed") {
  CHECK(detail::csv_field("plain") == "plain");
  CHECK(detail::csv_field("a,b") == "\"a,b\"");
  CHECK(detail::csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
}
