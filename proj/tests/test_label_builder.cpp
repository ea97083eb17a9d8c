#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "shh/label_builder.hpp"
#include "shh/jsonl.hpp"
#include "shh/labeling.hpp"
#include "support.hpp"

using namespace shh;
using Catch::Approx;

namespace {

HypothesisSet asr_hyps(std::string internal, std::string external, std::optional<std::string> ger) {
  HypothesisSet h;
  h.internal = std::move(internal);
  h.external_nbest = {std::move(external)};
  h.ger = std::move(ger);
  return h;
}

// Edit count from the exhaustive oracle.
std::size_t oracle_edits(const std::string& ref, const std::string& hyp) {
  return shh_test::brute_edit_min(shh_test::simple_words(ref), shh_test::simple_words(hyp));
}

std::string words_with_errors(std::size_t n, std::size_t errors) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += (i < n - errors) ? "w" + std::to_string(i) : "x" + std::to_string(i);
  }
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected shh::Error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("label_asr on the marguerite case") {
  auto l = label_asr("you in the way marguerite but how",
                     asr_hyps("you in the way marguerite but how",
                              "you ll in the way marguerite but how",
                              "you are in the way marguerite but how"));
  CHECK(l.token == ActionToken::internal());
  CHECK(l.wer_internal() == 0.0);
  CHECK(l.external.edits == 1);
  CHECK(l.ger.edits == 1);
}

TEST_CASE("label_asr picks external at w_int=0.5, w_ext=0.2, w_ger=0.3") {
  const std::string gold = words_with_errors(10, 0);
  const auto internal = words_with_errors(10, 5);
  const auto external = words_with_errors(10, 2);
  const auto ger = words_with_errors(10, 3);
  REQUIRE(oracle_edits(gold, internal) == 5);
  REQUIRE(oracle_edits(gold, external) == 2);
  REQUIRE(oracle_edits(gold, ger) == 3);
  auto l = label_asr(gold, asr_hyps(internal, external, ger));
  CHECK(l.wer_internal() == Approx(0.5));
  CHECK(l.wer_external() == Approx(0.2));
  CHECK(l.wer_ger() == Approx(0.3));
  CHECK(l.token == ActionToken::external());
}

TEST_CASE("label_asr tie between external and correction goes to external") {
  const std::string gold = words_with_errors(20, 0);
  auto l = label_asr(gold, asr_hyps(words_with_errors(20, 8), words_with_errors(20, 5),
                                    words_with_errors(20, 5)));
  CHECK(l.wer_internal() == Approx(0.4));
  CHECK(l.wer_external() == Approx(0.25));
  CHECK(l.wer_ger() == Approx(0.25));
  CHECK(l.token == ActionToken::external());
}

TEST_CASE("label_asr ties and errors") {
  // internal ties the best: internal.
  CHECK(label_asr("a b c", asr_hyps("a b x", "a x c", "x b c")).token == ActionToken::internal());
  // correction strictly best: rewrite.
  CHECK(label_asr("a b c", asr_hyps("x y c", "a y z", "a b z")).token == ActionToken::rewrite());
  // Normalization applies before the WER=0 check.
  CHECK(label_asr("Hello, World!", asr_hyps("hello world", "x", "y")).token ==
        ActionToken::internal());

  CHECK(code_of([] { label_asr("a", asr_hyps("a", "a", std::nullopt)); }) == ErrorCode::MissingGer);
  CHECK(code_of([] { label_asr("?", asr_hyps("a", "a", "a")); }) == ErrorCode::EmptyReference);
  HypothesisSet no_int;
  no_int.external_nbest = {"a"};
  no_int.ger = "a";
  CHECK(code_of([&] { label_asr("a", no_int); }) == ErrorCode::MissingHypothesis);
}

TEST_CASE("label_asr uses the external top-1 only") {
  HypothesisSet h = asr_hyps("x y z", "p q r", "x y c");
  h.external_nbest.push_back("a b c");  // perfect, but not top-1
  CHECK(label_asr("a b c", h).token == ActionToken::rewrite());
}

TEST_CASE("label_asr agrees with the restated rule on random strings") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> len(1, 5), sym(0, 2);
  auto random_text = [&] {
    std::string s;
    for (int i = len(rng); i > 0; --i) s += std::string(1, static_cast<char>('a' + sym(rng))) + " ";
    return s;
  };
  for (int n = 0; n < 500; ++n) {
    const auto gold = random_text(), in = random_text(), ex = random_text(), ge = random_text();
    const auto expected = shh_test::reference_asr_label(oracle_edits(gold, in), oracle_edits(gold, ex),
                                                        oracle_edits(gold, ge));
    REQUIRE(label_asr(gold, asr_hyps(in, ex, ge)).token.render() == expected);
  }
}

TEST_CASE("label_qa majority rule") {
  const auto opts = shh_test::abcd_options();
  using V = std::vector<std::string>;
  CHECK(label_qa(opts, "C", std::string("C"), V{"B", "B", "C", "B", "B"}) == ActionToken::internal());
  CHECK(label_qa(opts, "C", std::string("B"), V{"C", "C", "C", "B", "D"}) == ActionToken::external());
  CHECK(label_qa(opts, "C", std::string("B"), V{"C", "C", "B", "B", "D"}) == ActionToken::rewrite());
  // Even split is not a strict majority.
  CHECK(label_qa(opts, "C", std::string("B"), V{"C", "C", "B", "B"}) == ActionToken::rewrite());
  // k = 1 reduces to the deterministic rule.
  CHECK(label_qa(opts, "C", std::string("B"), V{"C"}) == ActionToken::external());
  CHECK(label_qa(opts, "C", std::string("B"), V{"A"}) == ActionToken::rewrite());

  CHECK(code_of([&] { label_qa(opts, "C", std::string("E"), V{"C"}); }) == ErrorCode::InvalidChoice);
  CHECK(code_of([&] { label_qa(opts, "C", std::string("B"), V{"Z"}); }) == ErrorCode::InvalidChoice);
  CHECK(code_of([&] { label_qa(opts, "C", std::string("B"), V{}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("label_qa returns internal whenever the internal choice is right") {
  const auto opts = shh_test::abcd_options();
  std::mt19937_64 rng(2);
  const std::vector<std::string> letters = {"A", "B", "C", "D"};
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  for (int n = 0; n < 300; ++n) {
    const std::size_t k = 1 + 2 * (n % 3);
    std::vector<std::string> ext;
    for (std::size_t i = 0; i < k; ++i) ext.push_back(letters[pick(rng)]);
    const auto gold = letters[pick(rng)];
    const auto internal = letters[pick(rng)];
    const auto token = label_qa(opts, gold, internal, ext);
    REQUIRE((token == ActionToken::internal()) == (internal == gold));
    REQUIRE(token.render() == shh_test::reference_qa_label(gold, internal, ext));
  }
}

TEST_CASE("label_qa_from_text treats unparseable answers as wrong") {
  auto s = shh_test::qa_sample("q", "C");
  HypothesisSet h;
  h.internal = "no idea";
  h.external_nbest = {"C. Forest fire", "forest fire", "???"};
  CHECK(label_qa_from_text(s, h) == ActionToken::external());
  h.external_nbest = {"C. Forest fire", "???", "B"};
  CHECK(label_qa_from_text(s, h) == ActionToken::rewrite());
  h.internal = "(c)";
  CHECK(label_qa_from_text(s, h) == ActionToken::internal());
}

TEST_CASE("LabeledExample target and JSON round trip") {
  auto s = shh_test::qa_sample("q", "C");
  HypothesisSet h;
  h.internal = "B. Thunderstorm";
  h.external_nbest = {"B. Thunderstorm"};
  auto ex = make_labeled_example(s, h);
  CHECK(ex.oracle_token == ActionToken::rewrite());
  CHECK(ex.sft_target == "<rewrite> C. Forest fire");
  auto parsed = parse_model_output(ex.sft_target);
  CHECK(parsed.token == ex.oracle_token);
  CHECK(parsed.payload == ex.gold);

  auto back = labeled_example_from_json(to_json(ex));
  CHECK(to_json(back).dump() == to_json(ex).dump());

  auto a = make_labeled_example(shh_test::asr_sample("u", "a b c"), asr_hyps("a b c", "a", "b"));
  CHECK(a.sft_target == "<internal> a b c");
  json j = to_json(a);
  CHECK(j["wer"]["internal"] == 0.0);

  j["oracle_token"] = "<tool:bnr>";
  CHECK(code_of([&] { labeled_example_from_json(j); }) == ErrorCode::SchemaError);
  j = to_json(a);
  j["sft_target"] = "<external> a b c";
  CHECK(code_of([&] { labeled_example_from_json(j); }) == ErrorCode::SchemaError);
}

namespace {

struct Corpus {
  std::vector<Sample> samples;
  std::shared_ptr<shh_test::Table> table = std::make_shared<shh_test::Table>();
};

Corpus internal_correct_corpus() {
  Corpus c;
  for (int i = 0; i < 3; ++i) {
    const auto id = "u" + std::to_string(i);
    c.samples.push_back(shh_test::asr_sample(id, "hello world " + std::to_string(i)));
    c.table->set(id, Role::Internal, 0, "hello world " + std::to_string(i));
    c.table->set(id, Role::External, 0, "hello word");
    c.table->set(id, Role::Ger, 0, "hello");
  }
  return c;
}

}  // namespace

TEST_CASE("build_labeled_dataset counts tokens") {
  auto c = internal_correct_corpus();
  Gateway gw;
  shh_test::bind_all(gw, shh_test::table_backend(c.table));
  RouterConfig cfg;
  auto run = build_labeled_dataset(c.samples, gw, cfg);
  CHECK(run.examples.size() == 3);
  CHECK(run.failures.empty());
  CHECK(run.token_counts == std::map<std::string, std::size_t>{
                                {"<internal>", 3}, {"<external>", 0}, {"<rewrite>", 0}});
}

TEST_CASE("build_labeled_dataset records failed samples in the sidecar") {
  auto c = internal_correct_corpus();
  BackendSpec spec;
  spec.backend_id = "flaky";
  auto table = c.table;
  auto flaky = std::make_shared<ScriptedBackend>(spec, [table](const GenerationRequest& r) -> std::string {
    if (r.sample_id == "u1" && r.role == Role::External) throw Error(ErrorCode::Timeout, "slow");
    return table->rows.at({r.sample_id, r.role, r.seed.value_or(0)});
  });
  Gateway gw;
  shh_test::bind_all(gw, flaky);
  auto run = build_labeled_dataset(c.samples, gw, RouterConfig{});
  REQUIRE(run.examples.size() == 2);
  CHECK(run.examples[0].sample.sample_id == "u0");
  CHECK(run.examples[1].sample.sample_id == "u2");
  REQUIRE(run.failures.size() == 1);
  CHECK(run.failures[0].sample_id == "u1");
  CHECK(run.failures[0].code == ErrorCode::Timeout);
}

TEST_CASE("build_labeled_dataset is independent of worker count") {
  std::mt19937_64 rng(4);
  Corpus c;
  std::uniform_int_distribution<int> coin(0, 2);
  const char* variants[] = {"alpha beta gamma", "alpha beta", "beta gamma delta"};
  for (int i = 0; i < 60; ++i) {
    const auto id = "s" + std::to_string(i);
    if (i % 3 == 0) {
      auto s = shh_test::qa_sample(id, "C");
      c.samples.push_back(s);
      c.table->set(id, Role::Internal, 0, coin(rng) ? "B" : "C");
      for (int k = 0; k < 3; ++k) c.table->set(id, Role::External, k, coin(rng) ? "C" : "A");
    } else {
      c.samples.push_back(shh_test::asr_sample(id, "alpha beta gamma"));
      c.table->set(id, Role::Internal, 0, variants[coin(rng)]);
      for (int k = 0; k < 3; ++k) c.table->set(id, Role::External, k, variants[coin(rng)]);
      c.table->set(id, Role::Ger, 0, variants[coin(rng)]);
    }
  }
  Gateway gw;
  shh_test::bind_all(gw, shh_test::table_backend(c.table));
  RouterConfig cfg;
  cfg.external_seeds = {0, 1, 2};
  auto one = build_labeled_dataset(c.samples, gw, cfg, 1);
  auto many = build_labeled_dataset(c.samples, gw, cfg, 8);
  CHECK(one.token_counts == many.token_counts);
  CHECK(to_jsonl_of(one.examples) == to_jsonl_of(many.examples));
  std::size_t total = 0;
  for (const auto& [tok, n] : one.token_counts) total += n;
  CHECK(total == one.examples.size());
  std::map<std::string, std::size_t> recount = empty_token_counts();
  for (const auto& ex : one.examples) ++recount[ex.oracle_token.render()];
  CHECK(recount == one.token_counts);
}

TEST_CASE("build_labeled_dataset needs the correction backend for ASR") {
  auto c = internal_correct_corpus();
  Gateway gw;
  auto b = shh_test::table_backend(c.table);
  gw.bind(Role::Internal, b);
  gw.bind(Role::External, b);
  CHECK(code_of([&] { build_labeled_dataset(c.samples, gw, RouterConfig{}); }) ==
        ErrorCode::ConfigError);
}
