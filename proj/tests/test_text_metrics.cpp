#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "shh/text_metrics.hpp"
#include "support.hpp"

using namespace shh;
using Catch::Approx;

namespace {

std::vector<std::string> words(std::initializer_list<const char*> w) {
  return {w.begin(), w.end()};
}

void check_alignment_consistent(const Alignment& a, const std::vector<std::string>& ref,
                                const std::vector<std::string>& hyp) {
  REQUIRE(a.ref_length() == ref.size());
  REQUIRE(a.hyp_length() == hyp.size());
  std::size_t next_ref = 0, next_hyp = 0;
  for (const auto& op : a.ops) {
    if (op.ref_index) REQUIRE(*op.ref_index == next_ref++);
    if (op.hyp_index) REQUIRE(*op.hyp_index == next_hyp++);
    if (op.op == EditOp::Correct) REQUIRE(ref[*op.ref_index] == hyp[*op.hyp_index]);
    if (op.op == EditOp::Substitution) REQUIRE(ref[*op.ref_index] != hyp[*op.hyp_index]);
  }
  REQUIRE(next_ref == ref.size());
  REQUIRE(next_hyp == hyp.size());
}

}  // namespace

TEST_CASE("normalize_text applies the default policy") {
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("You'll, in the WAY!") == "you ll in the way");
  CHECK(normalize_text(" you ll in the way marguerite but how") ==
        "you ll in the way marguerite but how");
  CHECK(normalize_text("hello,world") == "hello world");
  CHECK(normalize_text("  tabs\tand\nnewlines  ") == "tabs and newlines");
  CHECK(normalize_text("it\xE2\x80\x99s \xE2\x80\x9Cquoted\xE2\x80\x9D") == "it s quoted");
  CHECK(normalize_text("...") == "");
}

TEST_CASE("normalize_text respects individual policy switches") {
  NormalizationPolicy keep_case;
  keep_case.lowercase = false;
  CHECK(normalize_text("Hello World", keep_case) == "Hello World");

  NormalizationPolicy keep_apostrophe;
  keep_apostrophe.apostrophe_to_space = false;
  CHECK(normalize_text("You'll go", keep_apostrophe) == "you'll go");
  CHECK(normalize_text("you\xE2\x80\x99ll", keep_apostrophe) == "you'll");

  CHECK(normalize_text("A,  b!", NormalizationPolicy::none()) == "A,  b!");

  NormalizationPolicy custom;
  custom.custom_replacements = {{"mister", "mr"}, {"\\bokay\\b", "ok"}};
  CHECK(normalize_text("Mister okay", custom) == "mister ok");
  CHECK(normalize_text("mister okay", custom) == "mr ok");
}

TEST_CASE("normalize_text is idempotent and well-formed on fuzzed input") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abcXYZ 019.,!?'-\t\n\"()";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 40);
  for (int n = 0; n < 10000; ++n) {
    std::string s;
    for (int i = len(rng); i > 0; --i) s += alphabet[pick(rng)];
    const auto once = normalize_text(s);
    REQUIRE(normalize_text(once) == once);
    REQUIRE(once.find("  ") == std::string::npos);
    if (!once.empty()) {
      REQUIRE(once.front() != ' ');
      REQUIRE(once.back() != ' ');
    }
    REQUIRE(tokenize(once) == shh_test::simple_words(s));
  }
}

TEST_CASE("align_edit counts on reference examples") {
  auto same = align_edit(words({"a", "b", "c"}), words({"a", "b", "c"}));
  CHECK(same.substitutions == 0);
  CHECK(same.deletions == 0);
  CHECK(same.insertions == 0);
  CHECK(same.correct == 3);

  auto sub = align_edit(words({"a", "b", "c"}), words({"a", "x", "c"}));
  CHECK(sub.substitutions == 1);
  CHECK(sub.deletions == 0);
  CHECK(sub.insertions == 0);
  CHECK(sub.ops[1] == AlignedPair{EditOp::Substitution, 1, 1});

  const auto hallucination = tokenize("i m from phelps county i m gonna see what");
  REQUIRE(hallucination.size() == 10);
  auto h = align_edit(words({"insane"}), hallucination);
  CHECK(h.substitutions == 1);
  CHECK(h.insertions == 9);
  CHECK(h.edit_total() == 10);
  CHECK(h.edit_total() == shh_test::brute_edit_min({"insane"}, hallucination));
}

TEST_CASE("align_edit tie-break prefers substitution, then deletion") {
  // ref [a b], hyp [b]: delete a (cost 1) is the only optimum.
  auto d = align_edit(words({"a", "b"}), words({"b"}));
  REQUIRE(d.ops.size() == 2);
  CHECK(d.ops[0].op == EditOp::Deletion);
  CHECK(d.ops[1].op == EditOp::Correct);

  // ref [a b], hyp [c]: sub+del or del+sub both cost 2; backtrace from the
  // end prefers the substitution at the last position.
  auto t = align_edit(words({"a", "b"}), words({"c"}));
  CHECK(t.edit_total() == 2);
  CHECK(t.substitutions == 1);
  CHECK(t.deletions == 1);
  CHECK(t.ops.back().op == EditOp::Substitution);

  auto empty_hyp = align_edit(words({"a", "b"}), {});
  CHECK(empty_hyp.deletions == 2);
  auto empty_ref = align_edit({}, words({"a"}));
  CHECK(empty_ref.insertions == 1);
}

TEST_CASE("align_edit matches exhaustive search on short sequences") {
  const auto seqs = shh_test::all_sequences({"a", "b"}, 4);
  for (const auto& r : seqs) {
    for (const auto& h : seqs) {
      auto a = align_edit(r, h);
      REQUIRE(a.edit_total() == shh_test::brute_edit_min(r, h));
      check_alignment_consistent(a, r, h);
    }
  }
}

TEST_CASE("appending a token to the hypothesis raises edits by at most one") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 8), sym(0, 3);
  for (int n = 0; n < 2000; ++n) {
    std::vector<std::string> r, h;
    for (int i = len(rng); i > 0; --i) r.push_back(std::string(1, static_cast<char>('a' + sym(rng))));
    for (int i = len(rng); i > 0; --i) h.push_back(std::string(1, static_cast<char>('a' + sym(rng))));
    const auto before = align_edit(r, h).edit_total();
    h.push_back("z");
    const auto after = align_edit(r, h).edit_total();
    REQUIRE(after <= before + 1);
  }
}

TEST_CASE("wer on reference examples") {
  CHECK(wer("hello world", "hello world") == 0.0);
  CHECK(wer("insane", "i m from phelps county i m gonna see what") == Approx(10.0));
  CHECK(wer("a b c d", "a b x d") == Approx(0.25));
  CHECK(wer("Hello, World!", "hello world") == 0.0);
  CHECK_THROWS_MATCHES(wer("?!", "x"), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::EmptyReference; }));
}

TEST_CASE("wer of a text against itself is zero") {
  for (const char* s : {"a", "You'll, in the WAY!", "x y z x y z", " spaced  out "}) {
    CHECK(wer(s, s) == 0.0);
  }
}

TEST_CASE("aggregate_wer pools counts and ignores order") {
  std::vector<ErrorCounts> one = {{0, 3}};
  CHECK(aggregate_wer(one) == 0.0);

  std::vector<ErrorCounts> two = {{1, 4}, {1, 1}};
  CHECK(aggregate_wer(two) == Approx(0.4));
  std::vector<ErrorCounts> swapped = {{1, 1}, {1, 4}};
  CHECK(aggregate_wer(swapped) == aggregate_wer(two));

  // Pooled, not the mean of utterance rates (which would be 0.625).
  CHECK(aggregate_wer(two) != Approx(0.625));

  std::vector<Alignment> aligned = {align_text("a b c d", "a b x d"), align_text("e", "")};
  CHECK(aggregate_wer(aligned) == Approx(0.4));

  CHECK_THROWS_AS(aggregate_wer(std::span<const ErrorCounts>{}), Error);
}

TEST_CASE("aggregate_wer is permutation invariant on random corpora") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> edits(0, 9), len(1, 9);
  for (int n = 0; n < 200; ++n) {
    std::vector<ErrorCounts> items(1 + n % 7);
    std::size_t e = 0, l = 0;
    for (auto& it : items) {
      it = {edits(rng), len(rng)};
      e += it.edits;
      l += it.ref_len;
    }
    const double pooled = static_cast<double>(e) / static_cast<double>(l);
    REQUIRE(aggregate_wer(items) == pooled);
    std::shuffle(items.begin(), items.end(), rng);
    REQUIRE(aggregate_wer(items) == pooled);
  }
}

TEST_CASE("macro_average is the unweighted mean") {
  std::vector<double> v = {0.1, 0.3};
  CHECK(macro_average(v) == Approx(0.2));
  CHECK_THROWS_AS(macro_average(std::span<const double>{}), Error);
}
