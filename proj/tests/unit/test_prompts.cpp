#include <doctest.h>

#include <nlohmann/json.hpp>

#include "ecorank/errors.hpp"
#include "ecorank/prompts.hpp"
#include "ecorank/textproc.hpp"
#include "helpers.hpp"

using namespace ecorank;

namespace {
const PromptTemplates& T() { return PromptTemplates::defaults(); }
}  // namespace

TEST_CASE("binary prompt embeds query and passage with a one-token cap") {
  auto task = testing::make_task(2);
  auto r = render_binary(T(), task, task.passages()[0]);
  CHECK(r.text.find(task.query_text()) != std::string::npos);
  CHECK(r.text.find("text of p1") != std::string::npos);
  CHECK(r.max_output_tokens == 1);
  CHECK(r.passage_ids == testing::ids({"p1"}));
  CHECK(r.text != render_binary(T(), task, task.passages()[1]).text);
}

TEST_CASE("rendered length is overhead plus field lengths") {
  auto task = testing::make_task(2);
  const auto& p = task.passages()[0];
  // Overheads computed independently in tests/oracles/derive.py.
  CHECK(template_overhead(T(), Strategy::kBinary) == 14);
  CHECK(template_overhead(T(), Strategy::kBUpr) == 8);
  CHECK(template_overhead(T(), Strategy::kBPrp) == 17);
  CHECK(count_tokens(render_binary(T(), task, p).text) ==
        14 + count_tokens(task.query_text()) + count_tokens(p.text));
  CHECK(count_tokens(render_querygen(T(), task, p).text) == 8 + count_tokens(p.text));
  auto pair = render_pairwise(T(), task, task.passages()[0], task.passages()[1]);
  CHECK(count_tokens(pair.text) == 17 + count_tokens(task.query_text()) + 6);
  CHECK(pair.passage_ids == testing::ids({"p1", "p2"}));
}

TEST_CASE("output caps per strategy") {
  auto task = testing::make_task(3);
  const auto& p = task.passages()[0];
  CHECK(render_likert(T(), task, p).max_output_tokens == 1);
  CHECK(render_querygen(T(), task, p).max_output_tokens == 32);
  CHECK(render_pairwise(T(), task, p, task.passages()[1]).max_output_tokens == 1);
  std::vector<const Passage*> w = {&task.passages()[0], &task.passages()[1], &task.passages()[2]};
  auto lw = render_listwise(T(), task, w);
  CHECK(lw.max_output_tokens == 12);
  CHECK(lw.text.find("[3] text of p3") != std::string::npos);
}

TEST_CASE("querygen prompt contains the passage but not the query") {
  auto task = testing::make_task(1);
  auto r = render_querygen(T(), task, task.passages()[0]);
  CHECK(r.text.find("text of p1") != std::string::npos);
  CHECK(r.text.find(task.query_text()) == std::string::npos);
  CHECK(token_f1("", task.query_text()) == 0.0);
}

TEST_CASE("parse_binary") {
  CHECK(parse_binary("Yes") == BinaryAnswer::kYes);
  CHECK(parse_binary("no.") == BinaryAnswer::kNo);
  CHECK(parse_binary("  YES, it is") == BinaryAnswer::kYes);
  CHECK(parse_binary("maybe relevant") == BinaryAnswer::kUnparseable);
  CHECK(parse_binary("") == BinaryAnswer::kUnparseable);
  CHECK(parse_binary("yesterday") == BinaryAnswer::kUnparseable);
}

TEST_CASE("parse_likert") {
  CHECK(parse_likert("Very related") == LikertAnswer::kVeryRelated);
  CHECK(parse_likert("somewhat related") == LikertAnswer::kSomewhatRelated);
  CHECK(parse_likert("Unrelated") == LikertAnswer::kUnrelated);
  CHECK(parse_likert("Very") == LikertAnswer::kVeryRelated);
  CHECK(parse_likert("kind of") == LikertAnswer::kUnparseable);
  CHECK(parse_likert("very unrelated") == LikertAnswer::kUnparseable);
}

TEST_CASE("parse_pairwise") {
  CHECK(parse_pairwise("Passage A") == PairwiseAnswer::kA);
  CHECK(parse_pairwise("B") == PairwiseAnswer::kB);
  CHECK(parse_pairwise("b.") == PairwiseAnswer::kB);
  CHECK(parse_pairwise("both") == PairwiseAnswer::kUnparseable);
  CHECK(parse_pairwise("") == PairwiseAnswer::kUnparseable);
}

TEST_CASE("parse_listwise") {
  CHECK(parse_listwise("[2] > [1] > [3]", 3) == std::vector<int>{2, 1, 3});
  CHECK(parse_listwise("[3] > [1] > [2]", 3) == std::vector<int>{3, 1, 2});
  CHECK_FALSE(parse_listwise("[1]>[1]>[2]", 3).has_value());
  CHECK_FALSE(parse_listwise("[1] > [2]", 3).has_value());
  CHECK_FALSE(parse_listwise("[1] > [2] > [4]", 3).has_value());
  CHECK_FALSE(parse_listwise("no brackets", 2).has_value());
}

TEST_CASE("canonical answers parse back") {
  for (auto a : {BinaryAnswer::kYes, BinaryAnswer::kNo}) {
    CHECK(parse_binary(canonical_answer(a)) == a);
    CHECK(count_tokens(canonical_answer(a)) <= kBinaryOutputCap);
  }
  for (auto a : {LikertAnswer::kVeryRelated, LikertAnswer::kSomewhatRelated,
                 LikertAnswer::kUnrelated}) {
    CHECK(parse_likert(canonical_answer(a)) == a);
    CHECK(count_tokens(canonical_answer(a)) <= kLikertOutputCap);
  }
  for (auto a : {PairwiseAnswer::kA, PairwiseAnswer::kB}) {
    CHECK(parse_pairwise(canonical_answer(a)) == a);
  }
  std::vector<int> perm = {4, 2, 1, 3};
  CHECK(parse_listwise(canonical_answer(perm), 4) == perm);
  CHECK(count_tokens(canonical_answer(perm)) <= 4 * kListwiseTokensPerPassage);
}

TEST_CASE("fill_template is a single pass") {
  CHECK(fill_template("{a} {b} {c}", {{"a", "{b}"}, {"b", "x"}}) == "{b} x {c}");
}

TEST_CASE("templates load from JSON over defaults") {
  auto t = PromptTemplates::from_json(nlohmann::json{{"binary", "Q {query} P {passage}"},
                                                      {"version", "test"}});
  CHECK(t.binary == "Q {query} P {passage}");
  CHECK(t.version == "test");
  CHECK(t.pairwise == T().pairwise);
  CHECK(PromptTemplates::from_json(T().to_json()).binary == T().binary);
  CHECK_THROWS_AS(PromptTemplates::from_json(nlohmann::json{{"binary", 3}}), ConfigError);
  CHECK(strategy_from_string("b_prp") == Strategy::kBPrp);
  CHECK_THROWS_AS(strategy_from_string("setwise"), ConfigError);
}
