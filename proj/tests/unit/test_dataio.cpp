#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ecorank/cli.hpp"
#include "ecorank/dataio.hpp"
#include "ecorank/errors.hpp"
#include "ecorank/eval.hpp"
#include "helpers.hpp"

using namespace ecorank;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ecorank_dataio_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string trec_run(std::size_t n, bool shuffled) {
  std::vector<std::string> lines;
  for (std::size_t i = 1; i <= n; ++i) {
    lines.push_back("q7 Q0 d" + std::to_string(i) + " " + std::to_string(i) + " " +
                    std::to_string(100.0 - static_cast<double>(i)) + " bm25");
  }
  if (shuffled) std::shuffle(lines.begin(), lines.end(), std::mt19937(5));
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

TEST_CASE("jsonl parses tasks in file order") {
  std::istringstream in(
      R"({"query_id": "a", "query": "first query", "passages": [{"id": "x", "text": "t x", "score": 2.5}, {"id": "y", "text": "t y"}], "gold": ["y"]})"
      "\n\n"
      R"({"query_id": "b", "query": "second", "passages": [{"id": "z", "text": "t z"}]})"
      "\n");
  auto tasks = parse_jsonl(in);
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0].query_id() == "a");
  CHECK(tasks[0].initial_ordering() == testing::ids({"x", "y"}));
  CHECK(tasks[0].passages()[0].initial_score == 2.5);
  CHECK_FALSE(tasks[0].passages()[1].initial_score.has_value());
  CHECK(tasks[0].gold() == std::set<PassageId>{"y"});
  CHECK(tasks[1].gold().empty());
}

TEST_CASE("jsonl errors name the line") {
  std::istringstream missing(
      R"({"query_id": "a", "query": "q", "passages": [{"id": "x", "text": "t"}]})"
      "\n"
      R"({"query_id": "b", "passages": [{"id": "x", "text": "t"}]})"
      "\n");
  try {
    parse_jsonl(missing);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream garbage("{not json}\n");
  CHECK_THROWS_AS(parse_jsonl(garbage), ParseError);
  std::istringstream dup(
      R"({"query_id": "a", "query": "q", "passages": [{"id": "x", "text": "t"}]})"
      "\n"
      R"({"query_id": "a", "query": "q", "passages": [{"id": "y", "text": "t"}]})"
      "\n");
  CHECK_THROWS_AS(parse_jsonl(dup), DuplicateQueryId);
}

TEST_CASE("jsonl round trip") {
  SyntheticSpec spec;
  spec.num_queries = 6;
  spec.passages_per_query = 7;
  spec.gold_per_query = 2;
  auto tasks = generate_synthetic(spec);
  std::stringstream buf;
  write_jsonl(buf, tasks);
  auto back = parse_jsonl(buf);
  CHECK(back == tasks);

  std::stringstream empty;
  write_jsonl(empty, std::span<const RankingTask>{});
  CHECK(empty.str().empty());
}

TEST_CASE("trec inputs become tasks in run order") {
  auto dir = scratch_dir("trec");
  std::string corpus;
  for (int i = 1; i <= 50; ++i) {
    corpus += R"({"id": "d)" + std::to_string(i) + R"(", "text": "doc number )" +
              std::to_string(i) + "\"}\n";
  }
  write_file(dir / "corpus.jsonl", corpus);
  write_file(dir / "qrels.txt", "q7 0 d4 3\nq7 0 d9 2\nq7 0 d77 3\nq7 0 d12 0\n");
  write_file(dir / "run.txt", trec_run(50, false));
  write_file(dir / "shuffled.txt", trec_run(50, true));
  write_file(dir / "topics.tsv", "q7\tseventh topic\n");

  auto tasks = load_trec(dir / "run.txt", dir / "qrels.txt", dir / "corpus.jsonl", 3,
                         dir / "topics.tsv");
  REQUIRE(tasks.size() == 1);
  const auto& t = tasks[0];
  CHECK(t.size() == 50);
  CHECK(t.query_text() == "seventh topic");
  CHECK(t.passages()[0].id == "d1");
  CHECK(t.passages()[49].id == "d50");
  CHECK(t.passages()[3].initial_score == doctest::Approx(96.0));
  CHECK(t.passages()[3].text == "doc number 4");
  // Grade 2 is below the threshold; d77 is judged but not retrieved.
  CHECK(t.gold() == std::set<PassageId>{"d4"});

  auto again = load_trec(dir / "shuffled.txt", dir / "qrels.txt", dir / "corpus.jsonl", 3,
                         dir / "topics.tsv");
  CHECK(again == tasks);

  auto no_topics = load_trec(dir / "run.txt", dir / "qrels.txt", dir / "corpus.jsonl");
  CHECK(no_topics[0].query_text() == "q7");
  auto lenient = load_trec(dir / "run.txt", dir / "qrels.txt", dir / "corpus.jsonl", 2);
  CHECK(lenient[0].gold() == std::set<PassageId>{"d4", "d9"});

  write_file(dir / "short_corpus.jsonl", R"({"id": "d1", "text": "only one"})" "\n");
  CHECK_THROWS_AS(load_trec(dir / "run.txt", dir / "qrels.txt", dir / "short_corpus.jsonl"),
                  MissingCorpusText);
}

TEST_CASE("trec parse errors") {
  std::istringstream cols("q1 Q0 d1 1 2.0\n");
  CHECK_THROWS_AS(parse_run(cols), ParseError);
  std::istringstream dup_doc("q1 Q0 d1 1 2.0 t\nq1 Q0 d1 2 1.0 t\n");
  CHECK_THROWS_AS(parse_run(dup_doc), ParseError);
  std::istringstream dup_rank("q1 Q0 d1 1 2.0 t\nq1 Q0 d2 1 1.0 t\n");
  CHECK_THROWS_AS(parse_run(dup_rank), ParseError);
  std::istringstream bad_grade("q1 0 d1 x\n");
  CHECK_THROWS_AS(parse_qrels(bad_grade), ParseError);
  std::istringstream neg_grade("q1 0 d1 -1\n");
  CHECK_THROWS_AS(parse_qrels(neg_grade), ParseError);
  CHECK_THROWS_AS(load_jsonl("/nonexistent/tasks.jsonl"), std::exception);
}

TEST_CASE("run output uses 1-based ranks and N-minus-position scores") {
  auto task = testing::make_task(3, {}, "qa");
  RankedList list(task, testing::ids({"p2", "p3", "p1"}));
  std::ostringstream out;
  write_run(out, std::span<const RankedList>(&list, 1), "mine");
  CHECK(out.str() == "qa Q0 p2 1 3 mine\nqa Q0 p3 2 2 mine\nqa Q0 p1 3 1 mine\n");

  std::istringstream in(out.str());
  auto run = parse_run(in);
  auto lists = rankings_from_run(run);
  REQUIRE(lists.size() == 1);
  CHECK(lists[0].ordering() == list.ordering());

  auto dir = scratch_dir("save");
  save_run(std::span<const RankedList>{}, dir / "empty.txt");
  CHECK(fs::exists(dir / "empty.txt"));
  CHECK(fs::file_size(dir / "empty.txt") == 0);
}

TEST_CASE("synthetic corpora are deterministic and well formed") {
  SyntheticSpec spec;
  spec.num_queries = 40;
  spec.passages_per_query = 30;
  spec.seed = 9;
  auto a = generate_synthetic(spec);
  CHECK(a == generate_synthetic(spec));
  spec.seed = 10;
  CHECK_FALSE(a == generate_synthetic(spec));
  for (const auto& t : a) {
    CHECK(t.size() == 30);
    CHECK(t.gold().size() == 1);
    for (std::size_t i = 1; i < t.size(); ++i) {
      CHECK(*t.passages()[i - 1].initial_score >= *t.passages()[i].initial_score);
    }
  }
  CHECK(a.front().query_id() == "q0000");

  spec.missing_rate = 1.0;
  for (const auto& t : generate_synthetic(spec)) CHECK(t.gold().empty());
}

TEST_CASE("retriever placement skews gold toward the top") {
  SyntheticSpec spec;
  spec.num_queries = 2000;
  spec.passages_per_query = 50;
  spec.passage_tokens = 4;
  spec.placement = GoldPlacement::kRetriever;
  spec.missing_rate = 0.25;
  auto tasks = generate_synthetic(spec);
  std::vector<QueryEval> evals;
  for (const auto& t : tasks) {
    auto order = t.initial_ordering();
    evals.push_back(evaluate_query(t.query_id(), order, t.gold(), default_cutoffs()));
  }
  auto r = aggregate(evals);
  CHECK(r.recall_at[1] == doctest::Approx(0.22).epsilon(0.15));
  CHECK(r.recall_at[10] == doctest::Approx(0.54).epsilon(0.1));
  CHECK(r.mrr == doctest::Approx(0.32).epsilon(0.1));

  spec.placement = GoldPlacement::kUniform;
  spec.missing_rate = 0.0;
  evals.clear();
  for (const auto& t : generate_synthetic(spec)) {
    auto order = t.initial_ordering();
    evals.push_back(evaluate_query(t.query_id(), order, t.gold(), default_cutoffs()));
  }
  CHECK(aggregate(evals).recall_at[10] == doctest::Approx(0.2).epsilon(0.15));
}
