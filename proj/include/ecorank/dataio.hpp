#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecorank/core.hpp"

namespace ecorank {

/// One task per line:
///   {"query_id", "query", "passages": [{"id", "text", "score"?}], "gold": [ids]?}
/// Passages are taken in file order as the initial ranking. Blank lines are
/// skipped. Throws ParseError (with the 1-based line) and DuplicateQueryId.
std::vector<RankingTask> parse_jsonl(std::istream& in);
std::vector<RankingTask> load_jsonl(const std::filesystem::path& path);

void write_jsonl(std::ostream& out, std::span<const RankingTask> tasks);
void save_jsonl(std::span<const RankingTask> tasks, const std::filesystem::path& path);

/// 4-column qrels: qid, iteration, docid, grade.
RelevanceJudgments parse_qrels(std::istream& in);
RelevanceJudgments load_qrels(const std::filesystem::path& path);

struct RunEntry {
  PassageId doc_id;
  long long rank = 0;
  double score = 0.0;
};

/// 6-column run: qid, Q0, docid, rank, score, tag. Each query's entries are
/// sorted by the rank column; duplicate docids or ranks within a query are
/// parse errors.
std::map<std::string, std::vector<RunEntry>> parse_run(std::istream& in);
std::map<std::string, std::vector<RunEntry>> load_run(const std::filesystem::path& path);

/// Sidecar corpus: JSONL lines {"id", "text"}.
std::map<PassageId, std::string> load_corpus(const std::filesystem::path& path);

/// Topics: "qid<TAB>query text" per line.
std::map<std::string, std::string> load_topics(const std::filesystem::path& path);

/// Tasks from a run plus qrels. Passages follow run rank, carry the run
/// score, and take their text from `corpus`. A passage is gold iff its grade
/// is at least `threshold`; judged documents absent from the run are
/// ignored. Query text comes from `topics` and falls back to the query id.
/// Throws MissingCorpusText for docids without text.
std::vector<RankingTask> build_trec_tasks(
    const std::map<std::string, std::vector<RunEntry>>& run,
    const RelevanceJudgments& qrels, const std::map<PassageId, std::string>& corpus,
    int threshold = 3, const std::map<std::string, std::string>& topics = {});

std::vector<RankingTask> load_trec(const std::filesystem::path& run_path,
                                   const std::filesystem::path& qrels_path,
                                   const std::filesystem::path& corpus_path,
                                   int threshold = 3,
                                   const std::optional<std::filesystem::path>& topics_path = {});

/// Writes "qid Q0 docid rank score tag" lines in the order given. Rank is the
/// 1-based output position and score is N minus the 0-based position, so the
/// top passage scores N.
void write_run(std::ostream& out, std::span<const RankedList> lists,
               const std::string& tag = "ecorank");
void save_run(std::span<const RankedList> lists, const std::filesystem::path& path,
              const std::string& tag = "ecorank");

/// Where gold passages sit in the initial list of a synthetic corpus.
enum class GoldPlacement {
  kUniform,
  /// Skewed toward the top like a lexical retriever: a point mass at rank 1,
  /// then a mixture of a geometric decay and a uniform tail. With the
  /// default shape and missing_rate 0.25 the initial lists score roughly
  /// R@1 0.22, R@10 0.54 and MRR 0.32 at N=50.
  kRetriever,
};

struct SyntheticSpec {
  std::size_t num_queries = 200;
  std::size_t passages_per_query = 50;
  std::size_t passage_tokens = 20;
  std::size_t query_tokens = 6;
  std::size_t gold_per_query = 1;
  GoldPlacement placement = GoldPlacement::kUniform;
  /// Probability that a query has no gold passage in its list.
  double missing_rate = 0.0;
  // Retriever placement parameters.
  double top_mass = 0.2947;
  double geometric_share = 0.5663;
  double geometric_ratio = 0.7327;
  /// Initial scores fall linearly from `score_top` by a per-query spread
  /// drawn uniformly from [spread_min, spread_max], plus small jitter.
  double score_top = 20.0;
  double spread_min = 0.5;
  double spread_max = 8.0;
  std::uint64_t seed = 0;
};

/// Deterministic synthetic corpus. Query ids are zero-padded so that
/// lexical order equals generation order.
std::vector<RankingTask> generate_synthetic(const SyntheticSpec& spec);

}  // namespace ecorank
