#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ecorank {

using PassageId = std::string;

struct Passage {
  PassageId id;
  std::string text;
  std::size_t initial_rank = 0;  // 0-based position in the pre-ranked list
  std::optional<double> initial_score;

  bool operator==(const Passage&) const = default;
};

/// A query with its pre-ranked candidates. Construction validates that the
/// passages are ordered by initial_rank 0..N-1, ids are unique, texts are
/// non-empty and gold references known ids.
class RankingTask {
 public:
  RankingTask() = default;
  RankingTask(std::string query_id, std::string query_text,
              std::vector<Passage> passages, std::set<PassageId> gold = {});

  /// Builds a task from passages in retrieval order; initial_rank is
  /// assigned from position.
  static RankingTask from_ordered(std::string query_id, std::string query_text,
                                  std::vector<Passage> passages,
                                  std::set<PassageId> gold = {});

  const std::string& query_id() const noexcept { return query_id_; }
  const std::string& query_text() const noexcept { return query_text_; }
  const std::vector<Passage>& passages() const noexcept { return passages_; }
  const std::set<PassageId>& gold() const noexcept { return gold_; }
  std::size_t size() const noexcept { return passages_.size(); }

  std::vector<PassageId> initial_ordering() const;
  const Passage& passage(const PassageId& id) const;
  bool contains(const PassageId& id) const;

  /// Same query and passages, re-ranked so that `ordering` becomes the new
  /// initial list. Used to chain pipeline stages.
  RankingTask reordered(std::span<const PassageId> ordering) const;

  bool operator==(const RankingTask&) const = default;

 private:
  std::string query_id_;
  std::string query_text_;
  std::vector<Passage> passages_;
  std::set<PassageId> gold_;
};

enum class Provenance { kUnprocessed, kProcessed, kFallback };

const char* to_string(Provenance p);

/// Output permutation of a task's passage ids, best first.
class RankedList {
 public:
  RankedList() = default;
  /// Throws InvalidTask unless `ordering` is a permutation of the task ids.
  /// `provenance` is keyed by passage id; missing ids are kUnprocessed.
  RankedList(const RankingTask& task, std::vector<PassageId> ordering,
             std::map<PassageId, Provenance> provenance = {});

  /// The task's initial ordering with every passage unprocessed.
  static RankedList identity(const RankingTask& task);

  const std::string& query_id() const noexcept { return query_id_; }
  const std::vector<PassageId>& ordering() const noexcept { return ordering_; }
  const std::map<PassageId, Provenance>& provenance() const noexcept {
    return provenance_;
  }
  Provenance provenance_of(const PassageId& id) const;
  std::size_t size() const noexcept { return ordering_.size(); }

  bool operator==(const RankedList&) const = default;

 private:
  std::string query_id_;
  std::vector<PassageId> ordering_;
  std::map<PassageId, Provenance> provenance_;
};

/// query_id -> passage_id -> grade
using RelevanceJudgments = std::map<std::string, std::map<PassageId, int>>;

/// Per-query gold sets: a passage is gold iff its grade >= threshold.
std::map<std::string, std::set<PassageId>> binarize_judgments(
    const RelevanceJudgments& judgments, int threshold);

}  // namespace ecorank
