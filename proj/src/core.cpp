#include "ecorank/core.hpp"

#include <algorithm>
#include <unordered_map>

#include "ecorank/errors.hpp"

namespace ecorank {

RankingTask::RankingTask(std::string query_id, std::string query_text,
                         std::vector<Passage> passages,
                         std::set<PassageId> gold)
    : query_id_(std::move(query_id)),
      query_text_(std::move(query_text)),
      passages_(std::move(passages)),
      gold_(std::move(gold)) {
  std::set<PassageId> seen;
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    const Passage& p = passages_[i];
    if (p.initial_rank != i) {
      throw InvalidTask("query " + query_id_ + ": passage " + p.id +
                        " has initial_rank " + std::to_string(p.initial_rank) +
                        ", expected " + std::to_string(i));
    }
    if (p.text.empty()) {
      throw InvalidTask("query " + query_id_ + ": passage " + p.id +
                        " has empty text");
    }
    if (!seen.insert(p.id).second) {
      throw InvalidTask("query " + query_id_ + ": duplicate passage id " + p.id);
    }
  }
  for (const auto& g : gold_) {
    if (!seen.contains(g)) {
      throw InvalidTask("query " + query_id_ + ": gold id " + g +
                        " is not a candidate passage");
    }
  }
}

RankingTask RankingTask::from_ordered(std::string query_id,
                                      std::string query_text,
                                      std::vector<Passage> passages,
                                      std::set<PassageId> gold) {
  for (std::size_t i = 0; i < passages.size(); ++i) passages[i].initial_rank = i;
  return RankingTask(std::move(query_id), std::move(query_text),
                     std::move(passages), std::move(gold));
}

std::vector<PassageId> RankingTask::initial_ordering() const {
  std::vector<PassageId> out;
  out.reserve(passages_.size());
  for (const auto& p : passages_) out.push_back(p.id);
  return out;
}

const Passage& RankingTask::passage(const PassageId& id) const {
  auto it = std::find_if(passages_.begin(), passages_.end(),
                         [&](const Passage& p) { return p.id == id; });
  if (it == passages_.end()) {
    throw InvalidTask("query " + query_id_ + ": unknown passage id " + id);
  }
  return *it;
}

bool RankingTask::contains(const PassageId& id) const {
  return std::any_of(passages_.begin(), passages_.end(),
                     [&](const Passage& p) { return p.id == id; });
}

RankingTask RankingTask::reordered(std::span<const PassageId> ordering) const {
  // Validates the permutation.
  RankedList check(*this, {ordering.begin(), ordering.end()});
  std::unordered_map<PassageId, const Passage*> by_id;
  for (const auto& p : passages_) by_id.emplace(p.id, &p);
  std::vector<Passage> out;
  out.reserve(ordering.size());
  for (const auto& id : ordering) out.push_back(*by_id.at(id));
  return from_ordered(query_id_, query_text_, std::move(out), gold_);
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kProcessed:
      return "processed";
    case Provenance::kFallback:
      return "fallback";
    case Provenance::kUnprocessed:
      break;
  }
  return "unprocessed";
}

RankedList::RankedList(const RankingTask& task, std::vector<PassageId> ordering,
                       std::map<PassageId, Provenance> provenance)
    : query_id_(task.query_id()), ordering_(std::move(ordering)) {
  if (ordering_.size() != task.size()) {
    throw InvalidTask("query " + query_id_ + ": ranked list has " +
                      std::to_string(ordering_.size()) + " entries, task has " +
                      std::to_string(task.size()));
  }
  std::set<PassageId> seen;
  for (const auto& id : ordering_) {
    if (!task.contains(id)) {
      throw InvalidTask("query " + query_id_ + ": ranked list has unknown id " + id);
    }
    if (!seen.insert(id).second) {
      throw InvalidTask("query " + query_id_ + ": ranked list repeats id " + id);
    }
  }
  for (const auto& id : ordering_) {
    auto it = provenance.find(id);
    provenance_[id] = it == provenance.end() ? Provenance::kUnprocessed : it->second;
  }
}

RankedList RankedList::identity(const RankingTask& task) {
  return RankedList(task, task.initial_ordering());
}

Provenance RankedList::provenance_of(const PassageId& id) const {
  auto it = provenance_.find(id);
  return it == provenance_.end() ? Provenance::kUnprocessed : it->second;
}

std::map<std::string, std::set<PassageId>> binarize_judgments(
    const RelevanceJudgments& judgments, int threshold) {
  if (threshold < 0) throw ConfigError("relevance threshold must be >= 0");
  std::map<std::string, std::set<PassageId>> out;
  for (const auto& [qid, grades] : judgments) {
    auto& gold = out[qid];
    for (const auto& [pid, grade] : grades) {
      if (grade < 0) throw InvalidTask("negative grade for " + qid + "/" + pid);
      if (grade >= threshold) gold.insert(pid);
    }
  }
  return out;
}

}  // namespace ecorank
