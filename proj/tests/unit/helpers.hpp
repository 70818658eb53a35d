#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ecorank/backends.hpp"
#include "ecorank/core.hpp"
#include "ecorank/strategies.hpp"
#include "ecorank/textproc.hpp"

namespace testing {

using namespace ecorank;

// Passages p1..pn with distinct three-word texts; gold by id.
inline RankingTask make_task(std::size_t n, std::set<PassageId> gold = {},
                             std::string qid = "q1") {
  std::vector<Passage> ps;
  for (std::size_t i = 1; i <= n; ++i) {
    Passage p;
    p.id = "p" + std::to_string(i);
    p.text = "text of " + p.id;
    p.initial_score = static_cast<double>(n - i);
    ps.push_back(p);
  }
  return RankingTask::from_ordered(qid, "what is the answer", std::move(ps), std::move(gold));
}

inline Pricing unit_pricing(double per_token = 1.0) {
  Pricing p;
  p.prompt_cost = per_token;
  p.output_cost = per_token;
  return p;
}

inline std::shared_ptr<OracleBackend> oracle_for(const RankingTask& task, double accuracy = 1.0,
                                                 std::string name = "oracle",
                                                 double per_token = 1.0,
                                                 std::uint64_t seed = 0) {
  OracleConfig c;
  RankingTask copy = task;
  c.judgments = judgments_from_gold(std::span<const RankingTask>(&copy, 1));
  c.accuracy = accuracy;
  c.seed = seed;
  return std::make_shared<OracleBackend>(std::move(name), unit_pricing(per_token), c);
}

inline std::vector<PassageId> ids(std::initializer_list<const char*> xs) {
  return {xs.begin(), xs.end()};
}

inline bool is_permutation_of(const std::vector<PassageId>& got, const RankingTask& task) {
  auto a = got;
  auto b = task.initial_ordering();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

}  // namespace testing
