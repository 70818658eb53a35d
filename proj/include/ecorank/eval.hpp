#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecorank/core.hpp"

namespace ecorank {

/// 1/r for the 1-based position r of the first gold id; 0 if none appears.
double reciprocal_rank(std::span<const PassageId> ranked, const std::set<PassageId>& gold);

/// Hit rate: 1 if any gold id is among the first k, else 0. Requires k >= 1.
double recall_at_k(std::span<const PassageId> ranked, const std::set<PassageId>& gold,
                   std::size_t k);

struct QueryEval {
  std::string query_id;
  double reciprocal_rank = 0.0;
  std::map<std::size_t, double> recall_at;
  double spend = 0.0;
};

QueryEval evaluate_query(const std::string& query_id, std::span<const PassageId> ranked,
                         const std::set<PassageId>& gold, std::span<const std::size_t> ks,
                         double spend = 0.0);

struct EvalReport {
  std::vector<QueryEval> per_query;
  double mrr = 0.0;
  std::map<std::size_t, double> recall_at;
  std::size_t query_count = 0;
  double total_spend = 0.0;
  double mean_spend = 0.0;
  double max_spend = 0.0;

  nlohmann::json to_json() const;
};

/// Arithmetic means over queries. Throws EmptyCorpus for no queries.
EvalReport aggregate(std::vector<QueryEval> per_query);

inline const std::vector<std::size_t>& default_cutoffs() {
  static const std::vector<std::size_t> ks = {1, 10};
  return ks;
}

/// Aligned text table, one row per method: MRR, then R@k for each cutoff,
/// as percentages.
std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace ecorank
