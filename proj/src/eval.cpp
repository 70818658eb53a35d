#include "ecorank/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

double reciprocal_rank(std::span<const PassageId> ranked, const std::set<PassageId>& gold) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (gold.contains(ranked[i])) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double recall_at_k(std::span<const PassageId> ranked, const std::set<PassageId>& gold,
                   std::size_t k) {
  if (k < 1) throw ConfigError("recall cutoff k must be >= 1");
  const std::size_t depth = std::min(k, ranked.size());
  for (std::size_t i = 0; i < depth; ++i) {
    if (gold.contains(ranked[i])) return 1.0;
  }
  return 0.0;
}

QueryEval evaluate_query(const std::string& query_id, std::span<const PassageId> ranked,
                         const std::set<PassageId>& gold, std::span<const std::size_t> ks,
                         double spend) {
  QueryEval q;
  q.query_id = query_id;
  q.reciprocal_rank = reciprocal_rank(ranked, gold);
  for (auto k : ks) q.recall_at[k] = recall_at_k(ranked, gold, k);
  q.spend = spend;
  return q;
}

EvalReport aggregate(std::vector<QueryEval> per_query) {
  if (per_query.empty()) throw EmptyCorpus("cannot aggregate an empty corpus");
  EvalReport r;
  r.query_count = per_query.size();
  const double n = static_cast<double>(per_query.size());
  for (const auto& q : per_query) {
    r.mrr += q.reciprocal_rank;
    for (const auto& [k, v] : q.recall_at) r.recall_at[k] += v;
    r.total_spend += q.spend;
    r.max_spend = std::max(r.max_spend, q.spend);
  }
  r.mrr /= n;
  for (auto& [k, v] : r.recall_at) v /= n;
  r.mean_spend = r.total_spend / n;
  r.per_query = std::move(per_query);
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json doc;
  doc["query_count"] = query_count;
  doc["mrr"] = mrr;
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [k, v] : recall_at) recall["R@" + std::to_string(k)] = v;
  doc["recall"] = recall;
  doc["spend"] = {{"total", total_spend}, {"mean", mean_spend}, {"max", max_spend}};
  doc["per_query"] = nlohmann::json::array();
  for (const auto& q : per_query) {
    nlohmann::json item = {{"query_id", q.query_id},
                           {"reciprocal_rank", q.reciprocal_rank},
                           {"spend", q.spend}};
    for (const auto& [k, v] : q.recall_at) item["R@" + std::to_string(k)] = v;
    doc["per_query"].push_back(std::move(item));
  }
  return doc;
}

std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::set<std::size_t> cutoffs;
  std::size_t name_width = 6;
  for (const auto& [name, report] : rows) {
    name_width = std::max(name_width, name.size());
    for (const auto& [k, _] : report.recall_at) cutoffs.insert(k);
  }
  auto pad = [](std::string s, std::size_t w, bool right) {
    if (s.size() >= w) return s;
    return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
  };
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << pad("Method", name_width, false) << "  " << pad("MRR", 7, true);
  for (auto k : cutoffs) out << "  " << pad("R@" + std::to_string(k), 7, true);
  out << "  " << pad("Queries", 7, true) << "  " << pad("MeanSpend", 10, true) << "\n";
  for (const auto& [name, report] : rows) {
    out << pad(name, name_width, false) << "  " << pad(pct(report.mrr), 7, true);
    for (auto k : cutoffs) {
      auto it = report.recall_at.find(k);
      out << "  " << pad(it == report.recall_at.end() ? "-" : pct(it->second), 7, true);
    }
    char spend[32];
    std::snprintf(spend, sizeof(spend), "%.2f", report.mean_spend);
    out << "  " << pad(std::to_string(report.query_count), 7, true) << "  "
        << pad(spend, 10, true) << "\n";
  }
  return out.str();
}

}  // namespace ecorank
