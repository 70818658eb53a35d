#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecorank/backends.hpp"
#include "ecorank/core.hpp"
#include "ecorank/dataio.hpp"
#include "ecorank/eval.hpp"
#include "ecorank/pipeline.hpp"
#include "ecorank/prompts.hpp"

namespace ecorank {

/// Run configuration file:
///   {"pipeline": {...} | "path", "backends": {...} | "path",
///    "templates": {...} | "path"?}
/// Relative paths resolve against the config file's directory.
struct RunConfig {
  PipelineConfig pipeline;
  nlohmann::json backends = nlohmann::json::object();
  PromptTemplates templates = PromptTemplates::defaults();
  std::filesystem::path base_dir;

  static RunConfig from_json(const nlohmann::json& doc,
                             const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
};

struct DataSource {
  std::filesystem::path path;  // tasks JSONL, or the run file for trec
  std::string format = "jsonl";
  std::optional<std::filesystem::path> qrels;
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> topics;
  int threshold = 3;
};

/// Tasks plus the graded judgments simulated backends answer from. For
/// JSONL the judgments are the gold sets at grade 1.
struct Dataset {
  std::vector<RankingTask> tasks;
  RelevanceJudgments judgments;
  /// Grade at which a judgment counts as relevant.
  int relevant_grade = 1;
};

Dataset load_dataset(const DataSource& source);

/// Backends for a run. Simulated backends without their own
/// "relevant_grade" get the dataset's.
BackendRegistry build_registry(const nlohmann::json& backends, const Dataset& data,
                               std::uint64_t seed, const std::filesystem::path& base_dir);

struct QueryOutcome {
  RankedList ranked;
  double budget = 0.0;
  double spent = 0.0;
  std::vector<double> stage_spend;
  std::size_t calls = 0;
  bool overrun = false;
  std::optional<std::string> routed_to;
};

/// Runs the pipeline on every task with up to `jobs` worker threads. The
/// result is sorted by query id regardless of scheduling.
std::vector<QueryOutcome> rerank_all(std::span<const RankingTask> tasks,
                                     const PipelineConfig& pipeline,
                                     const BackendRegistry& registry,
                                     const PromptTemplates& templates, std::size_t jobs = 1);

/// {budget, queries: [{query_id, spent, stage_spend, calls, ...}], total, mean, max}
nlohmann::json spend_report(std::span<const QueryOutcome> outcomes);

/// Scores a ranking per query against gold sets. Queries without gold
/// entries score zero.
EvalReport evaluate_lists(std::span<const RankedList> lists,
                          const std::map<std::string, std::set<PassageId>>& gold,
                          std::span<const std::size_t> ks = default_cutoffs());

/// Same as above but reads each query's spend from the outcomes.
EvalReport evaluate_outcomes(std::span<const QueryOutcome> outcomes,
                             const std::map<std::string, std::set<PassageId>>& gold,
                             std::span<const std::size_t> ks = default_cutoffs());

std::map<std::string, std::set<PassageId>> gold_of(std::span<const RankingTask> tasks);

/// Rankings from a run file, in run rank order.
std::vector<RankedList> rankings_from_run(
    const std::map<std::string, std::vector<RunEntry>>& run);

enum class LlmOrder { kExpensiveFirst, kCheapFirst };
const char* to_string(LlmOrder o);

struct SweepSpec {
  std::string expensive;
  std::string cheap;
  std::vector<std::pair<double, double>> splits = default_splits();
  std::vector<LlmOrder> orders = {LlmOrder::kExpensiveFirst, LlmOrder::kCheapFirst};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  double total_budget = 0.0;
  /// Pairwise depth of the second stage; std::nullopt covers the whole list.
  std::optional<std::size_t> pairwise_k;

  /// (1,0), (0.2,0.8) ... (0.8,0.2), (0,1).
  static std::vector<std::pair<double, double>> default_splits();
  /// {"expensive", "cheap", "splits": [[x,y]...]?, "orders": [...]?,
  ///  "seeds": [...]?, "total_budget", "k"?}
  static SweepSpec from_json(const nlohmann::json& doc);
};

struct SweepRow {
  double x = 0.0;
  double y = 0.0;
  LlmOrder order = LlmOrder::kExpensiveFirst;
  std::uint64_t seed = 0;
  EvalReport report;
};

/// One row per split, order and seed, in that nesting order.
std::vector<SweepRow> run_sweep(const Dataset& data, const nlohmann::json& backends,
                                const SweepSpec& spec, const PromptTemplates& templates,
                                std::size_t jobs = 1,
                                const std::filesystem::path& base_dir = {});

struct SweepSummary {
  double x = 0.0;
  double y = 0.0;
  LlmOrder order = LlmOrder::kExpensiveFirst;
  std::size_t seeds = 0;
  double mrr = 0.0;
  double mrr_stderr = 0.0;
  double r1 = 0.0;
  double r10 = 0.0;
};

/// Mean over seeds per (split, order), with the standard error of the MRR
/// mean (sample stdev / sqrt(n)).
std::vector<SweepSummary> summarize_sweep(std::span<const SweepRow> rows);

/// split_x,split_y,order,seed,mrr,r1,r10,mean_spend
std::string sweep_csv(std::span<const SweepRow> rows);
/// split_x,split_y,order,seeds,mrr,mrr_stderr,r1,r10
std::string sweep_summary_csv(std::span<const SweepSummary> rows);

/// Synthetic corpus settings from JSON; every SyntheticSpec field is an
/// optional key of the same name, "placement" is "uniform" or "retriever".
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);

/// Command-line entry point. Returns the process exit code: 0 on success,
/// 1 on runtime failure, 2 on configuration errors.
int run_cli(int argc, char** argv);

}  // namespace ecorank
