#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecorank/backends.hpp"
#include "ecorank/budget.hpp"
#include "ecorank/core.hpp"
#include "ecorank/prompts.hpp"
#include "ecorank/strategies.hpp"

namespace ecorank {

struct StageSpec {
  Strategy strategy = Strategy::kBinary;
  std::string backend;
  double fraction = 1.0;
  PairwiseParams pairwise;
  ListwiseParams listwise;
};

struct Auto1Params {
  std::size_t probe_depth = 8;  // m
  std::size_t yes_threshold = 4;  // t
};

struct Auto2Params {
  double stdev_threshold = 1.5;  // st
};

/// Difficulty routing: every stage runs on either the expensive or the
/// cheap backend, chosen per query.
struct RouterSpec {
  enum class Kind { kNone, kAuto1, kAuto2 };
  Kind kind = Kind::kNone;
  std::string expensive;
  std::string cheap;
  Auto1Params auto1;
  Auto2Params auto2;
};

struct PipelineConfig {
  std::vector<StageSpec> stages;
  double total_budget = 0.0;
  /// Split integral budgets in whole tokens (floor, remainder to last stage).
  bool integral_budget = true;
  bool check_consecutive_strategies = true;
  bool check_backend_order = true;
  RouterSpec router;

  /// Throws ConfigError/InvalidSplit on invariant violations. Backend names
  /// and the backend-order rule are checked only when `registry` is given.
  void validate(const BackendRegistry* registry = nullptr) const;

  /// {total_budget, stages: [{strategy, backend, fraction, params}],
  ///  router: "none" | {type: auto1|auto2, expensive, cheap, m, t, st},
  ///  integral_budget, validation: {consecutive_strategies, backend_order}}
  static PipelineConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct PipelineResult {
  RankedList ranked;
  Ledger ledger;
  /// Budget assigned to each stage before rollover.
  std::vector<double> stage_budgets;
  std::vector<double> stage_spend;
  /// Set by routers: the backend every stage ran on.
  std::optional<std::string> routed_to;
  std::optional<std::size_t> probe_yes_count;
};

/// Runs the stages in order. Each stage sees the previous stage's output as
/// its initial list and may also spend whatever earlier stages left unspent.
/// Stages with a zero fraction are skipped.
PipelineResult run_pipeline(const RankingTask& task, const PipelineConfig& config,
                            const BackendRegistry& registry,
                            const PromptTemplates& templates = PromptTemplates::defaults());

/// Binary filtering on `expensive` with fraction x, then pairwise passes over
/// the whole intermediate list on `cheap` with fraction y.
PipelineConfig ecorank_config(const std::string& expensive, const std::string& cheap,
                              double total_budget, double x = 0.5, double y = 0.5);

PipelineResult ecorank(const RankingTask& task, const BackendRegistry& registry,
                       const std::string& expensive, const std::string& cheap,
                       double total_budget, double x = 0.5, double y = 0.5,
                       const PromptTemplates& templates = PromptTemplates::defaults());

/// Same two-stage hybrid with one backend for both stages.
PipelineResult ecorank_no_cascade(const RankingTask& task, const BackendRegistry& registry,
                                  const std::string& backend, double total_budget,
                                  const PromptTemplates& templates = PromptTemplates::defaults());

/// Probe-based routing: binary answers for the top m passages on the cheap
/// backend; at least t Yes answers marks the query difficult and routes it
/// to the expensive backend. Probe answers are reused by the first stage.
PipelineResult route_auto1(const RankingTask& task, const BackendRegistry& registry,
                           const std::string& expensive, const std::string& cheap,
                           const Auto1Params& params, double total_budget,
                           const PromptTemplates& templates = PromptTemplates::defaults());

/// Score-dispersion routing: population stdev of the initial scores below
/// st marks the query difficult and routes it to the expensive backend.
PipelineResult route_auto2(const RankingTask& task, const BackendRegistry& registry,
                           const std::string& expensive, const std::string& cheap,
                           const Auto2Params& params, double total_budget,
                           const PromptTemplates& templates = PromptTemplates::defaults());

/// Population standard deviation of initial scores; throws MissingScores.
double initial_score_stdev(const RankingTask& task);

}  // namespace ecorank
