#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ecorank/backends.hpp"
#include "ecorank/budget.hpp"
#include "ecorank/core.hpp"
#include "ecorank/prompts.hpp"

namespace ecorank {

/// Everything a strategy needs to issue budgeted calls for one query.
struct StageContext {
  Backend& backend;
  Ledger& ledger;
  const PromptTemplates& templates = PromptTemplates::defaults();
  std::size_t stage_index = 0;
  /// Per-stage call counter; feeds the keyed randomness of simulated backends.
  std::uint64_t calls_made = 0;
};

enum class CallStatus { kCompleted, kUnaffordable, kFailed };

struct CallResult {
  CallStatus status = CallStatus::kUnaffordable;
  std::string output;
};

/// Estimated cost of `prompt` on `backend`: its prompt tokens plus the full
/// output cap.
double estimate_cost(const Backend& backend, const PromptRecord& prompt);

/// Reserves the estimate, calls the backend and settles the actual usage.
/// Unaffordable calls are never sent. A backend error is settled at prompt
/// cost when the backend bills failures and at zero otherwise.
CallResult invoke(StageContext& ctx, const PromptRecord& prompt);

struct BinaryOptions {
  /// Answers already obtained for this query (e.g. by a routing probe).
  /// Those passages are grouped without another call.
  std::map<PassageId, BinaryAnswer> known;
};

struct PairwiseParams {
  /// Top-k depth; std::nullopt means N-1 (the whole list).
  std::optional<std::size_t> k = 10;
};

struct ListwiseParams {
  std::size_t window = 20;
  std::size_t step = 10;
};

/// Yes/No filtering. Passages are visited in initial order while the ledger
/// affords a call; the result is Yes passages, then unprocessed or
/// unparseable ones, then No passages, each group in initial order.
RankedList rank_binary(const RankingTask& task, StageContext& ctx,
                       const BinaryOptions& options = {});

/// Asks for Yes/No on the top `depth` passages (or until unaffordable).
std::map<PassageId, BinaryAnswer> probe_binary(const RankingTask& task,
                                               StageContext& ctx, std::size_t depth);

/// Three-point relevance: Very, Somewhat, then unprocessed, then Unrelated.
RankedList rank_likert(const RankingTask& task, StageContext& ctx);

/// Query generation scored by token F1 against the real query. Only the
/// processed prefix is re-sorted; later positions keep their initial rank.
RankedList rank_b_upr(const RankingTask& task, StageContext& ctx);

/// Budgeted bubble passes of adjacent pairwise comparisons. Each pass starts
/// at position min(k, tau, N-1), where tau is the number of comparisons the
/// remaining budget affords, and moves winners upward. Passes repeat until
/// nothing is affordable or a pass makes no swap.
RankedList rank_b_prp(const RankingTask& task, StageContext& ctx,
                      const PairwiseParams& params = {});

/// Sliding-window listwise ranking from the back of the list to the front.
RankedList rank_listwise(const RankingTask& task, StageContext& ctx,
                         const ListwiseParams& params = {});

}  // namespace ecorank
