#include "ecorank/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ecorank/errors.hpp"
#include "ecorank/textproc.hpp"

namespace ecorank {

double estimate_cost(const Backend& backend, const PromptRecord& prompt) {
  return call_cost(count_tokens(prompt.text), prompt.max_output_tokens,
                   backend.pricing());
}

CallResult invoke(StageContext& ctx, const PromptRecord& prompt) {
  auto permit = ctx.ledger.try_charge(estimate_cost(ctx.backend, prompt));
  if (!permit) return {CallStatus::kUnaffordable, {}};
  const std::uint64_t ordinal = ctx.calls_made++;
  CostRecord record;
  record.backend_name = ctx.backend.name();
  record.stage_index = ctx.stage_index;
  try {
    Completion c = ctx.backend.complete(prompt, ordinal);
    record.prompt_tokens = c.prompt_tokens;
    record.output_tokens = c.output_tokens;
    record.cost = call_cost(c.prompt_tokens, c.output_tokens, ctx.backend.pricing());
    ctx.ledger.settle(*permit, std::move(record));
    return {CallStatus::kCompleted, std::move(c.output)};
  } catch (const BackendError&) {
    if (ctx.backend.bills_failures()) {
      record.prompt_tokens = count_tokens(prompt.text);
      record.cost = call_cost(record.prompt_tokens, 0, ctx.backend.pricing());
    }
    ctx.ledger.settle(*permit, std::move(record));
    return {CallStatus::kFailed, {}};
  }
}

namespace {

// Concatenates tiers in order; each tier keeps initial order.
RankedList grouped(const RankingTask& task, const std::vector<int>& tier_of,
                   int tiers, std::map<PassageId, Provenance> provenance) {
  std::vector<PassageId> ordering;
  ordering.reserve(task.size());
  for (int t = 0; t < tiers; ++t) {
    for (std::size_t i = 0; i < task.size(); ++i) {
      if (tier_of[i] == t) ordering.push_back(task.passages()[i].id);
    }
  }
  return RankedList(task, std::move(ordering), std::move(provenance));
}

}  // namespace

std::map<PassageId, BinaryAnswer> probe_binary(const RankingTask& task,
                                               StageContext& ctx, std::size_t depth) {
  std::map<PassageId, BinaryAnswer> answers;
  depth = std::min(depth, task.size());
  for (std::size_t i = 0; i < depth; ++i) {
    const Passage& p = task.passages()[i];
    auto res = invoke(ctx, render_binary(ctx.templates, task, p));
    if (res.status == CallStatus::kUnaffordable) break;
    answers[p.id] = res.status == CallStatus::kCompleted ? parse_binary(res.output)
                                                         : BinaryAnswer::kUnparseable;
  }
  return answers;
}

RankedList rank_binary(const RankingTask& task, StageContext& ctx,
                       const BinaryOptions& options) {
  enum { kYes, kMiddle, kNo };
  std::vector<int> tier(task.size(), kMiddle);
  std::map<PassageId, Provenance> prov;
  bool exhausted = false;
  for (std::size_t i = 0; i < task.size(); ++i) {
    const Passage& p = task.passages()[i];
    BinaryAnswer answer = BinaryAnswer::kUnparseable;
    if (auto it = options.known.find(p.id); it != options.known.end()) {
      answer = it->second;
    } else {
      if (exhausted) continue;
      auto res = invoke(ctx, render_binary(ctx.templates, task, p));
      if (res.status == CallStatus::kUnaffordable) {
        exhausted = true;
        continue;
      }
      if (res.status == CallStatus::kCompleted) answer = parse_binary(res.output);
    }
    switch (answer) {
      case BinaryAnswer::kYes:
        tier[i] = kYes;
        prov[p.id] = Provenance::kProcessed;
        break;
      case BinaryAnswer::kNo:
        tier[i] = kNo;
        prov[p.id] = Provenance::kProcessed;
        break;
      case BinaryAnswer::kUnparseable:
        prov[p.id] = Provenance::kFallback;
        break;
    }
  }
  return grouped(task, tier, 3, std::move(prov));
}

RankedList rank_likert(const RankingTask& task, StageContext& ctx) {
  enum { kVery, kSomewhat, kMiddle, kUnrelated };
  std::vector<int> tier(task.size(), kMiddle);
  std::map<PassageId, Provenance> prov;
  for (std::size_t i = 0; i < task.size(); ++i) {
    const Passage& p = task.passages()[i];
    auto res = invoke(ctx, render_likert(ctx.templates, task, p));
    if (res.status == CallStatus::kUnaffordable) break;
    LikertAnswer answer = res.status == CallStatus::kCompleted
                              ? parse_likert(res.output)
                              : LikertAnswer::kUnparseable;
    prov[p.id] = Provenance::kProcessed;
    switch (answer) {
      case LikertAnswer::kVeryRelated:
        tier[i] = kVery;
        break;
      case LikertAnswer::kSomewhatRelated:
        tier[i] = kSomewhat;
        break;
      case LikertAnswer::kUnrelated:
        tier[i] = kUnrelated;
        break;
      case LikertAnswer::kUnparseable:
        prov[p.id] = Provenance::kFallback;
        break;
    }
  }
  return grouped(task, tier, 4, std::move(prov));
}

RankedList rank_b_upr(const RankingTask& task, StageContext& ctx) {
  struct Scored {
    std::size_t index;
    double f1;
  };
  std::vector<Scored> prefix;
  std::map<PassageId, Provenance> prov;
  for (std::size_t i = 0; i < task.size(); ++i) {
    const Passage& p = task.passages()[i];
    auto res = invoke(ctx, render_querygen(ctx.templates, task, p));
    if (res.status == CallStatus::kUnaffordable) break;
    if (res.status == CallStatus::kCompleted) {
      prefix.push_back({i, token_f1(res.output, task.query_text())});
      prov[p.id] = Provenance::kProcessed;
    } else {
      prefix.push_back({i, 0.0});
      prov[p.id] = Provenance::kFallback;
    }
  }
  std::stable_sort(prefix.begin(), prefix.end(),
                   [](const Scored& a, const Scored& b) { return a.f1 > b.f1; });
  std::vector<PassageId> ordering;
  ordering.reserve(task.size());
  for (const auto& s : prefix) ordering.push_back(task.passages()[s.index].id);
  for (std::size_t i = prefix.size(); i < task.size(); ++i) {
    ordering.push_back(task.passages()[i].id);
  }
  return RankedList(task, std::move(ordering), std::move(prov));
}

RankedList rank_b_prp(const RankingTask& task, StageContext& ctx,
                      const PairwiseParams& params) {
  const std::size_t n = task.size();
  if (params.k && *params.k < 1) throw ConfigError("pairwise k must be >= 1");
  std::vector<const Passage*> list;
  for (const auto& p : task.passages()) list.push_back(&p);
  std::map<PassageId, Provenance> prov;
  auto tag = [&](const Passage* p, Provenance v) {
    auto& cur = prov[p->id];
    if (cur != Provenance::kProcessed) cur = v;
  };

  if (n >= 2) {
    const std::size_t depth = std::min(params.k.value_or(n - 1), n - 1);
    bool stop = false;
    // A bubble pass over a consistent comparator settles at least one more
    // position, so n passes are enough even when calls are free.
    for (std::size_t pass = 0; pass < n && !stop; ++pass) {
      // tau: comparisons the remaining budget affords, at the mean estimated
      // price of the adjacent pairs within reach.
      double total = 0.0;
      for (std::size_t i = 1; i <= depth; ++i) {
        total += estimate_cost(
            ctx.backend, render_pairwise(ctx.templates, task, *list[i - 1], *list[i]));
      }
      double mean = total / static_cast<double>(depth);
      std::size_t tau = depth;
      if (mean > 0.0) {
        double affordable = std::floor(ctx.ledger.remaining() / mean + 1e-9);
        tau = affordable >= static_cast<double>(depth) ? depth
                                                       : static_cast<std::size_t>(affordable);
      }
      if (tau == 0) break;
      const std::size_t start = std::min(depth, tau);
      bool swapped = false;
      for (std::size_t i = start; i >= 1; --i) {
        auto res = invoke(ctx, render_pairwise(ctx.templates, task, *list[i - 1], *list[i]));
        if (res.status == CallStatus::kUnaffordable) {
          stop = true;
          break;
        }
        PairwiseAnswer answer = res.status == CallStatus::kCompleted
                                    ? parse_pairwise(res.output)
                                    : PairwiseAnswer::kUnparseable;
        if (answer == PairwiseAnswer::kUnparseable) {
          tag(list[i - 1], Provenance::kFallback);
          tag(list[i], Provenance::kFallback);
          continue;
        }
        tag(list[i - 1], Provenance::kProcessed);
        tag(list[i], Provenance::kProcessed);
        if (answer == PairwiseAnswer::kB) {
          std::swap(list[i - 1], list[i]);
          swapped = true;
        }
      }
      if (!swapped) break;
    }
  }

  std::vector<PassageId> ordering;
  ordering.reserve(n);
  for (const auto* p : list) ordering.push_back(p->id);
  return RankedList(task, std::move(ordering), std::move(prov));
}

RankedList rank_listwise(const RankingTask& task, StageContext& ctx,
                         const ListwiseParams& params) {
  const std::size_t n = task.size();
  if (params.step < 1 || params.step > params.window) {
    throw ConfigError("listwise params need 1 <= step <= window");
  }
  std::vector<const Passage*> list;
  for (const auto& p : task.passages()) list.push_back(&p);
  std::map<PassageId, Provenance> prov;
  const std::size_t w = std::min(params.window, n);
  if (w >= 2) {
    std::size_t start = n - w;
    while (true) {
      std::span<const Passage* const> window(list.data() + start, w);
      auto res = invoke(ctx, render_listwise(ctx.templates, task, window));
      if (res.status != CallStatus::kUnaffordable) {
        std::optional<std::vector<int>> perm;
        if (res.status == CallStatus::kCompleted) perm = parse_listwise(res.output, w);
        if (perm) {
          std::vector<const Passage*> reordered;
          for (int id : *perm) reordered.push_back(window[static_cast<std::size_t>(id - 1)]);
          std::copy(reordered.begin(), reordered.end(), list.begin() + static_cast<long>(start));
          for (const auto* p : reordered) prov[p->id] = Provenance::kProcessed;
        } else {
          for (const auto* p : window) {
            if (prov[p->id] != Provenance::kProcessed) prov[p->id] = Provenance::kFallback;
          }
        }
      }
      if (start == 0) break;
      start = start > params.step ? start - params.step : 0;
    }
  }
  std::vector<PassageId> ordering;
  ordering.reserve(n);
  for (const auto* p : list) ordering.push_back(p->id);
  return RankedList(task, std::move(ordering), std::move(prov));
}

}  // namespace ecorank
