#include "ecorank/pipeline.hpp"

#include <cmath>
#include <map>

#include <nlohmann/json.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

void PipelineConfig::validate(const BackendRegistry* registry) const {
  if (stages.empty()) throw ConfigError("pipeline has no stages");
  if (!std::isfinite(total_budget) || total_budget < 0.0) {
    throw ConfigError("total_budget must be finite and non-negative");
  }
  std::vector<double> fractions;
  for (const auto& s : stages) fractions.push_back(s.fraction);
  BudgetSplit split(fractions);  // throws InvalidSplit

  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    if (check_consecutive_strategies && i > 0 && stages[i - 1].strategy == s.strategy) {
      throw ConfigError(std::string("stages ") + std::to_string(i - 1) + " and " +
                        std::to_string(i) + " both use strategy " + to_string(s.strategy));
    }
    if (s.pairwise.k && *s.pairwise.k < 1) throw ConfigError("pairwise k must be >= 1");
    if (s.listwise.step < 1 || s.listwise.step > s.listwise.window) {
      throw ConfigError("listwise params need 1 <= step <= window");
    }
  }

  const bool routed = router.kind != RouterSpec::Kind::kNone;
  if (routed) {
    if (router.expensive.empty() || router.cheap.empty()) {
      throw ConfigError("router needs expensive and cheap backends");
    }
    if (router.kind == RouterSpec::Kind::kAuto1) {
      const auto& a = router.auto1;
      if (a.probe_depth < 1 || a.yes_threshold < 1 || a.yes_threshold > a.probe_depth) {
        throw ConfigError("auto1 needs m >= 1 and 1 <= t <= m");
      }
      if (stages.front().strategy != Strategy::kBinary) {
        throw ConfigError("auto1 routing needs a binary first stage");
      }
    } else if (!(router.auto2.stdev_threshold > 0.0)) {
      throw ConfigError("auto2 needs st > 0");
    }
  }

  if (!registry) return;
  if (routed) {
    registry->get(router.expensive);
    registry->get(router.cheap);
    return;
  }
  for (const auto& s : stages) registry->get(s.backend);
  if (check_backend_order) {
    std::map<Strategy, double> last_price;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& s = stages[i];
      double price = registry->get(s.backend).pricing().reference_call_cost();
      auto it = last_price.find(s.strategy);
      if (it != last_price.end() && price < it->second) {
        throw ConfigError("stage " + std::to_string(i) + " repeats strategy " +
                          to_string(s.strategy) + " on a cheaper backend (" +
                          s.backend + ")");
      }
      last_price[s.strategy] = price;
    }
  }
}

namespace {

nlohmann::json stage_params_json(const StageSpec& s) {
  nlohmann::json p = nlohmann::json::object();
  if (s.strategy == Strategy::kBPrp) {
    p["k"] = s.pairwise.k ? nlohmann::json(*s.pairwise.k) : nlohmann::json("all");
  } else if (s.strategy == Strategy::kListwise) {
    p["window"] = s.listwise.window;
    p["step"] = s.listwise.step;
  }
  return p;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc) {
  PipelineConfig c;
  try {
    if (!doc.is_object()) throw ConfigError("pipeline config must be a JSON object");
    c.total_budget = doc.at("total_budget").get<double>();
    c.integral_budget = doc.value("integral_budget", true);
    if (doc.contains("validation")) {
      const auto& v = doc["validation"];
      c.check_consecutive_strategies = v.value("consecutive_strategies", true);
      c.check_backend_order = v.value("backend_order", true);
    }
    for (const auto& st : doc.at("stages")) {
      StageSpec s;
      s.strategy = strategy_from_string(st.at("strategy").get<std::string>());
      s.backend = st.value("backend", std::string());
      s.fraction = st.value("fraction", 1.0);
      const auto params = st.value("params", nlohmann::json::object());
      if (params.contains("k")) {
        const auto& k = params["k"];
        if (k.is_string() && k.get<std::string>() == "all") {
          s.pairwise.k = std::nullopt;
        } else if (k.is_null()) {
          s.pairwise.k = std::nullopt;
        } else {
          auto kv = k.get<long long>();
          if (kv < 1) throw ConfigError("pairwise k must be >= 1");
          s.pairwise.k = static_cast<std::size_t>(kv);
        }
      }
      s.listwise.window = params.value("window", s.listwise.window);
      s.listwise.step = params.value("step", s.listwise.step);
      c.stages.push_back(std::move(s));
    }
    if (doc.contains("router") && !doc["router"].is_null()) {
      const auto& r = doc["router"];
      std::string type = r.is_string() ? r.get<std::string>() : r.at("type").get<std::string>();
      if (type == "none") {
        c.router.kind = RouterSpec::Kind::kNone;
      } else if (type == "auto1" || type == "auto2") {
        c.router.kind = type == "auto1" ? RouterSpec::Kind::kAuto1 : RouterSpec::Kind::kAuto2;
        c.router.expensive = r.at("expensive").get<std::string>();
        c.router.cheap = r.at("cheap").get<std::string>();
        c.router.auto1.probe_depth = r.value("m", c.router.auto1.probe_depth);
        c.router.auto1.yes_threshold = r.value("t", c.router.auto1.yes_threshold);
        c.router.auto2.stdev_threshold = r.value("st", c.router.auto2.stdev_threshold);
      } else {
        throw ConfigError("unknown router type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json doc;
  doc["total_budget"] = total_budget;
  doc["integral_budget"] = integral_budget;
  doc["validation"] = {{"consecutive_strategies", check_consecutive_strategies},
                       {"backend_order", check_backend_order}};
  doc["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    doc["stages"].push_back({{"strategy", to_string(s.strategy)},
                             {"backend", s.backend},
                             {"fraction", s.fraction},
                             {"params", stage_params_json(s)}});
  }
  switch (router.kind) {
    case RouterSpec::Kind::kNone:
      doc["router"] = "none";
      break;
    case RouterSpec::Kind::kAuto1:
      doc["router"] = {{"type", "auto1"},
                       {"expensive", router.expensive},
                       {"cheap", router.cheap},
                       {"m", router.auto1.probe_depth},
                       {"t", router.auto1.yes_threshold}};
      break;
    case RouterSpec::Kind::kAuto2:
      doc["router"] = {{"type", "auto2"},
                       {"expensive", router.expensive},
                       {"cheap", router.cheap},
                       {"st", router.auto2.stdev_threshold}};
      break;
  }
  return doc;
}

namespace {

std::vector<double> stage_budgets(const PipelineConfig& config) {
  std::vector<double> fractions;
  for (const auto& s : config.stages) fractions.push_back(s.fraction);
  BudgetSplit split(fractions);
  double whole = std::floor(config.total_budget);
  if (config.integral_budget && whole == config.total_budget && whole < 9e15) {
    std::vector<double> out;
    for (auto v : split_budget_tokens(static_cast<std::int64_t>(whole), split)) {
      out.push_back(static_cast<double>(v));
    }
    return out;
  }
  return split_budget(config.total_budget, split);
}

RankedList run_stage(const RankingTask& task, const StageSpec& spec, StageContext& ctx,
                     const BinaryOptions& binary_options) {
  switch (spec.strategy) {
    case Strategy::kBinary:
      return rank_binary(task, ctx, binary_options);
    case Strategy::kLikert:
      return rank_likert(task, ctx);
    case Strategy::kBUpr:
      return rank_b_upr(task, ctx);
    case Strategy::kBPrp:
      return rank_b_prp(task, ctx, spec.pairwise);
    case Strategy::kListwise:
      return rank_listwise(task, ctx, spec.listwise);
  }
  throw ConfigError("unhandled strategy");
}

Provenance merge(Provenance a, Provenance b) {
  if (a == Provenance::kProcessed || b == Provenance::kProcessed) return Provenance::kProcessed;
  if (a == Provenance::kFallback || b == Provenance::kFallback) return Provenance::kFallback;
  return Provenance::kUnprocessed;
}

// Runs every stage, optionally forcing all stages onto one backend and
// seeding the first (binary) stage with known answers. `ledger` may already
// hold probe charges.
PipelineResult run_stages(const RankingTask& task, const PipelineConfig& config,
                          const BackendRegistry& registry, const PromptTemplates& templates,
                          const std::string* forced_backend, Ledger ledger,
                          const BinaryOptions& first_stage_options) {
  PipelineResult result{RankedList::identity(task), std::move(ledger), {}, {}, {}, {}};
  result.stage_budgets = stage_budgets(config);
  std::map<PassageId, Provenance> provenance;
  std::vector<PassageId> ordering = task.initial_ordering();
  double ceiling = 0.0;
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    const StageSpec& spec = config.stages[i];
    ceiling += result.stage_budgets[i];
    if (i + 1 == config.stages.size()) ceiling = config.total_budget;
    if (spec.fraction == 0.0) continue;
    result.ledger.set_ceiling(ceiling);
    Backend& backend = registry.get(forced_backend ? *forced_backend : spec.backend);
    StageContext ctx{backend, result.ledger, templates, i};
    RankingTask stage_task = task.reordered(ordering);
    RankedList out = run_stage(stage_task, spec, ctx,
                               i == 0 ? first_stage_options : BinaryOptions{});
    ordering = out.ordering();
    for (const auto& [id, p] : out.provenance()) provenance[id] = merge(provenance[id], p);
  }
  result.ledger.set_ceiling(config.total_budget);
  for (std::size_t i = 0; i < config.stages.size(); ++i) {
    result.stage_spend.push_back(result.ledger.spent_in_stage(i));
  }
  result.ranked = RankedList(task, std::move(ordering), std::move(provenance));
  return result;
}

PipelineResult run_auto1(const RankingTask& task, const PipelineConfig& config,
                         const BackendRegistry& registry, const PromptTemplates& templates) {
  Ledger ledger(config.total_budget);
  auto budgets = stage_budgets(config);
  ledger.set_ceiling(config.stages.size() == 1 ? config.total_budget : budgets.front());
  BinaryOptions known;
  if (config.stages.front().fraction > 0.0) {
    StageContext probe{registry.get(config.router.cheap), ledger, templates, 0};
    known.known = probe_binary(task, probe, config.router.auto1.probe_depth);
  }
  std::size_t yes = 0;
  for (const auto& [_, a] : known.known) yes += a == BinaryAnswer::kYes ? 1 : 0;
  const bool difficult = yes >= config.router.auto1.yes_threshold;
  const std::string& chosen = difficult ? config.router.expensive : config.router.cheap;
  auto result = run_stages(task, config, registry, templates, &chosen, std::move(ledger), known);
  result.routed_to = chosen;
  result.probe_yes_count = yes;
  return result;
}

PipelineResult run_auto2(const RankingTask& task, const PipelineConfig& config,
                         const BackendRegistry& registry, const PromptTemplates& templates) {
  const bool difficult = initial_score_stdev(task) < config.router.auto2.stdev_threshold;
  const std::string& chosen = difficult ? config.router.expensive : config.router.cheap;
  auto result = run_stages(task, config, registry, templates, &chosen,
                           Ledger(config.total_budget), {});
  result.routed_to = chosen;
  return result;
}

}  // namespace

PipelineResult run_pipeline(const RankingTask& task, const PipelineConfig& config,
                            const BackendRegistry& registry,
                            const PromptTemplates& templates) {
  config.validate(&registry);
  switch (config.router.kind) {
    case RouterSpec::Kind::kAuto1:
      return run_auto1(task, config, registry, templates);
    case RouterSpec::Kind::kAuto2:
      return run_auto2(task, config, registry, templates);
    case RouterSpec::Kind::kNone:
      break;
  }
  return run_stages(task, config, registry, templates, nullptr, Ledger(config.total_budget),
                    {});
}

PipelineConfig ecorank_config(const std::string& expensive, const std::string& cheap,
                              double total_budget, double x, double y) {
  PipelineConfig c;
  c.total_budget = total_budget;
  StageSpec filter;
  filter.strategy = Strategy::kBinary;
  filter.backend = expensive;
  filter.fraction = x;
  StageSpec refine;
  refine.strategy = Strategy::kBPrp;
  refine.backend = cheap;
  refine.fraction = y;
  refine.pairwise.k = std::nullopt;
  c.stages = {filter, refine};
  return c;
}

PipelineResult ecorank(const RankingTask& task, const BackendRegistry& registry,
                       const std::string& expensive, const std::string& cheap,
                       double total_budget, double x, double y,
                       const PromptTemplates& templates) {
  return run_pipeline(task, ecorank_config(expensive, cheap, total_budget, x, y), registry,
                      templates);
}

PipelineResult ecorank_no_cascade(const RankingTask& task, const BackendRegistry& registry,
                                  const std::string& backend, double total_budget,
                                  const PromptTemplates& templates) {
  return ecorank(task, registry, backend, backend, total_budget, 0.5, 0.5, templates);
}

PipelineResult route_auto1(const RankingTask& task, const BackendRegistry& registry,
                           const std::string& expensive, const std::string& cheap,
                           const Auto1Params& params, double total_budget,
                           const PromptTemplates& templates) {
  auto config = ecorank_config(expensive, cheap, total_budget);
  config.router.kind = RouterSpec::Kind::kAuto1;
  config.router.expensive = expensive;
  config.router.cheap = cheap;
  config.router.auto1 = params;
  return run_pipeline(task, config, registry, templates);
}

PipelineResult route_auto2(const RankingTask& task, const BackendRegistry& registry,
                           const std::string& expensive, const std::string& cheap,
                           const Auto2Params& params, double total_budget,
                           const PromptTemplates& templates) {
  auto config = ecorank_config(expensive, cheap, total_budget);
  config.router.kind = RouterSpec::Kind::kAuto2;
  config.router.expensive = expensive;
  config.router.cheap = cheap;
  config.router.auto2 = params;
  return run_pipeline(task, config, registry, templates);
}

double initial_score_stdev(const RankingTask& task) {
  if (task.size() == 0) throw MissingScores("query " + task.query_id() + " has no passages");
  double sum = 0.0;
  for (const auto& p : task.passages()) {
    if (!p.initial_score) {
      throw MissingScores("query " + task.query_id() + ": passage " + p.id +
                          " has no initial score");
    }
    sum += *p.initial_score;
  }
  const double mean = sum / static_cast<double>(task.size());
  double sq = 0.0;
  for (const auto& p : task.passages()) sq += (*p.initial_score - mean) * (*p.initial_score - mean);
  return std::sqrt(sq / static_cast<double>(task.size()));
}

}  // namespace ecorank
