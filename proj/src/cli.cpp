#include "ecorank/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ecorank/errors.hpp"

namespace ecorank {

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// An inline object, or a string naming a JSON file relative to base_dir.
nlohmann::json inline_or_file(const nlohmann::json& v, const std::filesystem::path& base_dir) {
  if (!v.is_string()) return v;
  std::filesystem::path p = v.get<std::string>();
  if (p.is_relative()) p = base_dir / p;
  return read_json(p);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  c.base_dir = base_dir;
  if (!doc.contains("pipeline")) throw ConfigError("run config needs \"pipeline\"");
  c.pipeline = PipelineConfig::from_json(inline_or_file(doc["pipeline"], base_dir));
  if (doc.contains("backends")) c.backends = inline_or_file(doc["backends"], base_dir);
  if (doc.contains("templates")) {
    c.templates = PromptTemplates::from_json(inline_or_file(doc["templates"], base_dir));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_json(read_json(path), path.parent_path());
}

Dataset load_dataset(const DataSource& source) {
  Dataset d;
  if (source.format == "jsonl") {
    d.tasks = load_jsonl(source.path);
    d.judgments = judgments_from_gold(d.tasks);
  } else if (source.format == "trec") {
    if (!source.qrels || !source.corpus) {
      throw ConfigError("trec format needs --qrels and --corpus");
    }
    d.judgments = load_qrels(*source.qrels);
    std::map<std::string, std::string> topics;
    if (source.topics) topics = load_topics(*source.topics);
    d.tasks = build_trec_tasks(load_run(source.path), d.judgments, load_corpus(*source.corpus),
                               source.threshold, topics);
    d.relevant_grade = source.threshold;
  } else {
    throw ConfigError("unknown data format '" + source.format + "'");
  }
  return d;
}

BackendRegistry build_registry(const nlohmann::json& backends, const Dataset& data,
                               std::uint64_t seed, const std::filesystem::path& base_dir) {
  nlohmann::json doc = backends;
  if (!doc.is_object()) throw ConfigError("backends must be a JSON object");
  for (auto& [_, entry] : doc.items()) {
    if (entry.is_object() && !entry.contains("relevant_grade")) {
      entry["relevant_grade"] = data.relevant_grade;
    }
  }
  return BackendRegistry::from_json(doc, data.judgments, seed, base_dir);
}

std::vector<QueryOutcome> rerank_all(std::span<const RankingTask> tasks,
                                     const PipelineConfig& pipeline,
                                     const BackendRegistry& registry,
                                     const PromptTemplates& templates, std::size_t jobs) {
  pipeline.validate(&registry);
  std::vector<QueryOutcome> out(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      try {
        PipelineResult r = run_pipeline(tasks[i], pipeline, registry, templates);
        QueryOutcome& o = out[i];
        o.ranked = std::move(r.ranked);
        o.budget = r.ledger.budget();
        o.spent = r.ledger.spent();
        o.stage_spend = std::move(r.stage_spend);
        o.calls = r.ledger.records().size();
        o.overrun = r.ledger.overrun();
        o.routed_to = std::move(r.routed_to);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(tasks.size(), 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  std::stable_sort(out.begin(), out.end(), [](const QueryOutcome& a, const QueryOutcome& b) {
    return a.ranked.query_id() < b.ranked.query_id();
  });
  return out;
}

nlohmann::json spend_report(std::span<const QueryOutcome> outcomes) {
  nlohmann::json doc;
  doc["queries"] = nlohmann::json::array();
  double total = 0.0, max = 0.0, budget = 0.0;
  bool overrun = false;
  for (const auto& o : outcomes) {
    nlohmann::json q = {{"query_id", o.ranked.query_id()},
                        {"budget", o.budget},
                        {"spent", o.spent},
                        {"stage_spend", o.stage_spend},
                        {"calls", o.calls}};
    if (o.routed_to) q["routed_to"] = *o.routed_to;
    if (o.overrun) q["overrun"] = true;
    doc["queries"].push_back(std::move(q));
    total += o.spent;
    max = std::max(max, o.spent);
    budget = std::max(budget, o.budget);
    overrun = overrun || o.overrun;
  }
  doc["budget"] = budget;
  doc["total_spent"] = total;
  doc["mean_spent"] = outcomes.empty() ? 0.0 : total / static_cast<double>(outcomes.size());
  doc["max_spent"] = max;
  doc["overrun"] = overrun;
  return doc;
}

std::map<std::string, std::set<PassageId>> gold_of(std::span<const RankingTask> tasks) {
  std::map<std::string, std::set<PassageId>> gold;
  for (const auto& t : tasks) gold[t.query_id()] = t.gold();
  return gold;
}

namespace {

const std::set<PassageId>& gold_for(const std::map<std::string, std::set<PassageId>>& gold,
                                    const std::string& qid) {
  static const std::set<PassageId> kNone;
  auto it = gold.find(qid);
  return it == gold.end() ? kNone : it->second;
}

}  // namespace

EvalReport evaluate_lists(std::span<const RankedList> lists,
                          const std::map<std::string, std::set<PassageId>>& gold,
                          std::span<const std::size_t> ks) {
  std::vector<QueryEval> per_query;
  for (const auto& l : lists) {
    per_query.push_back(evaluate_query(l.query_id(), l.ordering(), gold_for(gold, l.query_id()), ks));
  }
  return aggregate(std::move(per_query));
}

EvalReport evaluate_outcomes(std::span<const QueryOutcome> outcomes,
                             const std::map<std::string, std::set<PassageId>>& gold,
                             std::span<const std::size_t> ks) {
  std::vector<QueryEval> per_query;
  for (const auto& o : outcomes) {
    per_query.push_back(evaluate_query(o.ranked.query_id(), o.ranked.ordering(),
                                       gold_for(gold, o.ranked.query_id()), ks, o.spent));
  }
  return aggregate(std::move(per_query));
}

std::vector<RankedList> rankings_from_run(
    const std::map<std::string, std::vector<RunEntry>>& run) {
  std::vector<RankedList> lists;
  for (const auto& [qid, entries] : run) {
    std::vector<Passage> passages;
    for (const auto& e : entries) passages.push_back({e.doc_id, e.doc_id, 0, e.score});
    auto task = RankingTask::from_ordered(qid, qid, std::move(passages));
    lists.push_back(RankedList::identity(task));
  }
  return lists;
}

const char* to_string(LlmOrder o) {
  return o == LlmOrder::kExpensiveFirst ? "expensive_first" : "cheap_first";
}

std::vector<std::pair<double, double>> SweepSpec::default_splits() {
  return {{1.0, 0.0}, {0.2, 0.8}, {0.3, 0.7}, {0.4, 0.6}, {0.5, 0.5},
          {0.6, 0.4}, {0.7, 0.3}, {0.8, 0.2}, {0.0, 1.0}};
}

SweepSpec SweepSpec::from_json(const nlohmann::json& doc) {
  SweepSpec s;
  try {
    s.expensive = doc.at("expensive").get<std::string>();
    s.cheap = doc.at("cheap").get<std::string>();
    s.total_budget = doc.value("total_budget", 0.0);
    if (doc.contains("splits")) {
      s.splits.clear();
      for (const auto& p : doc["splits"]) {
        s.splits.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      }
    }
    if (doc.contains("orders")) {
      s.orders.clear();
      for (const auto& o : doc["orders"]) {
        auto name = o.get<std::string>();
        if (name == "expensive_first") {
          s.orders.push_back(LlmOrder::kExpensiveFirst);
        } else if (name == "cheap_first") {
          s.orders.push_back(LlmOrder::kCheapFirst);
        } else {
          throw ConfigError("unknown llm order '" + name + "'");
        }
      }
    }
    if (doc.contains("seeds")) s.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("k") && !doc["k"].is_null() && !doc["k"].is_string()) {
      s.pairwise_k = doc["k"].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep config: ") + e.what());
  }
  for (const auto& [x, y] : s.splits) BudgetSplit({x, y});
  return s;
}

std::vector<SweepRow> run_sweep(const Dataset& data, const nlohmann::json& backends,
                                const SweepSpec& spec, const PromptTemplates& templates,
                                std::size_t jobs, const std::filesystem::path& base_dir) {
  const auto gold = gold_of(data.tasks);
  std::map<std::uint64_t, BackendRegistry> registries;
  for (auto seed : spec.seeds) registries.emplace(seed, build_registry(backends, data, seed, base_dir));
  std::vector<SweepRow> rows;
  for (const auto& [x, y] : spec.splits) {
    for (auto order : spec.orders) {
      const bool exp_first = order == LlmOrder::kExpensiveFirst;
      auto config = ecorank_config(exp_first ? spec.expensive : spec.cheap,
                                   exp_first ? spec.cheap : spec.expensive,
                                   spec.total_budget, x, y);
      config.stages[1].pairwise.k = spec.pairwise_k;
      for (auto seed : spec.seeds) {
        auto outcomes = rerank_all(data.tasks, config, registries.at(seed), templates, jobs);
        rows.push_back({x, y, order, seed, evaluate_outcomes(outcomes, gold)});
      }
    }
  }
  return rows;
}

std::vector<SweepSummary> summarize_sweep(std::span<const SweepRow> rows) {
  std::vector<SweepSummary> out;
  std::vector<std::vector<double>> mrrs;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SweepSummary& s) {
      return s.x == r.x && s.y == r.y && s.order == r.order;
    });
    if (it == out.end()) {
      out.push_back({r.x, r.y, r.order});
      mrrs.emplace_back();
      it = out.end() - 1;
    }
    auto& s = *it;
    s.seeds += 1;
    s.mrr += r.report.mrr;
    s.r1 += r.report.recall_at.count(1) ? r.report.recall_at.at(1) : 0.0;
    s.r10 += r.report.recall_at.count(10) ? r.report.recall_at.at(10) : 0.0;
    mrrs[static_cast<std::size_t>(it - out.begin())].push_back(r.report.mrr);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    const double n = static_cast<double>(s.seeds);
    s.mrr /= n;
    s.r1 /= n;
    s.r10 /= n;
    if (s.seeds > 1) {
      double sq = 0.0;
      for (double v : mrrs[i]) sq += (v - s.mrr) * (v - s.mrr);
      s.mrr_stderr = std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
    }
  }
  return out;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "split_x,split_y,order,seed,mrr,r1,r10,mean_spend\n";
  for (const auto& r : rows) {
    auto recall = [&](std::size_t k) {
      auto it = r.report.recall_at.find(k);
      return it == r.report.recall_at.end() ? 0.0 : it->second;
    };
    out << fmt(r.x, 2) << ',' << fmt(r.y, 2) << ',' << to_string(r.order) << ',' << r.seed << ','
        << fmt(r.report.mrr) << ',' << fmt(recall(1)) << ',' << fmt(recall(10)) << ','
        << fmt(r.report.mean_spend, 3) << '\n';
  }
  return out.str();
}

std::string sweep_summary_csv(std::span<const SweepSummary> rows) {
  std::ostringstream out;
  out << "split_x,split_y,order,seeds,mrr,mrr_stderr,r1,r10\n";
  for (const auto& s : rows) {
    out << fmt(s.x, 2) << ',' << fmt(s.y, 2) << ',' << to_string(s.order) << ',' << s.seeds << ','
        << fmt(s.mrr) << ',' << fmt(s.mrr_stderr) << ',' << fmt(s.r1) << ',' << fmt(s.r10) << '\n';
  }
  return out.str();
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc) {
  SyntheticSpec s;
  try {
    s.num_queries = doc.value("num_queries", s.num_queries);
    s.passages_per_query = doc.value("passages_per_query", s.passages_per_query);
    s.passage_tokens = doc.value("passage_tokens", s.passage_tokens);
    s.query_tokens = doc.value("query_tokens", s.query_tokens);
    s.gold_per_query = doc.value("gold_per_query", s.gold_per_query);
    auto placement = doc.value("placement", std::string("uniform"));
    if (placement == "uniform") {
      s.placement = GoldPlacement::kUniform;
    } else if (placement == "retriever") {
      s.placement = GoldPlacement::kRetriever;
    } else {
      throw ConfigError("unknown placement '" + placement + "'");
    }
    s.missing_rate = doc.value("missing_rate", s.missing_rate);
    s.top_mass = doc.value("top_mass", s.top_mass);
    s.geometric_share = doc.value("geometric_share", s.geometric_share);
    s.geometric_ratio = doc.value("geometric_ratio", s.geometric_ratio);
    s.score_top = doc.value("score_top", s.score_top);
    s.spread_min = doc.value("spread_min", s.spread_min);
    s.spread_max = doc.value("spread_max", s.spread_max);
    s.seed = doc.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

namespace {

struct CommonArgs {
  std::string config;
  std::string data;
  std::string format = "jsonl";
  std::string qrels;
  std::string corpus;
  std::string topics;
  int threshold = 3;
  std::optional<double> budget;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out;
};

void add_data_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--data", a.data, "Tasks JSONL, or the TREC run file with --format trec")
      ->required();
  cmd->add_option("--format", a.format, "jsonl or trec")
      ->check(CLI::IsMember({"jsonl", "trec"}));
  cmd->add_option("--qrels", a.qrels, "TREC qrels (trec format)");
  cmd->add_option("--corpus", a.corpus, "id/text JSONL corpus (trec format)");
  cmd->add_option("--topics", a.topics, "qid<TAB>query file (trec format)");
  cmd->add_option("--threshold", a.threshold, "Minimum qrels grade counted as relevant");
}

void add_run_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--budget", a.budget, "Per-query budget, overriding the config");
  cmd->add_option("--seed", a.seed, "Seed for simulated backends");
  cmd->add_option("--jobs", a.jobs, "Queries processed in parallel")->check(CLI::PositiveNumber);
}

DataSource source_of(const CommonArgs& a) {
  DataSource s;
  s.path = a.data;
  s.format = a.format;
  if (!a.qrels.empty()) s.qrels = a.qrels;
  if (!a.corpus.empty()) s.corpus = a.corpus;
  if (!a.topics.empty()) s.topics = a.topics;
  s.threshold = a.threshold;
  return s;
}

std::vector<RankedList> lists_of(std::span<const QueryOutcome> outcomes) {
  std::vector<RankedList> lists;
  for (const auto& o : outcomes) lists.push_back(o.ranked);
  return lists;
}

std::vector<std::size_t> cutoffs_with_default(std::vector<std::size_t> ks) {
  if (ks.empty()) ks = default_cutoffs();
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

int cmd_rerank(const CommonArgs& a, const std::string& ledger_path, const std::string& tag) {
  RunConfig rc = RunConfig::load(a.config);
  if (a.budget) rc.pipeline.total_budget = *a.budget;
  Dataset data = load_dataset(source_of(a));
  auto registry = build_registry(rc.backends, data, a.seed, rc.base_dir);
  auto outcomes = rerank_all(data.tasks, rc.pipeline, registry, rc.templates, a.jobs);
  save_run(lists_of(outcomes), a.out, tag);
  if (!ledger_path.empty()) write_text(ledger_path, spend_report(outcomes).dump(2) + "\n");
  auto report = evaluate_outcomes(outcomes, gold_of(data.tasks));
  std::cout << format_table({{"rerank", report}});
  return 0;
}

int cmd_evaluate(const CommonArgs& a, const std::string& run_path, std::vector<std::size_t> ks) {
  auto lists = rankings_from_run(load_run(run_path));
  std::map<std::string, std::set<PassageId>> gold;
  if (!a.qrels.empty()) {
    gold = binarize_judgments(load_qrels(a.qrels), a.threshold);
  } else if (!a.data.empty()) {
    gold = gold_of(load_jsonl(a.data));
  } else {
    throw ConfigError("evaluate needs --data (tasks JSONL) or --qrels");
  }
  ks = cutoffs_with_default(std::move(ks));
  auto report = evaluate_lists(lists, gold, ks);
  std::cout << format_table({{std::filesystem::path(run_path).filename().string(), report}});
  if (!a.out.empty()) write_text(a.out, report.to_json().dump(2) + "\n");
  return 0;
}

int cmd_sweep(const CommonArgs& a, const std::string& summary_path,
              const std::vector<std::uint64_t>& seeds) {
  auto doc = read_json(a.config);
  const auto base = std::filesystem::path(a.config).parent_path();
  if (!doc.contains("sweep")) throw ConfigError("sweep config needs \"sweep\"");
  SweepSpec spec = SweepSpec::from_json(doc["sweep"]);
  if (a.budget) spec.total_budget = *a.budget;
  if (!seeds.empty()) spec.seeds = seeds;
  nlohmann::json backends = doc.contains("backends") ? inline_or_file(doc["backends"], base)
                                                     : nlohmann::json::object();
  PromptTemplates templates = doc.contains("templates")
                                  ? PromptTemplates::from_json(inline_or_file(doc["templates"], base))
                                  : PromptTemplates::defaults();
  Dataset data = load_dataset(source_of(a));
  auto rows = run_sweep(data, backends, spec, templates, a.jobs, base);
  write_text(a.out, sweep_csv(rows));
  auto summary = summarize_sweep(rows);
  if (!summary_path.empty()) write_text(summary_path, sweep_summary_csv(summary));
  std::cout << sweep_summary_csv(summary);
  return 0;
}

int cmd_simulate(const CommonArgs& a) {
  auto doc = read_json(a.config);
  const auto base = std::filesystem::path(a.config).parent_path();
  SyntheticSpec spec = synthetic_spec_from_json(doc.value("synthetic", nlohmann::json::object()));
  spec.seed = KeyBuilder(spec.seed).add(a.seed).key();
  RunConfig rc = RunConfig::from_json(doc, base);
  if (a.budget) rc.pipeline.total_budget = *a.budget;

  Dataset data;
  data.tasks = generate_synthetic(spec);
  data.judgments = judgments_from_gold(data.tasks);
  auto registry = build_registry(rc.backends, data, a.seed, base);
  auto outcomes = rerank_all(data.tasks, rc.pipeline, registry, rc.templates, a.jobs);
  auto report = evaluate_outcomes(outcomes, gold_of(data.tasks));

  std::filesystem::path dir = a.out;
  std::filesystem::create_directories(dir);
  save_jsonl(data.tasks, dir / "tasks.jsonl");
  save_run(lists_of(outcomes), dir / "run.txt");
  write_text(dir / "spend.json", spend_report(outcomes).dump(2) + "\n");
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");

  std::vector<RankedList> initial;
  for (const auto& t : data.tasks) initial.push_back(RankedList::identity(t));
  std::cout << format_table({{"initial", evaluate_lists(initial, gold_of(data.tasks))},
                             {"pipeline", report}});
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Budget-constrained passage re-ranking"};
  app.require_subcommand(1);

  CommonArgs rerank_args;
  std::string ledger_path, tag = "ecorank";
  auto* rerank = app.add_subcommand("rerank", "Re-rank a dataset under a per-query budget");
  rerank->add_option("--config", rerank_args.config, "Run config JSON")->required();
  add_data_flags(rerank, rerank_args);
  add_run_flags(rerank, rerank_args);
  rerank->add_option("--out", rerank_args.out, "Output TREC run file")->required();
  rerank->add_option("--ledger", ledger_path, "Per-query spend report (JSON)");
  rerank->add_option("--tag", tag, "Run tag column");

  CommonArgs eval_args;
  std::string run_path;
  std::vector<std::size_t> ks;
  auto* evaluate = app.add_subcommand("evaluate", "Score a run file");
  evaluate->add_option("--run", run_path, "TREC run file")->required();
  evaluate->add_option("--data", eval_args.data, "Tasks JSONL holding gold sets");
  evaluate->add_option("--qrels", eval_args.qrels, "TREC qrels");
  evaluate->add_option("--threshold", eval_args.threshold, "Minimum relevant grade");
  evaluate->add_option("--k", ks, "Recall cutoffs (default 1 10)");
  evaluate->add_option("--out", eval_args.out, "Report JSON");

  CommonArgs sweep_args;
  std::string summary_path;
  std::vector<std::uint64_t> seeds;
  auto* sweep = app.add_subcommand("sweep", "Budget split and LLM order grid");
  sweep->add_option("--config", sweep_args.config, "Sweep config JSON")->required();
  add_data_flags(sweep, sweep_args);
  add_run_flags(sweep, sweep_args);
  sweep->add_option("--seeds", seeds, "Seeds, overriding the config");
  sweep->add_option("--out", sweep_args.out, "Per-seed CSV")->required();
  sweep->add_option("--summary", summary_path, "Mean-over-seeds CSV");

  CommonArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corpus and run on it");
  simulate->add_option("--config", sim_args.config, "Scenario JSON")->required();
  add_run_flags(simulate, sim_args);
  simulate->add_option("--out", sim_args.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*rerank) return cmd_rerank(rerank_args, ledger_path, tag);
    if (*evaluate) return cmd_evaluate(eval_args, run_path, ks);
    if (*sweep) return cmd_sweep(sweep_args, summary_path, seeds);
    if (*simulate) return cmd_simulate(sim_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ecorank
