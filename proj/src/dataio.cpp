#include "ecorank/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ecorank/errors.hpp"
#include "ecorank/hashing.hpp"

namespace ecorank {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string id_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ParseError("id must be a string or integer");
}

std::vector<std::string> fields(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string f; ss >> f;) out.push_back(std::move(f));
  return out;
}

}  // namespace

std::vector<RankingTask> parse_jsonl(std::istream& in) {
  std::vector<RankingTask> tasks;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      auto doc = nlohmann::json::parse(line);
      if (!doc.is_object()) throw ParseError("expected a JSON object");
      for (const char* key : {"query_id", "query", "passages"}) {
        if (!doc.contains(key)) throw ParseError(std::string("missing \"") + key + "\"");
      }
      std::string qid = id_string(doc["query_id"]);
      if (!seen.insert(qid).second) throw DuplicateQueryId("duplicate query_id " + qid, lineno);
      std::vector<Passage> passages;
      for (const auto& p : doc["passages"]) {
        Passage passage;
        passage.id = id_string(p.at("id"));
        passage.text = p.at("text").get<std::string>();
        if (p.contains("score") && !p["score"].is_null()) {
          passage.initial_score = p["score"].get<double>();
        }
        passages.push_back(std::move(passage));
      }
      std::set<PassageId> gold;
      if (doc.contains("gold")) {
        for (const auto& g : doc["gold"]) gold.insert(id_string(g));
      }
      tasks.push_back(RankingTask::from_ordered(std::move(qid), doc["query"].get<std::string>(),
                                                std::move(passages), std::move(gold)));
    } catch (const DuplicateQueryId&) {
      throw;
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const std::exception& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return tasks;
}

std::vector<RankingTask> load_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_jsonl(in);
}

void write_jsonl(std::ostream& out, std::span<const RankingTask> tasks) {
  for (const auto& t : tasks) {
    nlohmann::json doc;
    doc["query_id"] = t.query_id();
    doc["query"] = t.query_text();
    doc["passages"] = nlohmann::json::array();
    for (const auto& p : t.passages()) {
      nlohmann::json item = {{"id", p.id}, {"text", p.text}};
      if (p.initial_score) item["score"] = *p.initial_score;
      doc["passages"].push_back(std::move(item));
    }
    doc["gold"] = t.gold();
    out << doc.dump() << '\n';
  }
}

void save_jsonl(std::span<const RankingTask> tasks, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_jsonl(out, tasks);
}

RelevanceJudgments parse_qrels(std::istream& in) {
  RelevanceJudgments j;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto f = fields(line);
    if (f.size() != 4) throw ParseError("qrels line needs 4 columns", lineno);
    try {
      std::size_t used = 0;
      int grade = std::stoi(f[3], &used);
      if (used != f[3].size() || grade < 0) throw ParseError("bad grade");
      j[f[0]][f[2]] = grade;
    } catch (const std::exception&) {
      throw ParseError("bad grade '" + f[3] + "'", lineno);
    }
  }
  return j;
}

RelevanceJudgments load_qrels(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_qrels(in);
}

std::map<std::string, std::vector<RunEntry>> parse_run(std::istream& in) {
  std::map<std::string, std::vector<RunEntry>> run;
  std::map<std::string, std::pair<std::set<PassageId>, std::set<long long>>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto f = fields(line);
    if (f.size() != 6) throw ParseError("run line needs 6 columns", lineno);
    RunEntry e;
    e.doc_id = f[2];
    try {
      std::size_t used = 0;
      e.rank = std::stoll(f[3], &used);
      if (used != f[3].size()) throw ParseError("bad rank");
      e.score = std::stod(f[4]);
    } catch (const std::exception&) {
      throw ParseError("bad rank or score", lineno);
    }
    auto& [ids, ranks] = seen[f[0]];
    if (!ids.insert(e.doc_id).second) {
      throw ParseError("duplicate docid " + e.doc_id + " for query " + f[0], lineno);
    }
    if (!ranks.insert(e.rank).second) {
      throw ParseError("duplicate rank " + f[3] + " for query " + f[0], lineno);
    }
    run[f[0]].push_back(std::move(e));
  }
  for (auto& [_, entries] : run) {
    std::sort(entries.begin(), entries.end(),
              [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
  }
  return run;
}

std::map<std::string, std::vector<RunEntry>> load_run(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_run(in);
}

std::map<PassageId, std::string> load_corpus(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::map<PassageId, std::string> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      auto doc = nlohmann::json::parse(line);
      corpus[id_string(doc.at("id"))] = doc.at("text").get<std::string>();
    } catch (const std::exception& e) {
      throw ParseError(std::string("corpus: ") + e.what(), lineno);
    }
  }
  return corpus;
}

std::map<std::string, std::string> load_topics(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> topics;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("topics line needs a tab", lineno);
    std::string text = line.substr(tab + 1);
    if (!text.empty() && text.back() == '\r') text.pop_back();
    topics[line.substr(0, tab)] = text;
  }
  return topics;
}

std::vector<RankingTask> build_trec_tasks(
    const std::map<std::string, std::vector<RunEntry>>& run,
    const RelevanceJudgments& qrels, const std::map<PassageId, std::string>& corpus,
    int threshold, const std::map<std::string, std::string>& topics) {
  auto gold_sets = binarize_judgments(qrels, threshold);
  std::vector<RankingTask> tasks;
  for (const auto& [qid, entries] : run) {
    std::vector<Passage> passages;
    for (const auto& e : entries) {
      auto it = corpus.find(e.doc_id);
      if (it == corpus.end()) {
        throw MissingCorpusText("no text for docid " + e.doc_id + " (query " + qid + ")");
      }
      Passage p;
      p.id = e.doc_id;
      p.text = it->second;
      p.initial_score = e.score;
      passages.push_back(std::move(p));
    }
    std::set<PassageId> gold;
    if (auto g = gold_sets.find(qid); g != gold_sets.end()) {
      for (const auto& id : g->second) {
        if (corpus.contains(id) &&
            std::any_of(entries.begin(), entries.end(),
                        [&](const RunEntry& e) { return e.doc_id == id; })) {
          gold.insert(id);
        }
      }
    }
    auto topic = topics.find(qid);
    tasks.push_back(RankingTask::from_ordered(qid, topic != topics.end() ? topic->second : qid,
                                              std::move(passages), std::move(gold)));
  }
  return tasks;
}

std::vector<RankingTask> load_trec(const std::filesystem::path& run_path,
                                   const std::filesystem::path& qrels_path,
                                   const std::filesystem::path& corpus_path, int threshold,
                                   const std::optional<std::filesystem::path>& topics_path) {
  std::map<std::string, std::string> topics;
  if (topics_path) topics = load_topics(*topics_path);
  return build_trec_tasks(load_run(run_path), load_qrels(qrels_path),
                          load_corpus(corpus_path), threshold, topics);
}

void write_run(std::ostream& out, std::span<const RankedList> lists, const std::string& tag) {
  for (const auto& list : lists) {
    const auto& ids = list.ordering();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out << list.query_id() << " Q0 " << ids[i] << ' ' << (i + 1) << ' '
          << (ids.size() - i) << ' ' << tag << '\n';
    }
  }
}

void save_run(std::span<const RankedList> lists, const std::filesystem::path& path,
              const std::string& tag) {
  auto out = open_out(path);
  write_run(out, lists, tag);
}

namespace {

// Keyed uniform draw in [0,1) for one (query, purpose, index) slot.
double draw(std::uint64_t seed, std::size_t query, std::string_view purpose,
            std::uint64_t index = 0) {
  return unit_interval(KeyBuilder(seed).add(query).add(purpose).add(index).key());
}

std::size_t pick(double u, std::size_t n) {
  return std::min(static_cast<std::size_t>(u * static_cast<double>(n)), n - 1);
}

std::string word(std::uint64_t seed, std::size_t query, std::string_view kind,
                 std::uint64_t index) {
  static const char* kSyllables[] = {"ka", "ro", "mi", "tu", "se", "la", "no", "vi",
                                     "de", "po", "ga", "ni", "be", "zu", "fa", "ol"};
  std::uint64_t k = splitmix64(KeyBuilder(seed).add(query).add(kind).add(index).key());
  std::string w;
  for (int i = 0; i < 3; ++i) {
    w += kSyllables[k & 15u];
    k >>= 4;
  }
  return w;
}

std::string sentence(std::uint64_t seed, std::size_t query, std::string_view kind,
                     std::size_t tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens; ++i) {
    if (i) s += ' ';
    s += word(seed, query, kind, i);
  }
  return s;
}

std::size_t retriever_position(const SyntheticSpec& spec, std::size_t q) {
  const std::size_t n = spec.passages_per_query;
  if (n == 1 || draw(spec.seed, q, "top") < spec.top_mass) return 0;
  if (draw(spec.seed, q, "shape") >= spec.geometric_share) {
    return 1 + pick(draw(spec.seed, q, "tail"), n - 1);
  }
  // Geometric over positions 1..n-1 by inverse CDF.
  const double r = spec.geometric_ratio;
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) total += std::pow(r, static_cast<double>(i));
  double u = draw(spec.seed, q, "geo") * total;
  for (std::size_t i = 1; i < n; ++i) {
    u -= std::pow(r, static_cast<double>(i));
    if (u < 0.0) return i;
  }
  return n - 1;
}

}  // namespace

std::vector<RankingTask> generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t n = spec.passages_per_query;
  if (n == 0) throw ConfigError("synthetic corpus needs at least one passage per query");
  if (spec.passage_tokens == 0 || spec.query_tokens == 0) {
    throw ConfigError("synthetic texts need at least one token");
  }
  if (spec.gold_per_query > n) throw ConfigError("more gold passages than passages");
  if (spec.spread_min < 0.0 || spec.spread_max < spec.spread_min) {
    throw ConfigError("synthetic score spread needs 0 <= min <= max");
  }
  const int width = std::max<int>(4, static_cast<int>(std::to_string(spec.num_queries).size()));
  std::vector<RankingTask> tasks;
  tasks.reserve(spec.num_queries);
  for (std::size_t q = 0; q < spec.num_queries; ++q) {
    std::ostringstream qid;
    qid << 'q' << std::setw(width) << std::setfill('0') << q;

    std::set<std::size_t> gold_pos;
    const bool missing = draw(spec.seed, q, "missing") < spec.missing_rate;
    if (!missing && spec.gold_per_query > 0) {
      if (spec.placement == GoldPlacement::kRetriever) gold_pos.insert(retriever_position(spec, q));
      for (std::uint64_t i = 0; gold_pos.size() < spec.gold_per_query; ++i) {
        gold_pos.insert(pick(draw(spec.seed, q, "gold", i), n));
      }
    }

    const double spread = spec.spread_min +
                          (spec.spread_max - spec.spread_min) * draw(spec.seed, q, "spread");
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      double frac = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      scores[i] = spec.score_top - spread * frac + 0.01 * draw(spec.seed, q, "jitter", i);
    }
    std::sort(scores.begin(), scores.end(), std::greater<>());

    std::vector<Passage> passages;
    std::set<PassageId> gold;
    for (std::size_t i = 0; i < n; ++i) {
      Passage p;
      p.id = qid.str() + "-p" + std::to_string(i);
      p.text = sentence(spec.seed, q, "passage" + std::to_string(i), spec.passage_tokens);
      p.initial_score = std::round(scores[i] * 1e4) / 1e4;
      if (gold_pos.contains(i)) gold.insert(p.id);
      passages.push_back(std::move(p));
    }
    tasks.push_back(RankingTask::from_ordered(qid.str(),
                                              sentence(spec.seed, q, "query", spec.query_tokens),
                                              std::move(passages), std::move(gold)));
  }
  return tasks;
}

}  // namespace ecorank
