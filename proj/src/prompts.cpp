#include "ecorank/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ecorank/errors.hpp"
#include "ecorank/textproc.hpp"

namespace ecorank {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kBinary:
      return "binary";
    case Strategy::kLikert:
      return "likert";
    case Strategy::kBUpr:
      return "b_upr";
    case Strategy::kBPrp:
      return "b_prp";
    case Strategy::kListwise:
      return "listwise";
  }
  return "binary";
}

Strategy strategy_from_string(std::string_view name) {
  for (Strategy s : {Strategy::kBinary, Strategy::kLikert, Strategy::kBUpr,
                     Strategy::kBPrp, Strategy::kListwise}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t = {
      "v1",
      "Passage: {passage}\nQuery: {query}\n"
      "Is the passage relevant to the query? Answer only Yes or No.",
      "Passage: {passage}\nQuery: {query}\n"
      "How related is the passage to the query? "
      "Answer with one word: Very, Somewhat or Unrelated.",
      "Passage: {passage}\nWrite a question that this passage answers.",
      "Query: {query}\nPassage A: {passage_a}\nPassage B: {passage_b}\n"
      "Which passage is more relevant to the query? Answer A or B.",
      "Rank the {count} passages below by relevance to the query.\n"
      "Query: {query}\n{window}\n"
      "Answer only with identifiers in descending order of relevance, "
      "for example [2] > [1].",
      "[{index}] {passage}\n",
  };
  return t;
}

PromptTemplates PromptTemplates::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("templates file must be a JSON object");
  PromptTemplates t = defaults();
  auto take = [&](const char* key, std::string& field) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_string()) {
      throw ConfigError(std::string("template '") + key + "' must be a string");
    }
    field = doc[key].get<std::string>();
  };
  take("version", t.version);
  take("binary", t.binary);
  take("likert", t.likert);
  take("b_upr", t.querygen);
  take("querygen", t.querygen);
  take("b_prp", t.pairwise);
  take("pairwise", t.pairwise);
  take("listwise", t.listwise);
  take("window_item", t.window_item);
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open templates file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("templates file " + path.string() + ": " + e.what());
  }
}

nlohmann::json PromptTemplates::to_json() const {
  return {{"version", version},   {"binary", binary},     {"likert", likert},
          {"querygen", querygen}, {"pairwise", pairwise}, {"listwise", listwise},
          {"window_item", window_item}};
}

const std::string& PromptTemplates::for_strategy(Strategy s) const {
  switch (s) {
    case Strategy::kBinary:
      return binary;
    case Strategy::kLikert:
      return likert;
    case Strategy::kBUpr:
      return querygen;
    case Strategy::kBPrp:
      return pairwise;
    case Strategy::kListwise:
      return listwise;
  }
  return binary;
}

std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::int64_t template_overhead(const PromptTemplates& templates, Strategy s) {
  static const std::map<std::string, std::string> blanks = {
      {"query", ""},     {"passage", ""}, {"passage_a", ""},
      {"passage_b", ""}, {"window", ""},  {"count", ""}};
  return count_tokens(fill_template(templates.for_strategy(s), blanks));
}

namespace {

PromptRecord make_record(Strategy s, const RankingTask& task, std::string text,
                         std::vector<PassageId> ids, std::int64_t cap) {
  PromptRecord r;
  r.strategy = s;
  r.text = std::move(text);
  r.query_id = task.query_id();
  r.query_text = task.query_text();
  r.passage_ids = std::move(ids);
  r.max_output_tokens = cap;
  return r;
}

}  // namespace

PromptRecord render_binary(const PromptTemplates& t, const RankingTask& task,
                           const Passage& passage) {
  return make_record(
      Strategy::kBinary, task,
      fill_template(t.binary, {{"query", task.query_text()}, {"passage", passage.text}}),
      {passage.id}, kBinaryOutputCap);
}

PromptRecord render_likert(const PromptTemplates& t, const RankingTask& task,
                           const Passage& passage) {
  return make_record(
      Strategy::kLikert, task,
      fill_template(t.likert, {{"query", task.query_text()}, {"passage", passage.text}}),
      {passage.id}, kLikertOutputCap);
}

PromptRecord render_querygen(const PromptTemplates& t, const RankingTask& task,
                             const Passage& passage) {
  return make_record(Strategy::kBUpr, task,
                     fill_template(t.querygen, {{"passage", passage.text}}),
                     {passage.id}, kQueryGenOutputCap);
}

PromptRecord render_pairwise(const PromptTemplates& t, const RankingTask& task,
                             const Passage& a, const Passage& b) {
  return make_record(Strategy::kBPrp, task,
                     fill_template(t.pairwise, {{"query", task.query_text()},
                                                {"passage_a", a.text},
                                                {"passage_b", b.text}}),
                     {a.id, b.id}, kPairwiseOutputCap);
}

PromptRecord render_listwise(const PromptTemplates& t, const RankingTask& task,
                             std::span<const Passage* const> window) {
  std::string items;
  std::vector<PassageId> ids;
  for (std::size_t i = 0; i < window.size(); ++i) {
    items += fill_template(t.window_item, {{"index", std::to_string(i + 1)},
                                           {"passage", window[i]->text}});
    ids.push_back(window[i]->id);
  }
  auto w = static_cast<std::int64_t>(window.size());
  return make_record(Strategy::kListwise, task,
                     fill_template(t.listwise, {{"query", task.query_text()},
                                                {"window", items},
                                                {"count", std::to_string(w)}}),
                     std::move(ids), kListwiseTokensPerPassage * w);
}

namespace {

// Maximal runs of ASCII letters, lowercased.
std::vector<std::string> alpha_words(std::string_view s) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace

BinaryAnswer parse_binary(std::string_view output) {
  auto words = alpha_words(output);
  if (words.empty()) return BinaryAnswer::kUnparseable;
  if (words[0] == "yes") return BinaryAnswer::kYes;
  if (words[0] == "no") return BinaryAnswer::kNo;
  return BinaryAnswer::kUnparseable;
}

LikertAnswer parse_likert(std::string_view output) {
  auto words = alpha_words(output);
  if (words.empty()) return LikertAnswer::kUnparseable;
  auto qualified = [&](LikertAnswer a) {
    // "very" / "somewhat" may stand alone or be followed by "related".
    if (words.size() > 1 && words[1] != "related") return LikertAnswer::kUnparseable;
    return a;
  };
  if (words[0] == "very") return qualified(LikertAnswer::kVeryRelated);
  if (words[0] == "somewhat") return qualified(LikertAnswer::kSomewhatRelated);
  if (words[0] == "unrelated") return LikertAnswer::kUnrelated;
  return LikertAnswer::kUnparseable;
}

PairwiseAnswer parse_pairwise(std::string_view output) {
  auto words = alpha_words(output);
  std::size_t i = 0;
  if (i < words.size() && words[i] == "passage") ++i;
  if (i >= words.size()) return PairwiseAnswer::kUnparseable;
  if (words[i] == "a") return PairwiseAnswer::kA;
  if (words[i] == "b") return PairwiseAnswer::kB;
  return PairwiseAnswer::kUnparseable;
}

std::optional<std::vector<int>> parse_listwise(std::string_view output,
                                               std::size_t window_size) {
  std::vector<int> ids;
  std::size_t i = 0;
  while ((i = output.find('[', i)) != std::string_view::npos) {
    std::size_t j = i + 1;
    while (j < output.size() && std::isdigit(static_cast<unsigned char>(output[j]))) ++j;
    if (j > i + 1 && j < output.size() && output[j] == ']' && j - i - 1 <= 6) {
      ids.push_back(std::stoi(std::string(output.substr(i + 1, j - i - 1))));
      i = j + 1;
    } else {
      i = i + 1;
    }
  }
  if (ids.size() != window_size) return std::nullopt;
  std::set<int> seen;
  for (int id : ids) {
    if (id < 1 || static_cast<std::size_t>(id) > window_size) return std::nullopt;
    if (!seen.insert(id).second) return std::nullopt;
  }
  return ids;
}

std::string canonical_answer(BinaryAnswer a) {
  switch (a) {
    case BinaryAnswer::kYes:
      return "Yes";
    case BinaryAnswer::kNo:
      return "No";
    case BinaryAnswer::kUnparseable:
      break;
  }
  return "";
}

std::string canonical_answer(LikertAnswer a) {
  switch (a) {
    case LikertAnswer::kVeryRelated:
      return "Very";
    case LikertAnswer::kSomewhatRelated:
      return "Somewhat";
    case LikertAnswer::kUnrelated:
      return "Unrelated";
    case LikertAnswer::kUnparseable:
      break;
  }
  return "";
}

std::string canonical_answer(PairwiseAnswer a) {
  switch (a) {
    case PairwiseAnswer::kA:
      return "A";
    case PairwiseAnswer::kB:
      return "B";
    case PairwiseAnswer::kUnparseable:
      break;
  }
  return "";
}

std::string canonical_answer(std::span<const int> permutation) {
  std::string out;
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    if (i) out += " > ";
    out += "[" + std::to_string(permutation[i]) + "]";
  }
  return out;
}

}  // namespace ecorank
