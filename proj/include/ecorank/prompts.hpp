#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ecorank/core.hpp"

namespace ecorank {

enum class Strategy { kBinary, kLikert, kBUpr, kBPrp, kListwise };

const char* to_string(Strategy s);
/// Accepts "binary", "likert", "b_upr", "b_prp", "listwise".
Strategy strategy_from_string(std::string_view name);

/// One rendered prompt together with what the strategy needs to interpret
/// the answer. Simulated backends read the structured fields; real backends
/// only see `text`.
struct PromptRecord {
  Strategy strategy = Strategy::kBinary;
  std::string text;
  std::string query_id;
  std::string query_text;
  /// Passages embedded in `text`, in presentation order. For pairwise
  /// prompts this is {A, B}; for listwise, identifier [i] is element i-1.
  std::vector<PassageId> passage_ids;
  std::int64_t max_output_tokens = 1;
};

/// Output caps per call.
inline constexpr std::int64_t kBinaryOutputCap = 1;
inline constexpr std::int64_t kLikertOutputCap = 1;
inline constexpr std::int64_t kPairwiseOutputCap = 1;
inline constexpr std::int64_t kQueryGenOutputCap = 32;
inline constexpr std::int64_t kListwiseTokensPerPassage = 4;

/// Template strings with {query}, {passage}, {passage_a}, {passage_b},
/// {window} and {count} placeholders. `window_item` renders one listwise
/// entry using {index} and {passage}.
struct PromptTemplates {
  std::string version;
  std::string binary;
  std::string likert;
  std::string querygen;
  std::string pairwise;
  std::string listwise;
  std::string window_item;

  static const PromptTemplates& defaults();
  /// Starts from defaults and overrides whichever keys the document sets.
  static PromptTemplates from_json(const nlohmann::json& doc);
  static PromptTemplates load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::string& for_strategy(Strategy s) const;
};

/// Substitutes {name} placeholders in one left-to-right pass; substituted
/// text is never rescanned and unknown placeholders are kept verbatim.
std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values);

/// Tokens contributed by the fixed wording of a strategy's template, i.e.
/// the rendered prompt length minus the lengths of the substituted fields.
std::int64_t template_overhead(const PromptTemplates& templates, Strategy s);

PromptRecord render_binary(const PromptTemplates& t, const RankingTask& task,
                           const Passage& passage);
PromptRecord render_likert(const PromptTemplates& t, const RankingTask& task,
                           const Passage& passage);
PromptRecord render_querygen(const PromptTemplates& t, const RankingTask& task,
                             const Passage& passage);
PromptRecord render_pairwise(const PromptTemplates& t, const RankingTask& task,
                             const Passage& a, const Passage& b);
PromptRecord render_listwise(const PromptTemplates& t, const RankingTask& task,
                             std::span<const Passage* const> window);

enum class BinaryAnswer { kYes, kNo, kUnparseable };
enum class LikertAnswer { kVeryRelated, kSomewhatRelated, kUnrelated, kUnparseable };
enum class PairwiseAnswer { kA, kB, kUnparseable };

BinaryAnswer parse_binary(std::string_view output);
LikertAnswer parse_likert(std::string_view output);
PairwiseAnswer parse_pairwise(std::string_view output);
/// Bracketed identifiers in output order, each of 1..window_size exactly
/// once; std::nullopt otherwise.
std::optional<std::vector<int>> parse_listwise(std::string_view output,
                                               std::size_t window_size);

/// Shortest answers a well-behaved model would give; each fits its cap.
std::string canonical_answer(BinaryAnswer a);
std::string canonical_answer(LikertAnswer a);
std::string canonical_answer(PairwiseAnswer a);
std::string canonical_answer(std::span<const int> permutation);

}  // namespace ecorank
