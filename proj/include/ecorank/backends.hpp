#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <condition_variable>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecorank/budget.hpp"
#include "ecorank/core.hpp"
#include "ecorank/hashing.hpp"
#include "ecorank/prompts.hpp"

namespace ecorank {

struct Completion {
  std::string output;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
};

/// An LLM API: prompt in, text plus token usage out. Implementations must be
/// safe to call from several threads at once.
class Backend {
 public:
  Backend(std::string name, Pricing pricing);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const std::string& name() const noexcept { return name_; }
  const Pricing& pricing() const noexcept { return pricing_; }

  /// `ordinal` identifies the call within its query so simulated backends
  /// can draw keyed randomness; real backends ignore it.
  virtual Completion complete(const PromptRecord& prompt, std::uint64_t ordinal) = 0;

  /// Whether a failed call is billed at prompt cost by the provider.
  virtual bool bills_failures() const noexcept { return false; }

 private:
  std::string name_;
  Pricing pricing_;
};

/// Keeps at most `max_tokens` whitespace tokens of `text`.
std::string truncate_tokens(const std::string& text, std::int64_t max_tokens);

struct OracleConfig {
  RelevanceJudgments judgments;
  double accuracy = 1.0;
  std::uint64_t seed = 0;
  /// Grades at or above this count as relevant.
  int relevant_grade = 1;
};

/// Draw key for one simulated answer.
std::uint64_t answer_key(std::uint64_t seed, std::string_view backend,
                         std::string_view query_id,
                         std::span<const PassageId> passage_ids,
                         std::uint64_t ordinal);

/// `correct` with probability `accuracy`, otherwise a uniform draw from
/// `alternatives` (or `correct` if there are none). Identical keys give
/// identical results.
template <typename T>
T noisy_answer(double accuracy, std::uint64_t key, const T& correct,
               std::span<const T> alternatives) {
  double u = unit_interval(key);
  if (u < accuracy || alternatives.empty()) return correct;
  double v = unit_interval(key ^ 0xA5A5A5A5A5A5A5A5ULL);
  auto idx = static_cast<std::size_t>(v * static_cast<double>(alternatives.size()));
  if (idx >= alternatives.size()) idx = alternatives.size() - 1;
  return alternatives[idx];
}

/// Answers from relevance judgments, correct with probability `accuracy`.
/// With accuracy 1 the answers are exactly judgment-faithful:
///  - binary: Yes iff the passage is relevant;
///  - likert: Very if relevant, Somewhat if graded but below the relevance
///    grade, Unrelated otherwise;
///  - pairwise: the higher-graded passage, ties going to A;
///  - listwise: the window sorted by grade, ties kept in presentation order;
///  - query generation: the query itself for relevant passages and the
///    passage's opening words otherwise.
class OracleBackend : public Backend {
 public:
  OracleBackend(std::string name, Pricing pricing, OracleConfig config);

  Completion complete(const PromptRecord& prompt, std::uint64_t ordinal) override;
  const OracleConfig& config() const noexcept { return config_; }

  int grade(const std::string& query_id, const PassageId& id) const;

 private:
  std::string answer(const PromptRecord& prompt, std::uint64_t key) const;
  bool relevant(const std::string& query_id, const PassageId& id) const;

  OracleConfig config_;
};

/// Replays recorded outputs keyed by the hash of the prompt text.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend(std::string name, Pricing pricing,
                  std::map<std::string, std::string> outputs_by_hash);

  /// Fixture document: [{"prompt": text, "output": text}] or
  /// [{"hash": hex, "output": text}].
  static std::map<std::string, std::string> parse_fixture(const nlohmann::json& doc);

  Completion complete(const PromptRecord& prompt, std::uint64_t ordinal) override;

 private:
  std::map<std::string, std::string> outputs_;
};

struct HttpBackendConfig {
  std::string url;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::map<std::string, std::string> headers;
  /// Environment variable holding the API key; sent as
  /// "Authorization: Bearer <key>" when set.
  std::string api_key_env;
  /// Request body. String values are searched for {prompt}, {model} and
  /// {api_key}; a string that is exactly "{max_tokens}" becomes a number.
  nlohmann::json request_template;
  /// JSON pointers into the response.
  std::string text_pointer = "/choices/0/message/content";
  std::string prompt_tokens_pointer = "/usage/prompt_tokens";
  std::string output_tokens_pointer = "/usage/completion_tokens";
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::seconds timeout{30};
  int max_in_flight = 4;
  bool bills_failures = false;

  static HttpBackendConfig from_json(const nlohmann::json& doc);
  static nlohmann::json default_request_template();
};

/// Chat-completion style JSON over HTTP with bounded concurrency and
/// exponential-backoff retries on transport errors, 429 and 5xx.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string name, Pricing pricing, HttpBackendConfig config);

  Completion complete(const PromptRecord& prompt, std::uint64_t ordinal) override;
  bool bills_failures() const noexcept override { return config_.bills_failures; }

  nlohmann::json build_request(const PromptRecord& prompt) const;
  Completion parse_response(const PromptRecord& prompt,
                            const nlohmann::json& body) const;

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
};

/// Named backends available to a run.
class BackendRegistry {
 public:
  void add(std::shared_ptr<Backend> backend);
  bool contains(const std::string& name) const;
  /// Throws ConfigError for unknown names.
  Backend& get(const std::string& name) const;
  std::vector<std::string> names() const;

  /// Builds backends from {name: {type, pricing | c_p/c_o/c_f, ...}}.
  /// Types: "oracle", "noisy_oracle" (with "accuracy"), "scripted" (with
  /// "fixture" path or inline "outputs"), "http". `seed` is mixed into every
  /// simulated backend's own "seed".
  static BackendRegistry from_json(const nlohmann::json& doc,
                                   const RelevanceJudgments& judgments,
                                   std::uint64_t seed = 0,
                                   const std::filesystem::path& base_dir = {});

 private:
  std::map<std::string, std::shared_ptr<Backend>> backends_;
};

/// Judgments with grade 1 for every gold passage of every task.
RelevanceJudgments judgments_from_gold(std::span<const RankingTask> tasks);

}  // namespace ecorank
