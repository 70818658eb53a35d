#include "ecorank/backends.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "ecorank/errors.hpp"
#include "ecorank/textproc.hpp"

namespace ecorank {

std::string hash_hex(std::string_view text) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a(text);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

Backend::Backend(std::string name, Pricing pricing)
    : name_(std::move(name)), pricing_(std::move(pricing)) {
  pricing_.validate();
}

std::string truncate_tokens(const std::string& text, std::int64_t max_tokens) {
  if (count_tokens(text) <= max_tokens) return text;
  std::string out;
  std::int64_t n = 0;
  bool in_token = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) {
      if (n == max_tokens) break;
      ++n;
    }
    in_token = !space;
    out += c;
  }
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) {
    out.pop_back();
  }
  return out;
}

std::uint64_t answer_key(std::uint64_t seed, std::string_view backend,
                         std::string_view query_id,
                         std::span<const PassageId> passage_ids,
                         std::uint64_t ordinal) {
  KeyBuilder kb(seed);
  kb.add(backend).add(query_id).add(static_cast<std::uint64_t>(passage_ids.size()));
  for (const auto& id : passage_ids) kb.add(id);
  kb.add(ordinal);
  return kb.key();
}

// ---------------------------------------------------------------------------
// Oracle

OracleBackend::OracleBackend(std::string name, Pricing pricing, OracleConfig config)
    : Backend(std::move(name), std::move(pricing)), config_(std::move(config)) {
  if (!(config_.accuracy >= 0.0 && config_.accuracy <= 1.0)) {
    throw ConfigError("oracle accuracy must be in [0,1]");
  }
}

int OracleBackend::grade(const std::string& query_id, const PassageId& id) const {
  auto q = config_.judgments.find(query_id);
  if (q == config_.judgments.end()) return 0;
  auto p = q->second.find(id);
  return p == q->second.end() ? 0 : p->second;
}

bool OracleBackend::relevant(const std::string& query_id, const PassageId& id) const {
  return grade(query_id, id) >= config_.relevant_grade;
}

namespace {

std::string opening_words(const std::string& text, std::int64_t n) {
  return truncate_tokens(text, n);
}

}  // namespace

std::string OracleBackend::answer(const PromptRecord& prompt, std::uint64_t key) const {
  const double acc = config_.accuracy;
  const auto& qid = prompt.query_id;
  switch (prompt.strategy) {
    case Strategy::kBinary: {
      auto correct = relevant(qid, prompt.passage_ids.at(0)) ? BinaryAnswer::kYes
                                                             : BinaryAnswer::kNo;
      BinaryAnswer flipped[] = {correct == BinaryAnswer::kYes ? BinaryAnswer::kNo
                                                              : BinaryAnswer::kYes};
      return canonical_answer(
          noisy_answer<BinaryAnswer>(acc, key, correct, flipped));
    }
    case Strategy::kLikert: {
      const auto& id = prompt.passage_ids.at(0);
      LikertAnswer correct = LikertAnswer::kUnrelated;
      if (relevant(qid, id)) {
        correct = LikertAnswer::kVeryRelated;
      } else if (grade(qid, id) > 0) {
        correct = LikertAnswer::kSomewhatRelated;
      }
      std::vector<LikertAnswer> alts;
      for (auto a : {LikertAnswer::kVeryRelated, LikertAnswer::kSomewhatRelated,
                     LikertAnswer::kUnrelated}) {
        if (a != correct) alts.push_back(a);
      }
      return canonical_answer(noisy_answer<LikertAnswer>(acc, key, correct, alts));
    }
    case Strategy::kBPrp: {
      int ga = grade(qid, prompt.passage_ids.at(0));
      int gb = grade(qid, prompt.passage_ids.at(1));
      auto correct = gb > ga ? PairwiseAnswer::kB : PairwiseAnswer::kA;
      PairwiseAnswer other[] = {correct == PairwiseAnswer::kA ? PairwiseAnswer::kB
                                                              : PairwiseAnswer::kA};
      return canonical_answer(noisy_answer<PairwiseAnswer>(acc, key, correct, other));
    }
    case Strategy::kListwise: {
      const auto& ids = prompt.passage_ids;
      std::vector<int> correct(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) correct[i] = static_cast<int>(i + 1);
      std::stable_sort(correct.begin(), correct.end(), [&](int a, int b) {
        return grade(qid, ids[static_cast<std::size_t>(a - 1)]) >
               grade(qid, ids[static_cast<std::size_t>(b - 1)]);
      });
      if (unit_interval(key) < acc || ids.size() < 2) return canonical_answer(correct);
      // Uniform shuffle, keyed; nudged off the correct order if it lands there.
      std::vector<int> perm = correct;
      std::uint64_t state = key ^ 0x5DEECE66DULL;
      for (std::size_t i = perm.size() - 1; i > 0; --i) {
        state = splitmix64(state);
        auto j = static_cast<std::size_t>(unit_interval(state) * static_cast<double>(i + 1));
        std::swap(perm[i], perm[std::min(j, i)]);
      }
      if (perm == correct) std::swap(perm[0], perm[1]);
      return canonical_answer(perm);
    }
    case Strategy::kBUpr: {
      const auto& id = prompt.passage_ids.at(0);
      std::string good = prompt.query_text;
      // The passage text is not in the record; the prompt text carries it.
      std::string bad = opening_words(prompt.text, 8);
      bool rel = relevant(qid, id);
      std::string correct = rel ? good : bad;
      std::string alt[] = {rel ? bad : good};
      return noisy_answer<std::string>(acc, key, correct, alt);
    }
  }
  return {};
}

Completion OracleBackend::complete(const PromptRecord& prompt, std::uint64_t ordinal) {
  auto key = answer_key(config_.seed, name(), prompt.query_id, prompt.passage_ids,
                        ordinal);
  Completion c;
  c.output = truncate_tokens(answer(prompt, key), prompt.max_output_tokens);
  c.prompt_tokens = count_tokens(prompt.text);
  c.output_tokens = count_tokens(c.output);
  return c;
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedBackend::ScriptedBackend(std::string name, Pricing pricing,
                                 std::map<std::string, std::string> outputs_by_hash)
    : Backend(std::move(name), std::move(pricing)),
      outputs_(std::move(outputs_by_hash)) {}

std::map<std::string, std::string> ScriptedBackend::parse_fixture(
    const nlohmann::json& doc) {
  if (!doc.is_array()) throw ConfigError("scripted fixture must be a JSON array");
  std::map<std::string, std::string> out;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("output") || !entry["output"].is_string()) {
      throw ConfigError("scripted fixture entries need a string \"output\"");
    }
    std::string key;
    if (entry.contains("hash")) {
      key = entry["hash"].get<std::string>();
    } else if (entry.contains("prompt")) {
      key = hash_hex(entry["prompt"].get<std::string>());
    } else {
      throw ConfigError("scripted fixture entries need \"prompt\" or \"hash\"");
    }
    out[key] = entry["output"].get<std::string>();
  }
  return out;
}

Completion ScriptedBackend::complete(const PromptRecord& prompt, std::uint64_t) {
  auto h = hash_hex(prompt.text);
  auto it = outputs_.find(h);
  if (it == outputs_.end()) {
    throw BackendError("scripted backend " + name() + ": no output for prompt " + h);
  }
  Completion c;
  c.output = truncate_tokens(it->second, prompt.max_output_tokens);
  c.prompt_tokens = count_tokens(prompt.text);
  c.output_tokens = count_tokens(c.output);
  return c;
}

// ---------------------------------------------------------------------------
// HTTP

nlohmann::json HttpBackendConfig::default_request_template() {
  return {{"model", "{model}"},
          {"max_tokens", "{max_tokens}"},
          {"temperature", 0},
          {"messages", {{{"role", "user"}, {"content", "{prompt}"}}}}};
}

HttpBackendConfig HttpBackendConfig::from_json(const nlohmann::json& doc) {
  HttpBackendConfig c;
  try {
    c.url = doc.at("url").get<std::string>();
    c.model = doc.value("model", std::string());
    if (doc.contains("headers")) {
      c.headers = doc["headers"].get<std::map<std::string, std::string>>();
    }
    c.api_key_env = doc.value("api_key_env", std::string());
    c.request_template = doc.value("request_template", default_request_template());
    c.text_pointer = doc.value("text_pointer", c.text_pointer);
    c.prompt_tokens_pointer = doc.value("prompt_tokens_pointer", c.prompt_tokens_pointer);
    c.output_tokens_pointer = doc.value("output_tokens_pointer", c.output_tokens_pointer);
    c.max_retries = doc.value("max_retries", c.max_retries);
    c.initial_backoff = std::chrono::milliseconds(
        doc.value("initial_backoff_ms", static_cast<int>(c.initial_backoff.count())));
    c.timeout = std::chrono::seconds(
        doc.value("timeout_s", static_cast<int>(c.timeout.count())));
    c.max_in_flight = doc.value("max_in_flight", c.max_in_flight);
    c.bills_failures = doc.value("bills_failures", c.bills_failures);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("http backend config: ") + e.what());
  }
  if (c.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (c.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  return c;
}

HttpBackend::HttpBackend(std::string name, Pricing pricing, HttpBackendConfig config)
    : Backend(std::move(name), std::move(pricing)), config_(std::move(config)) {
  auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("http backend url must include a scheme: " + config_.url);
  }
  auto path_start = config_.url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = config_.url;
    path_ = "/";
  } else {
    scheme_host_port_ = config_.url.substr(0, path_start);
    path_ = config_.url.substr(path_start);
  }
  if (config_.request_template.is_null()) {
    config_.request_template = HttpBackendConfig::default_request_template();
  }
}

namespace {

void substitute(nlohmann::json& node, const std::map<std::string, std::string>& values,
                std::int64_t max_tokens) {
  if (node.is_string()) {
    const auto& s = node.get_ref<const std::string&>();
    if (s == "{max_tokens}") {
      node = max_tokens;
    } else {
      node = fill_template(s, values);
    }
  } else if (node.is_structured()) {
    for (auto& child : node) substitute(child, values, max_tokens);
  }
}

std::string api_key_from_env(const std::string& var) {
  if (var.empty()) return {};
  const char* v = std::getenv(var.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace

nlohmann::json HttpBackend::build_request(const PromptRecord& prompt) const {
  nlohmann::json body = config_.request_template;
  substitute(body,
             {{"prompt", prompt.text},
              {"model", config_.model},
              {"api_key", api_key_from_env(config_.api_key_env)}},
             prompt.max_output_tokens);
  return body;
}

Completion HttpBackend::parse_response(const PromptRecord& prompt,
                                       const nlohmann::json& body) const {
  Completion c;
  nlohmann::json::json_pointer text_ptr(config_.text_pointer);
  if (!body.contains(text_ptr) || !body[text_ptr].is_string()) {
    throw BackendError("http backend " + name() + ": response has no text at " +
                       config_.text_pointer);
  }
  c.output = body[text_ptr].get<std::string>();
  auto read_count = [&](const std::string& ptr, std::int64_t fallback) {
    if (ptr.empty()) return fallback;
    nlohmann::json::json_pointer p(ptr);
    if (body.contains(p) && body[p].is_number_integer()) {
      return body[p].get<std::int64_t>();
    }
    return fallback;
  };
  // Provider-reported usage wins; the local tokenizer fills gaps.
  c.prompt_tokens = read_count(config_.prompt_tokens_pointer, count_tokens(prompt.text));
  c.output_tokens = read_count(config_.output_tokens_pointer, count_tokens(c.output));
  return c;
}

Completion HttpBackend::complete(const PromptRecord& prompt, std::uint64_t) {
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
    ++in_flight_;
  }
  struct Slot {
    HttpBackend* self;
    ~Slot() {
      {
        std::lock_guard lock(self->mu_);
        --self->in_flight_;
      }
      self->cv_.notify_one();
    }
  } slot{this};

  const std::string body = build_request(prompt).dump();
  httplib::Headers headers;
  for (const auto& [k, v] : config_.headers) headers.emplace(k, v);
  if (auto key = api_key_from_env(config_.api_key_env); !key.empty()) {
    headers.emplace("Authorization", "Bearer " + key);
  }

  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendError("http backend " + name() + ": HTTP " +
                         std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError("http backend " + name() + ": invalid JSON response: " +
                         e.what());
    }
    return parse_response(prompt, parsed);
  }
  throw TransportError("http backend " + name() + ": giving up after " +
                       std::to_string(config_.max_retries + 1) +
                       " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Registry

void BackendRegistry::add(std::shared_ptr<Backend> backend) {
  auto name = backend->name();
  if (!backends_.emplace(name, std::move(backend)).second) {
    throw ConfigError("duplicate backend name " + name);
  }
}

bool BackendRegistry::contains(const std::string& name) const {
  return backends_.contains(name);
}

Backend& BackendRegistry::get(const std::string& name) const {
  auto it = backends_.find(name);
  if (it == backends_.end()) throw ConfigError("unknown backend '" + name + "'");
  return *it->second;
}

std::vector<std::string> BackendRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : backends_) out.push_back(name);
  return out;
}

namespace {

Pricing pricing_of(const std::string& name, const nlohmann::json& entry) {
  const nlohmann::json& src = entry.contains("pricing") ? entry["pricing"] : entry;
  return pricing_table_from_json(nlohmann::json{{name, {
      {"c_p", src.value("c_p", 0.0)},
      {"c_o", src.value("c_o", 0.0)},
      {"c_f", src.value("c_f", 0.0)},
      {"unit", src.value("unit", std::string("token-equivalents"))}}}}).at(name);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

BackendRegistry BackendRegistry::from_json(const nlohmann::json& doc,
                                           const RelevanceJudgments& judgments,
                                           std::uint64_t seed,
                                           const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("backend registry must be a JSON object");
  BackendRegistry reg;
  for (const auto& [name, entry] : doc.items()) {
    if (!entry.is_object()) throw ConfigError("backend " + name + " must be an object");
    std::string type;
    try {
      type = entry.at("type").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("backend " + name + " needs a string \"type\"");
    }
    Pricing pricing = pricing_of(name, entry);
    try {
      if (type == "oracle" || type == "noisy_oracle") {
        OracleConfig oc;
        oc.judgments = judgments;
        oc.accuracy = type == "oracle" ? 1.0 : entry.at("accuracy").get<double>();
        oc.seed = KeyBuilder(seed).add(entry.value("seed", std::uint64_t{0})).key();
        oc.relevant_grade = entry.value("relevant_grade", 1);
        reg.add(std::make_shared<OracleBackend>(name, pricing, std::move(oc)));
      } else if (type == "scripted") {
        nlohmann::json fixture;
        if (entry.contains("fixture")) {
          std::filesystem::path p = entry["fixture"].get<std::string>();
          if (p.is_relative()) p = base_dir / p;
          fixture = read_json_file(p);
        } else {
          fixture = entry.value("outputs", nlohmann::json::array());
        }
        reg.add(std::make_shared<ScriptedBackend>(
            name, pricing, ScriptedBackend::parse_fixture(fixture)));
      } else if (type == "http") {
        reg.add(std::make_shared<HttpBackend>(name, pricing,
                                              HttpBackendConfig::from_json(entry)));
      } else {
        throw ConfigError("backend " + name + ": unknown type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("backend " + name + ": " + e.what());
    }
  }
  return reg;
}

RelevanceJudgments judgments_from_gold(std::span<const RankingTask> tasks) {
  RelevanceJudgments j;
  for (const auto& t : tasks) {
    auto& q = j[t.query_id()];
    for (const auto& g : t.gold()) q[g] = 1;
  }
  return j;
}

}  // namespace ecorank
