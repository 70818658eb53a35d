#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ecorank/backends.hpp"
#include "ecorank/errors.hpp"
#include "helpers.hpp"

using namespace ecorank;

namespace {
const PromptTemplates& T() { return PromptTemplates::defaults(); }
}  // namespace

TEST_CASE("oracle answers from judgments") {
  auto task = testing::make_task(3, {"p1"});
  auto oracle = testing::oracle_for(task);
  const auto& ps = task.passages();
  CHECK(oracle->complete(render_binary(T(), task, ps[0]), 0).output == "Yes");
  CHECK(oracle->complete(render_binary(T(), task, ps[1]), 0).output == "No");
  CHECK(oracle->complete(render_pairwise(T(), task, ps[0], ps[1]), 0).output == "A");
  CHECK(oracle->complete(render_pairwise(T(), task, ps[1], ps[0]), 0).output == "B");
  // Exact tie: the passage in the better current position (A) wins.
  CHECK(oracle->complete(render_pairwise(T(), task, ps[2], ps[1]), 0).output == "A");
  CHECK(oracle->complete(render_likert(T(), task, ps[0]), 0).output == "Very");
  CHECK(oracle->complete(render_likert(T(), task, ps[2]), 0).output == "Unrelated");
  std::vector<const Passage*> w = {&ps[1], &ps[2], &ps[0]};
  CHECK(oracle->complete(render_listwise(T(), task, w), 0).output == "[3] > [1] > [2]");
  CHECK(oracle->complete(render_querygen(T(), task, ps[0]), 0).output == task.query_text());
}

TEST_CASE("graded likert oracle answers somewhat below the relevance grade") {
  auto task = testing::make_task(3);
  OracleConfig c;
  c.judgments = {{"q1", {{"p1", 3}, {"p2", 1}}}};
  c.relevant_grade = 2;
  OracleBackend o("o", testing::unit_pricing(), c);
  const auto& ps = task.passages();
  CHECK(o.complete(render_likert(T(), task, ps[0]), 0).output == "Very");
  CHECK(o.complete(render_likert(T(), task, ps[1]), 0).output == "Somewhat");
  CHECK(o.complete(render_likert(T(), task, ps[2]), 0).output == "Unrelated");
  CHECK(o.complete(render_binary(T(), task, ps[1]), 0).output == "No");
  CHECK(o.complete(render_pairwise(T(), task, ps[2], ps[1]), 0).output == "B");
}

TEST_CASE("oracle usage is honest and within the cap") {
  auto task = testing::make_task(2, {"p1"});
  auto oracle = testing::oracle_for(task, 0.5);
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto r = render_querygen(T(), task, task.passages()[i % 2]);
    auto c = oracle->complete(r, i);
    CHECK(c.prompt_tokens == count_tokens(r.text));
    CHECK(c.output_tokens == count_tokens(c.output));
    CHECK(c.output_tokens <= r.max_output_tokens);
  }
}

TEST_CASE("noisy oracle accuracy") {
  std::vector<Passage> ps;
  for (int i = 0; i < 100; ++i) ps.push_back({"d" + std::to_string(i), "passage text", 0, {}});
  auto task = RankingTask::from_ordered("q", "query", ps, {"d0"});

  SUBCASE("accuracy 0 always flips") {
    auto o = testing::oracle_for(task, 0.0);
    for (std::uint64_t i = 0; i < 50; ++i) {
      CHECK(o->complete(render_binary(T(), task, task.passages()[i % 3]), i).output ==
            (i % 3 == 0 ? "No" : "Yes"));
    }
  }
  SUBCASE("accuracy 0.7 over 10000 calls") {
    auto o = testing::oracle_for(task, 0.7, "cheap", 1.0, 42);
    int correct = 0;
    for (std::uint64_t i = 0; i < 10000; ++i) {
      const auto& p = task.passages()[i % 100];
      bool yes = o->complete(render_binary(T(), task, p), i).output == "Yes";
      correct += yes == (p.id == "d0") ? 1 : 0;
    }
    CHECK(correct / 10000.0 == doctest::Approx(0.7).epsilon(0.02 / 0.7));
  }
  SUBCASE("draws are keyed") {
    auto a = testing::oracle_for(task, 0.5, "x", 1.0, 9);
    auto b = testing::oracle_for(task, 0.5, "x", 1.0, 9);
    auto r = render_binary(T(), task, task.passages()[5]);
    for (std::uint64_t i = 0; i < 20; ++i) {
      CHECK(a->complete(r, i).output == b->complete(r, i).output);
    }
    // Call order does not matter.
    CHECK(a->complete(r, 7).output == b->complete(r, 7).output);
  }
}

TEST_CASE("noisy_answer draws from alternatives") {
  int alts[] = {1, 2};
  int seen[3] = {0, 0, 0};
  for (std::uint64_t k = 0; k < 3000; ++k) seen[noisy_answer<int>(0.0, k, 0, alts)]++;
  CHECK(seen[0] == 0);
  CHECK(seen[1] > 1300);
  CHECK(seen[2] > 1300);
  for (std::uint64_t k = 0; k < 100; ++k) CHECK(noisy_answer<int>(1.0, k, 0, alts) == 0);
}

TEST_CASE("scripted backend replays fixtures") {
  auto task = testing::make_task(1);
  auto r = render_binary(T(), task, task.passages()[0]);
  auto outputs = ScriptedBackend::parse_fixture(nlohmann::json::array({{{"prompt", r.text}, {"output", "No"}}}));
  ScriptedBackend s("s", testing::unit_pricing(), outputs);
  CHECK(s.complete(r, 0).output == "No");
  CHECK(s.complete(r, 1).output == "No");
  auto other = render_likert(T(), task, task.passages()[0]);
  CHECK_THROWS_AS(s.complete(other, 0), BackendError);
  CHECK_THROWS_AS(ScriptedBackend::parse_fixture(nlohmann::json::object()), ConfigError);
}

TEST_CASE("registry from JSON") {
  auto doc = nlohmann::json::parse(R"({
    "exp": {"type": "noisy_oracle", "accuracy": 0.9, "c_p": 1, "c_o": 1},
    "cheap": {"type": "oracle", "pricing": {"c_p": 0.25, "c_o": 0.5, "c_f": 2}},
    "replay": {"type": "scripted", "outputs": [{"hash": "abc", "output": "Yes"}]}
  })");
  auto reg = BackendRegistry::from_json(doc, {});
  CHECK(reg.names() == std::vector<std::string>{"cheap", "exp", "replay"});
  CHECK(reg.get("cheap").pricing().fixed_cost == 2);
  CHECK(dynamic_cast<OracleBackend&>(reg.get("exp")).config().accuracy == 0.9);
  CHECK_THROWS_AS(reg.get("nope"), ConfigError);
  CHECK_THROWS_AS(BackendRegistry::from_json(nlohmann::json::parse(R"({"x": {"type": "gpt"}})"), {}),
                  ConfigError);
  CHECK_THROWS_AS(
      BackendRegistry::from_json(nlohmann::json::parse(R"({"x": {"type": "noisy_oracle"}})"), {}),
      ConfigError);
}

namespace {

struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  LocalServer() = default;
  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat"; }
};

HttpBackendConfig fast_config(const std::string& url) {
  HttpBackendConfig c;
  c.url = url;
  c.model = "m";
  c.initial_backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(5);
  c.request_template = HttpBackendConfig::default_request_template();
  return c;
}

std::string reply(const std::string& text, int prompt_tokens, int completion_tokens) {
  return nlohmann::json{{"choices", {{{"message", {{"content", text}}}}}},
                        {"usage", {{"prompt_tokens", prompt_tokens},
                                   {"completion_tokens", completion_tokens}}}}
      .dump();
}

}  // namespace

TEST_CASE("http backend request and response") {
  auto task = testing::make_task(1);
  auto prompt = render_binary(T(), task, task.passages()[0]);
  HttpBackend b("h", testing::unit_pricing(), fast_config("http://localhost:1/x"));
  auto body = b.build_request(prompt);
  CHECK(body["model"] == "m");
  CHECK(body["max_tokens"] == 1);
  CHECK(body["messages"][0]["content"] == prompt.text);

  auto c = b.parse_response(prompt, nlohmann::json::parse(reply("Yes", 99, 1)));
  CHECK(c.output == "Yes");
  CHECK(c.prompt_tokens == 99);
  auto no_usage = b.parse_response(
      prompt, nlohmann::json::parse(R"({"choices": [{"message": {"content": "No"}}]})"));
  CHECK(no_usage.prompt_tokens == count_tokens(prompt.text));
  CHECK(no_usage.output_tokens == 1);
  CHECK_THROWS_AS(b.parse_response(prompt, nlohmann::json::object()), BackendError);
  CHECK_THROWS_AS(HttpBackend("h", {}, fast_config("localhost")), ConfigError);
}

TEST_CASE("http backend retries transient failures") {
  LocalServer s;
  std::atomic<int> hits{0};
  s.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    int n = ++hits;
    if (n <= 2) {
      res.status = n == 1 ? 503 : 429;
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "m");
    res.set_content(reply("Yes", 10, 1), "application/json");
  });
  s.start();
  auto task = testing::make_task(1);
  HttpBackend b("h", testing::unit_pricing(), fast_config(s.url()));
  auto c = b.complete(render_binary(T(), task, task.passages()[0]), 0);
  CHECK(c.output == "Yes");
  CHECK(c.prompt_tokens == 10);
  CHECK(hits == 3);
}

TEST_CASE("http backend gives up after two retries") {
  LocalServer s;
  std::atomic<int> hits{0};
  s.server.Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  s.start();
  auto task = testing::make_task(1);
  HttpBackend b("h", testing::unit_pricing(), fast_config(s.url()));
  CHECK_THROWS_AS(b.complete(render_binary(T(), task, task.passages()[0]), 0), TransportError);
  CHECK(hits == 3);

  // Client errors are not retried.
  LocalServer bad;
  std::atomic<int> bad_hits{0};
  bad.server.Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
    ++bad_hits;
    res.status = 400;
  });
  bad.start();
  HttpBackend c("h", testing::unit_pricing(), fast_config(bad.url()));
  CHECK_THROWS_AS(c.complete(render_binary(T(), task, task.passages()[0]), 0), BackendError);
  CHECK(bad_hits == 1);
}

TEST_CASE("http backend bounds in-flight requests") {
  LocalServer s;
  std::atomic<int> current{0}, peak{0};
  s.server.new_task_queue = [] { return new httplib::ThreadPool(8); };
  s.server.Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
    int now = ++current;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --current;
    res.set_content(reply("No", 5, 1), "application/json");
  });
  s.start();
  auto cfg = fast_config(s.url());
  cfg.max_in_flight = 2;
  HttpBackend b("h", testing::unit_pricing(), cfg);
  auto task = testing::make_task(1);
  auto prompt = render_binary(T(), task, task.passages()[0]);
  std::vector<std::thread> callers;
  for (int i = 0; i < 6; ++i) callers.emplace_back([&] { b.complete(prompt, 0); });
  for (auto& t : callers) t.join();
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}

TEST_CASE("http backend reads the API key from the environment") {
  LocalServer s;
  std::string seen;
  s.server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    seen = req.get_header_value("Authorization");
    res.set_content(reply("Yes", 1, 1), "application/json");
  });
  s.start();
  ::setenv("ECORANK_TEST_KEY", "sekrit", 1);
  auto cfg = fast_config(s.url());
  cfg.api_key_env = "ECORANK_TEST_KEY";
  HttpBackend b("h", testing::unit_pricing(), cfg);
  auto task = testing::make_task(1);
  b.complete(render_binary(T(), task, task.passages()[0]), 0);
  CHECK(seen == "Bearer sekrit");
}
