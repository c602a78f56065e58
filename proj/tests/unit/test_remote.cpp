#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "helpers.hpp"
#include "hnm/mirrorgen.hpp"

using namespace hnm;
using namespace hnm::mirrorgen;

namespace {

// Chat-completion stand-in on a local port.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++active_;
      int prev = peak_.load();
      while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
      }
      ++requests_;
      last_auth_ = req.get_header_value("Authorization");
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      --active_;
      if (failures_left_ > 0) {
        --failures_left_;
        res.status = fail_status;
        res.set_content("busy", "text/plain");
        return;
      }
      const auto body = nlohmann::json::parse(req.body);
      last_request_ = body;
      const auto& msgs = body.at("messages");
      const std::string reply = "echo " + msgs.back().at("content").get<std::string>();
      res.set_content(nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}}.dump(),
                      "application/json");
    });
    server_.Post("/text", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"text":"plain reply"})", "application/json");
    });
    server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content("nope", "text/plain");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  int delay_ms = 0;
  int fail_status = 503;
  std::atomic<int> failures_left_{0};
  std::atomic<int> requests_{0};
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
  std::string last_auth_;
  nlohmann::json last_request_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

GeneratorSpec spec_for(const FakeServer& s) {
  ::setenv("HNM_TEST_KEY", "secret-token", 1);
  GeneratorSpec g;
  g.name = "fake-llm";
  g.endpoint = s.url();
  g.api_key_env = "HNM_TEST_KEY";
  g.backoff_ms = 5;
  g.timeout_s = 5;
  return g;
}

MirrorPrompt prompt(const std::string& id) {
  MirrorPrompt p;
  p.source_id = id;
  p.turns = {{Role::prompt, "Write about " + id}};
  return p;
}

}  // namespace

TEST_CASE("remote client sends a chat request and reads the reply") {
  FakeServer server;
  auto gen = make_generator(spec_for(server));
  const auto p = prompt("doc1");
  CHECK(gen->complete(p, p.turns, 42) == "echo Write about doc1");
  CHECK(server.last_auth_ == "Bearer secret-token");
  CHECK(server.last_request_["model"] == "fake-llm");
  CHECK(server.last_request_["seed"] == 42);
  CHECK(server.last_request_["messages"][0]["role"] == "user");
}

TEST_CASE("assistant turns are sent with the assistant role") {
  FakeServer server;
  auto gen = make_generator(spec_for(server));
  MirrorPrompt p = prompt("d");
  std::vector<Turn> turns = {{Role::prompt, "title?"}, {Role::assistant, "A Title"}, {Role::prompt, "write"}};
  CHECK(gen->complete(p, turns, 1) == "echo write");
  CHECK(server.last_request_["messages"][1]["role"] == "assistant");
  CHECK(server.last_request_["messages"][1]["content"] == "A Title");
}

TEST_CASE("text adapter") {
  FakeServer server;
  auto s = spec_for(server);
  s.adapter = "text";
  s.path = "/text";
  auto gen = make_generator(s);
  const auto p = prompt("d");
  CHECK(gen->complete(p, p.turns, 1) == "plain reply");
}

TEST_CASE("retries with backoff recover from transient errors") {
  FakeServer server;
  server.failures_left_ = 2;
  auto s = spec_for(server);
  s.retry_budget = 3;
  auto gen = make_generator(s);
  const auto p = prompt("d");
  const auto start = std::chrono::steady_clock::now();
  CHECK(gen->complete(p, p.turns, 1) == "echo Write about d");
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  CHECK(server.requests_ == 3);
  CHECK(ms >= 5 + 10);  // 5 ms, then 10 ms
}

TEST_CASE("rate limiting responses are retried too") {
  FakeServer server;
  server.fail_status = 429;
  server.failures_left_ = 1;
  auto gen = make_generator(spec_for(server));
  const auto p = prompt("d");
  CHECK(gen->complete(p, p.turns, 1) == "echo Write about d");
  CHECK(server.requests_ == 2);
}

TEST_CASE("exhausted retry budget raises GeneratorError") {
  FakeServer server;
  server.failures_left_ = 100;
  auto s = spec_for(server);
  s.retry_budget = 2;
  auto gen = make_generator(s);
  const auto p = prompt("d");
  CHECK_THROWS_AS(gen->complete(p, p.turns, 1), GeneratorError);
  CHECK(server.requests_ == 3);
}

TEST_CASE("client errors are not retried") {
  FakeServer server;
  auto s = spec_for(server);
  s.path = "/bad";
  auto gen = make_generator(s);
  const auto p = prompt("d");
  CHECK_THROWS_AS(gen->complete(p, p.turns, 1), GeneratorError);
}

TEST_CASE("unreachable endpoint fails after the retry budget") {
  auto s = spec_for(FakeServer{});
  s.endpoint = "http://127.0.0.1:1";
  s.retry_budget = 1;
  auto gen = make_generator(s);
  const auto p = prompt("d");
  CHECK_THROWS_AS(gen->complete(p, p.turns, 1), GeneratorError);
}

TEST_CASE("in-flight requests never exceed the configured bound") {
  FakeServer server;
  server.delay_ms = 30;
  auto s = spec_for(server);
  s.max_in_flight = 2;
  RemoteChatGenerator gen(s);
  std::vector<std::thread> callers;
  for (int i = 0; i < 8; ++i) {
    callers.emplace_back([&, i] {
      const auto p = prompt("d" + std::to_string(i));
      gen.complete(p, p.turns, 1);
    });
  }
  for (auto& t : callers) t.join();
  CHECK(server.requests_ == 8);
  CHECK(gen.peak_in_flight() <= 2);
  CHECK(gen.peak_in_flight() >= 1);
  CHECK(server.peak_ <= 2);
}

TEST_CASE("batch mirroring through the remote client skips failed items") {
  FakeServer server;
  auto s = spec_for(server);
  s.retry_budget = 0;
  auto gen = make_generator(s);
  Collection humans;
  for (int i = 0; i < 4; ++i) {
    auto d = testutil::human("h" + std::to_string(i), "email", testutil::words(60));
    d.extra["topic"] = "invoices";
    humans.push_back(d);
  }
  server.failures_left_ = 1;
  MirrorOptions opts;
  opts.min_words = 5;
  const auto batch = mirror_documents(humans, TemplateSet::builtin(), {gen.get()}, opts, 1);
  CHECK(batch.failed == 1);
  CHECK(batch.mirrors.size() == 3);
  CHECK(batch.mirrors[0].id == "h1#m0");
  CHECK(batch.mirrors[0].text.find("echo Write an email about invoices") == 0);
}

TEST_CASE("audit log records each attempt") {
  FakeServer server;
  testutil::TempDir dir("audit");
  auto s = spec_for(server);
  s.audit_log = dir / "audit.jsonl";
  server.failures_left_ = 1;
  {
    auto gen = make_generator(s);
    const auto p = prompt("d9");
    gen->complete(p, p.turns, 1);
  }
  const auto text = testutil::read_file(dir / "audit.jsonl");
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(first["source_id"] == "d9");
  CHECK(first["status"] == 503);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}

TEST_CASE("missing credential variable is rejected up front") {
  GeneratorSpec s;
  s.endpoint = "http://127.0.0.1:9";
  s.api_key_env = "HNM_TEST_UNSET_VARIABLE";
  ::unsetenv("HNM_TEST_UNSET_VARIABLE");
  CHECK_THROWS_AS(make_generator(s), std::invalid_argument);
}
