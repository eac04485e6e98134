#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "f2c/error.hpp"
#include "f2c/llm_backend.hpp"
#include "support.hpp"

using namespace f2c;
using f2c::testing::ScratchDir;

namespace {

ChatRequest ask(std::string text, std::string session = {}) {
  ChatRequest r;
  r.messages.push_back(Message{Role::User, std::move(text), 1});
  r.session = std::move(session);
  return r;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an f2c::Error");
  return ErrorCode::Io;
}

// A local chat-completions server whose handler is swapped per test.
class FakeServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int hits() const { return hits_; }
  std::string last_body() const { return last_body_; }
  std::string last_auth() const { return last_auth_; }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::string last_body_;
  std::string last_auth_;
};

std::string completion(const std::string& content, const std::string& finish = "stop") {
  nlohmann::json j;
  j["choices"] = {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", finish}}};
  j["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 7}};
  return j.dump();
}

HttpBackendOptions options_for(const FakeServer& server, std::vector<std::chrono::milliseconds>* sleeps) {
  HttpBackendOptions o;
  o.endpoint = server.endpoint();
  o.model = "test-model";
  o.api_key_env = "F2C_TEST_NO_SUCH_KEY";
  o.timeout_s = 5;
  o.retry.sleep = [sleeps](std::chrono::milliseconds d) { sleeps->push_back(d); };
  return o;
}

}  // namespace

TEST_CASE("request validation") {
  CHECK(code_of([] { validate(ChatRequest{}); }) == ErrorCode::Schema);
  auto r = ask("hi");
  r.messages.push_back(Message{Role::Assistant, "hello", 2});
  CHECK(code_of([&] { validate(r); }) == ErrorCode::Schema);
  r = ask("hi");
  r.temperature = 2.5;
  CHECK(code_of([&] { validate(r); }) == ErrorCode::Schema);
  r.temperature = 2.0;
  CHECK_NOTHROW(validate(r));
}

TEST_CASE("fingerprint is FNV-1a over length-framed messages") {
  CHECK(fingerprint({}) == "cbf29ce484222325");
  CHECK(fingerprint({Message{Role::User, "Hi", 0}}) == "7760498acb006b55");
  CHECK(fingerprint({Message{Role::User, "Hi", 0}, Message{Role::Assistant, "Hello!", 0}}) == "dc2c579026fe7042");
  // Framing separates content boundaries.
  CHECK(fingerprint({Message{Role::User, "ab", 0}, Message{Role::User, "c", 0}}) !=
        fingerprint({Message{Role::User, "a", 0}, Message{Role::User, "bc", 0}}));
  // Timestamps are not content.
  CHECK(fingerprint({Message{Role::User, "Hi", 5}}) == fingerprint({Message{Role::User, "Hi", 9}}));
}

TEST_CASE("request JSON round trip") {
  auto r = ask("translate this", "seed-1");
  r.model_name = "m";
  r.temperature = 0.2;
  r.max_output_tokens = 512;
  const auto back = chat_request_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(back.messages == r.messages);
  CHECK(back.session == "seed-1");
  CHECK(back.max_output_tokens == 512);
  CHECK(back.temperature == doctest::Approx(0.2));
}

TEST_CASE("scripted backend lookup order") {
  ScriptedBackend b;
  b.push("shared 1");
  b.push("shared 2");
  b.push_for_session("s", "session 1");
  b.set_for_fingerprint(fingerprint(ask("special").messages), "by fingerprint");

  CHECK(b.chat(ask("special", "s")).content == "by fingerprint");
  CHECK(b.chat(ask("x", "s")).content == "session 1");
  CHECK(b.chat(ask("x", "s")).content == "shared 1");
  CHECK(b.chat(ask("x", "other")).content == "shared 2");
  CHECK(code_of([&] { b.chat(ask("x")); }) == ErrorCode::ScriptExhausted);
  CHECK(b.calls() == 5);
}

TEST_CASE("scripted backend from JSON") {
  auto b = ScriptedBackend::from_json(nlohmann::json::parse(
      R"({"responses": ["a"], "sessions": {"s1": ["b", ""]}, "by_fingerprint": {}})"));
  CHECK(b->chat(ask("q", "s1")).content == "b");
  const auto empty = b->chat(ask("q", "s1"));
  CHECK(empty.content.empty());
  CHECK(empty.finish_reason == FinishReason::Error);
  CHECK(b->chat(ask("q", "s1")).content == "a");
}

TEST_CASE("record then replay, with a mismatch naming the message index") {
  ScratchDir dir;
  const auto log = dir / "exchanges.jsonl";
  {
    ScriptedBackend inner({"one", "two"});
    RecordingBackend rec(inner, log);
    CHECK(rec.chat(ask("first", "s")).content == "one");
    auto second = ask("first", "s");
    second.messages.push_back(Message{Role::Assistant, "one", 2});
    second.messages.push_back(Message{Role::User, "second", 3});
    CHECK(rec.chat(second).content == "two");
  }
  ReplayBackend replay(log);
  CHECK(replay.chat(ask("first", "s")).content == "one");
  auto wrong = ask("first", "s");
  wrong.messages.push_back(Message{Role::Assistant, "one", 2});
  wrong.messages.push_back(Message{Role::User, "different", 3});
  try {
    replay.chat(wrong);
    FAIL("expected a replay mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ReplayMismatch);
    CHECK(std::string(e.what()).find("message 2") != std::string::npos);
  }
  CHECK(code_of([&] { replay.chat(ask("first", "unknown")); }) == ErrorCode::ReplayMismatch);
}

TEST_CASE("http backend parses a completion and strips the session tag") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("```cpp\nint main() {}\n```"), "application/json");
  });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(options_for(server, &sleeps));
  const auto r = backend.chat(ask("translate", "seed-7"));
  CHECK(r.content == "```cpp\nint main() {}\n```");
  CHECK(r.finish_reason == FinishReason::Stop);
  CHECK(r.usage == Usage{11, 7});
  const auto body = nlohmann::json::parse(server.last_body());
  CHECK_FALSE(body.contains("session"));
  CHECK(body["model"] == "test-model");
  CHECK(body["max_tokens"] == 1024);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(sleeps.empty());
}

TEST_CASE("http backend sends the key from the environment") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("ok"), "application/json");
  });
  ::setenv("F2C_TEST_KEY", "sk-test", 1);
  std::vector<std::chrono::milliseconds> sleeps;
  auto o = options_for(server, &sleeps);
  o.api_key_env = "F2C_TEST_KEY";
  HttpBackend backend(o);
  backend.chat(ask("q"));
  CHECK(server.last_auth() == "Bearer sk-test");
  ::unsetenv("F2C_TEST_KEY");
}

TEST_CASE("http backend retries 5xx with exponential backoff") {
  std::atomic<int> n{0};
  FakeServer server([&n](const httplib::Request&, httplib::Response& res) {
    if (++n < 3) {
      res.status = 503;
      return;
    }
    res.set_content(completion("third time"), "application/json");
  });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(options_for(server, &sleeps));
  CHECK(backend.chat(ask("q")).content == "third time");
  CHECK(server.hits() == 3);
  CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)});
}

TEST_CASE("http backend gives up after max attempts") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(options_for(server, &sleeps));
  CHECK(code_of([&] { backend.chat(ask("q")); }) == ErrorCode::Network);
  CHECK(server.hits() == 3);
  CHECK(sleeps.size() == 2);
}

TEST_CASE("http backend honours Retry-After on 429") {
  std::atomic<int> n{0};
  FakeServer server([&n](const httplib::Request&, httplib::Response& res) {
    if (++n == 1) {
      res.status = 429;
      res.set_header("Retry-After", "2");
      return;
    }
    res.set_content(completion("after wait"), "application/json");
  });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(options_for(server, &sleeps));
  CHECK(backend.chat(ask("q")).content == "after wait");
  CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(2000)});
}

TEST_CASE("http backend: persistent 429 ends in RateLimited") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(options_for(server, &sleeps));
  CHECK(code_of([&] { backend.chat(ask("q")); }) == ErrorCode::RateLimited);
}

TEST_CASE("http backend fails fast on 401") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(options_for(server, &sleeps));
  CHECK(code_of([&] { backend.chat(ask("q")); }) == ErrorCode::AuthFailure);
  CHECK(server.hits() == 1);
  CHECK(sleeps.empty());
}

TEST_CASE("http backend: empty content with stop is EmptyResponse") {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion(""), "application/json");
  });
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackend backend(options_for(server, &sleeps));
  CHECK(code_of([&] { backend.chat(ask("q")); }) == ErrorCode::EmptyResponse);
}

TEST_CASE("http backend: unreachable endpoint is a Network error") {
  std::vector<std::chrono::milliseconds> sleeps;
  HttpBackendOptions o;
  o.endpoint = "http://127.0.0.1:1";
  o.model = "m";
  o.timeout_s = 1;
  o.retry.sleep = [&sleeps](std::chrono::milliseconds d) { sleeps.push_back(d); };
  HttpBackend backend(o);
  CHECK(code_of([&] { backend.chat(ask("q")); }) == ErrorCode::Network);
  CHECK(sleeps.size() == 2);
}
