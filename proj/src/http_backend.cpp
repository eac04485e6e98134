#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "f2c/error.hpp"
#include "f2c/llm_backend.hpp"

namespace f2c {

namespace {

enum class AttemptResult { Done, RetryBackoff, RetryHint };

ChatResponse parse_completion(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendError, std::string("malformed completion body: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorCode::BackendError, "completion body has no choices");
  }
  const auto& choice = j["choices"][0];
  ChatResponse r;
  if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string()) {
    r.content = choice["message"]["content"].get<std::string>();
  }
  const auto finish = choice.value("finish_reason", std::string("stop"));
  r.finish_reason = finish == "stop" ? FinishReason::Stop : finish == "length" ? FinishReason::Length : FinishReason::Error;
  if (j.contains("usage") && j["usage"].is_object()) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  if (r.finish_reason == FinishReason::Stop && r.content.empty()) {
    throw Error(ErrorCode::EmptyResponse, "completion finished with empty content");
  }
  return r;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw Error(ErrorCode::Config, "http backend needs an endpoint");
  if (!options_.api_key_env.empty()) {
    if (const char* key = std::getenv(options_.api_key_env.c_str())) api_key_ = key;
  }
  if (!options_.retry.sleep) {
    options_.retry.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (options_.retry.max_attempts < 1) options_.retry.max_attempts = 1;
}

ChatResponse HttpBackend::chat(const ChatRequest& request) {
  validate(request);
  auto body = to_json(request);
  body.erase("session");
  if (body["model"].get<std::string>().empty()) body["model"] = options_.model;
  const auto payload = body.dump();

  httplib::Headers headers;
  if (!api_key_.empty()) {
    headers.emplace(options_.auth_header, options_.auth_header == "Authorization" ? "Bearer " + api_key_ : api_key_);
  }

  httplib::Client client(options_.endpoint);
  client.set_connection_timeout(std::chrono::seconds(options_.timeout_s));
  client.set_read_timeout(std::chrono::seconds(options_.timeout_s));
  client.set_write_timeout(std::chrono::seconds(options_.timeout_s));

  auto backoff = options_.retry.initial_backoff;
  std::string last_problem;
  ErrorCode last_code = ErrorCode::Network;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    auto res = client.Post(options_.path, headers, payload, "application/json");
    std::chrono::milliseconds wait = backoff;
    if (!res) {
      last_code = ErrorCode::Network;
      last_problem = httplib::to_string(res.error());
    } else if (res->status == 200) {
      return parse_completion(res->body);
    } else if (res->status == 401 || res->status == 403) {
      throw Error(ErrorCode::AuthFailure, "server answered " + std::to_string(res->status));
    } else if (res->status == 429) {
      last_code = ErrorCode::RateLimited;
      last_problem = "rate limited (429)";
      if (res->has_header("Retry-After")) {
        try {
          const double seconds = std::stod(res->get_header_value("Retry-After"));
          wait = std::min(std::chrono::milliseconds(static_cast<long long>(std::llround(seconds * 1000.0))),
                          options_.retry.max_server_hint);
        } catch (const std::exception&) {
        }
      }
    } else if (res->status >= 500) {
      last_code = ErrorCode::Network;
      last_problem = "server error " + std::to_string(res->status);
    } else {
      throw Error(ErrorCode::BackendError, "server answered " + std::to_string(res->status) + ": " + res->body);
    }
    if (attempt < options_.retry.max_attempts) {
      options_.retry.sleep(wait);
      backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * options_.retry.multiplier));
    }
  }
  throw Error(last_code, last_problem + " after " + std::to_string(options_.retry.max_attempts) + " attempts");
}

}  // namespace f2c
