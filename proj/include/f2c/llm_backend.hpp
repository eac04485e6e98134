#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "f2c/message.hpp"

namespace f2c {

struct ChatRequest {
  std::vector<Message> messages;
  double temperature = 0.2;
  int max_output_tokens = 1024;
  std::string model_name;
  // Routing tag (the seed id during a pipeline run). Used by the scripted and
  // replay backends to keep one cursor per session; never sent over the wire
  // and not part of the fingerprint.
  std::string session;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

enum class FinishReason { Stop, Length, Error };

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  friend bool operator==(const Usage&, const Usage&) = default;
};

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::Stop;
  Usage usage;
  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

std::string_view to_string(FinishReason reason);

// Throws Error{Schema} when messages are empty or the last one is not a user
// message, or when temperature is outside [0, 2].
void validate(const ChatRequest& request);

/// Stable 64-bit FNV-1a over length-framed (role, content) pairs, as 16 hex
/// digits. Sampling parameters are deliberately excluded.
std::string fingerprint(const std::vector<Message>& messages);

nlohmann::ordered_json to_json(const ChatRequest& request);
ChatRequest chat_request_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ChatResponse& response);
ChatResponse chat_response_from_json(const nlohmann::json& j);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Implementations must tolerate concurrent calls.
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

/// Canned responses. Lookup order per request: an entry keyed by the
/// request fingerprint, then the next entry of the request's session queue,
/// then the next entry of the shared queue.
class ScriptedBackend final : public LlmBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<std::string> shared_queue);

  void push(std::string response);
  void push_for_session(const std::string& session, std::string response);
  void set_for_fingerprint(const std::string& fp, std::string response);

  // {"responses": [..], "sessions": {"id": [..]}, "by_fingerprint": {"hex": ".."}}
  static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  ChatResponse chat(const ChatRequest& request) override;

  std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> shared_;
  std::map<std::string, std::deque<std::string>> sessions_;
  std::map<std::string, std::string> by_fingerprint_;
  std::size_t calls_ = 0;
};

/// Forwards to another backend and appends `{fingerprint, session, request,
/// response}` lines to a log file.
class RecordingBackend final : public LlmBackend {
 public:
  RecordingBackend(LlmBackend& inner, const std::filesystem::path& log_path);
  ChatResponse chat(const ChatRequest& request) override;

 private:
  LlmBackend& inner_;
  std::mutex mutex_;
  std::ofstream log_;
};

/// Serves a recorded log. Entries are consumed in order per session; a
/// request whose fingerprint differs from the next recorded one fails with
/// ReplayMismatch naming the first differing message index.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(const std::filesystem::path& log_path);
  ChatResponse chat(const ChatRequest& request) override;

 private:
  struct Entry {
    std::string fingerprint;
    ChatRequest request;
    ChatResponse response;
  };
  std::mutex mutex_;
  std::map<std::string, std::deque<Entry>> sessions_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_server_hint{60'000};
  // Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct HttpBackendOptions {
  // Base URL, e.g. "https://api.example.com" or "http://127.0.0.1:8080".
  std::string endpoint;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "LLM_API_KEY";
  std::string auth_header = "Authorization";
  int timeout_s = 60;
  RetryPolicy retry;
};

/// Chat-completions over HTTP(S). Network failures, timeouts and 5xx are
/// retried with exponential backoff, 429 honours `Retry-After`; 401/403 fail
/// immediately with AuthFailure.
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  ChatResponse chat(const ChatRequest& request) override;

  const HttpBackendOptions& options() const { return options_; }

 private:
  HttpBackendOptions options_;
  std::string api_key_;
};

}  // namespace f2c
