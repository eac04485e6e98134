#include "f2c/llm_backend.hpp"

#include <cstdio>
#include <cstdlib>
#include <thread>

#include "f2c/error.hpp"
#include "text_util.hpp"

namespace f2c {

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "error";
}

namespace {

FinishReason finish_from_string(std::string_view s) {
  if (s == "stop") return FinishReason::Stop;
  if (s == "length") return FinishReason::Length;
  return FinishReason::Error;
}

ChatResponse canned(std::string content) {
  ChatResponse r;
  r.finish_reason = content.empty() ? FinishReason::Error : FinishReason::Stop;
  r.content = std::move(content);
  return r;
}

}  // namespace

void validate(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(ErrorCode::Schema, "chat request has no messages");
  if (request.messages.back().role != Role::User) throw Error(ErrorCode::Schema, "last message must have role user");
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw Error(ErrorCode::Schema, "temperature must be in [0, 2]");
  }
}

std::string fingerprint(const std::vector<Message>& messages) {
  std::uint64_t h = 14695981039346656037ull;
  auto feed = [&h](std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& m : messages) {
    feed(to_string(m.role));
    feed(std::string_view("\0", 1));
    feed(std::to_string(m.content.size()));
    feed(std::string_view(":", 1));
    feed(m.content);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::ordered_json to_json(const ChatRequest& request) {
  nlohmann::ordered_json j;
  j["model"] = request.model_name;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : request.messages) j["messages"].push_back(to_json(m));
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_output_tokens;
  if (!request.session.empty()) j["session"] = request.session;
  return j;
}

ChatRequest chat_request_from_json(const nlohmann::json& j) {
  ChatRequest r;
  r.model_name = j.value("model", "");
  r.temperature = j.value("temperature", 0.2);
  r.max_output_tokens = j.value("max_tokens", 1024);
  r.session = j.value("session", "");
  std::uint64_t seq = 0;
  for (const auto& m : j.at("messages")) {
    auto msg = message_from_json(m);
    msg.timestamp = ++seq;
    r.messages.push_back(std::move(msg));
  }
  return r;
}

nlohmann::ordered_json to_json(const ChatResponse& response) {
  nlohmann::ordered_json j;
  j["content"] = response.content;
  j["finish_reason"] = to_string(response.finish_reason);
  j["usage"] = {{"prompt_tokens", response.usage.prompt_tokens},
                {"completion_tokens", response.usage.completion_tokens}};
  return j;
}

ChatResponse chat_response_from_json(const nlohmann::json& j) {
  ChatResponse r;
  r.content = j.at("content").get<std::string>();
  r.finish_reason = finish_from_string(j.value("finish_reason", "stop"));
  if (j.contains("usage")) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedBackend::ScriptedBackend(std::vector<std::string> shared_queue)
    : shared_(shared_queue.begin(), shared_queue.end()) {}

void ScriptedBackend::push(std::string response) {
  std::lock_guard lock(mutex_);
  shared_.push_back(std::move(response));
}

void ScriptedBackend::push_for_session(const std::string& session, std::string response) {
  std::lock_guard lock(mutex_);
  sessions_[session].push_back(std::move(response));
}

void ScriptedBackend::set_for_fingerprint(const std::string& fp, std::string response) {
  std::lock_guard lock(mutex_);
  by_fingerprint_[fp] = std::move(response);
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script) {
  auto backend = std::make_unique<ScriptedBackend>();
  if (!script.is_object()) throw Error(ErrorCode::Schema, "script must be a JSON object");
  if (script.contains("responses")) {
    for (const auto& r : script["responses"]) backend->shared_.push_back(r.get<std::string>());
  }
  if (script.contains("sessions")) {
    for (const auto& [session, queue] : script["sessions"].items()) {
      for (const auto& r : queue) backend->sessions_[session].push_back(r.get<std::string>());
    }
  }
  if (script.contains("by_fingerprint")) {
    for (const auto& [fp, r] : script["by_fingerprint"].items()) backend->by_fingerprint_[fp] = r.get<std::string>();
  }
  return backend;
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
}

ChatResponse ScriptedBackend::chat(const ChatRequest& request) {
  validate(request);
  std::lock_guard lock(mutex_);
  ++calls_;
  if (!by_fingerprint_.empty()) {
    if (auto it = by_fingerprint_.find(fingerprint(request.messages)); it != by_fingerprint_.end()) {
      return canned(it->second);
    }
  }
  if (auto it = sessions_.find(request.session); it != sessions_.end() && !it->second.empty()) {
    auto next = std::move(it->second.front());
    it->second.pop_front();
    return canned(std::move(next));
  }
  if (!shared_.empty()) {
    auto next = std::move(shared_.front());
    shared_.pop_front();
    return canned(std::move(next));
  }
  throw Error(ErrorCode::ScriptExhausted,
              "no scripted response left" + (request.session.empty() ? std::string() : " for session " + request.session));
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

// ---------------------------------------------------------------------------
// Record / replay

RecordingBackend::RecordingBackend(LlmBackend& inner, const std::filesystem::path& log_path) : inner_(inner) {
  if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
  log_.open(log_path, std::ios::app);
  if (!log_) throw Error(ErrorCode::Io, "cannot open record log " + log_path.string());
}

ChatResponse RecordingBackend::chat(const ChatRequest& request) {
  auto response = inner_.chat(request);
  nlohmann::ordered_json line;
  line["fingerprint"] = fingerprint(request.messages);
  line["session"] = request.session;
  line["request"] = to_json(request);
  line["response"] = to_json(response);
  std::lock_guard lock(mutex_);
  log_ << line.dump() << '\n';
  log_.flush();
  return response;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& log_path) {
  std::ifstream in(log_path);
  if (!in) throw Error(ErrorCode::Io, "cannot open replay log " + log_path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    Entry e{j.at("fingerprint").get<std::string>(), chat_request_from_json(j.at("request")),
            chat_response_from_json(j.at("response"))};
    sessions_[j.value("session", "")].push_back(std::move(e));
  }
}

ChatResponse ReplayBackend::chat(const ChatRequest& request) {
  validate(request);
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(request.session);
  if (it == sessions_.end() || it->second.empty()) {
    throw Error(ErrorCode::ReplayMismatch, "no recorded exchange left for session '" + request.session + "'");
  }
  const auto& expected = it->second.front();
  if (expected.fingerprint != fingerprint(request.messages)) {
    const auto& a = expected.request.messages;
    const auto& b = request.messages;
    std::size_t index = 0;
    while (index < a.size() && index < b.size() && a[index] == b[index]) ++index;
    throw Error(ErrorCode::ReplayMismatch, "request differs from recording at message " + std::to_string(index));
  }
  auto response = expected.response;
  it->second.pop_front();
  return response;
}

}  // namespace f2c
