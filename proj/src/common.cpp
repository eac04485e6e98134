#include <fstream>
#include <sstream>

#include "f2c/error.hpp"
#include "f2c/message.hpp"
#include "text_util.hpp"

namespace f2c {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::MissingTemplate: return "MissingTemplate";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::NoCodeBlockFound: return "NoCodeBlockFound";
    case ErrorCode::NoVerdict: return "NoVerdict";
    case ErrorCode::Network: return "Network";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::ReplayMismatch: return "ReplayMismatch";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::ToolchainMissing: return "ToolchainMissing";
    case ErrorCode::BinaryMissing: return "BinaryMissing";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::MalformedDialogue: return "MalformedDialogue";
    case ErrorCode::WeightError: return "WeightError";
    case ErrorCode::MissingTests: return "MissingTests";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::System: return "system";
  }
  return "user";
}

Role role_from_string(std::string_view text) {
  if (text == "user") return Role::User;
  if (text == "assistant") return Role::Assistant;
  if (text == "system") return Role::System;
  throw Error(ErrorCode::Schema, "unknown role '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const Message& message) {
  nlohmann::ordered_json j;
  j["role"] = to_string(message.role);
  j["content"] = message.content;
  return j;
}

Message message_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("role") || !j.contains("content") || !j["role"].is_string() ||
      !j["content"].is_string()) {
    throw Error(ErrorCode::Schema, "message must be {\"role\": string, \"content\": string}");
  }
  return Message{role_from_string(j["role"].get<std::string>()), j["content"].get<std::string>(), 0};
}

nlohmann::ordered_json to_json(const Dialogue& dialogue) {
  nlohmann::ordered_json j;
  j["id"] = dialogue.id;
  j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : dialogue.messages) j["messages"].push_back(to_json(m));
  return j;
}

Dialogue dialogue_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("messages") ||
      !j["messages"].is_array()) {
    throw Error(ErrorCode::Schema, "dialogue must be {\"id\": string, \"messages\": [...]}");
  }
  Dialogue d;
  d.id = j["id"].get<std::string>();
  std::uint64_t seq = 0;
  for (const auto& m : j["messages"]) {
    auto msg = message_from_json(m);
    msg.timestamp = ++seq;
    d.messages.push_back(std::move(msg));
  }
  return d;
}

namespace detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace detail
}  // namespace f2c
