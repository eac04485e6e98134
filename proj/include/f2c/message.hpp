#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace f2c {

enum class Role { User, Assistant, System };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);  // throws Error{Schema}

struct Message {
  Role role = Role::User;
  std::string content;
  // Monotonic sequence number within one dialogue. Not serialized into the
  // dataset schema.
  std::uint64_t timestamp = 0;

  friend bool operator==(const Message& a, const Message& b) {
    return a.role == b.role && a.content == b.content;
  }
};

struct Dialogue {
  std::string id;
  std::vector<Message> messages;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

// {"role": ..., "content": ...}
nlohmann::ordered_json to_json(const Message& message);
Message message_from_json(const nlohmann::json& j);

// {"id": ..., "messages": [...]}
nlohmann::ordered_json to_json(const Dialogue& dialogue);
Dialogue dialogue_from_json(const nlohmann::json& j);

}  // namespace f2c
