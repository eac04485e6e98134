// Dialogue fixtures shared by the dataset and acceptance tests.
#pragma once

#include <random>
#include <string>

#include "f2c/message.hpp"

namespace f2c::testing {

// The worked example: one two-turn conversation and its split.
inline const char* kConv1In = R"([
{
    "id": "conv1",
    "messages": [
        {"role": "user", "content": "Hi"},
        {"role": "assistant", "content": "Hello!"},
        {"role": "user", "content": "How are you?"},
        {"role": "assistant", "content": "I'm good, thank you."}
    ]
}
])";

inline const char* kConv1Out = R"([
{
    "id": "conv1",
    "messages": [
        {"role": "user", "content": "Hi"},
        {"role": "assistant", "content": "Hello!"}
    ]
},
{
    "id": "conv1",
    "messages": [
        {"role": "user", "content": "Hi"},
        {"role": "assistant", "content": "Hello!"},
        {"role": "user", "content": "How are you?"},
        {"role": "assistant", "content": "I'm good, thank you."}
    ]
}
])";

inline std::string random_text(std::mt19937& rng) {
  static const std::string alphabet = "abc xyz\n\"\\{}\t\xc3\xa9!";
  std::string s;
  const auto n = 1 + rng() % 20;
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
  // Keep multi-byte characters whole.
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\xc3' || s[i] == '\xa9') {
      out += "\xc3\xa9";
      continue;
    }
    out += s[i];
  }
  return out;
}

inline Dialogue random_dialogue(std::mt19937& rng, int id) {
  Dialogue d;
  d.id = "d" + std::to_string(id);
  const auto turns = 1 + rng() % 8;
  for (std::size_t t = 0; t < turns; ++t) {
    d.messages.push_back(Message{Role::User, random_text(rng), 0});
    d.messages.push_back(Message{Role::Assistant, random_text(rng), 0});
  }
  return d;
}

}  // namespace f2c::testing
