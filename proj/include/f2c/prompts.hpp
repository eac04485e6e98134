#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace f2c {

struct Question {
  std::string text;
  std::string template_id;

  friend bool operator==(const Question&, const Question&) = default;
};

struct PromptTemplate {
  std::string id;
  std::string text;
  // Identifiers substituted by render(); any other brace text is literal.
  std::vector<std::string> placeholders;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

// `{identifier}` occurrences in order of first appearance.
std::vector<std::string> scan_placeholders(std::string_view text);

/// Immutable after loading; safe to share between sessions.
class PromptLibrary {
 public:
  PromptLibrary() = default;

  /// The shipped prompts (data/prompts, compiled in).
  static PromptLibrary builtin();

  /// `<dir>/index.json` maps template_id to its required placeholders and
  /// `<dir>/<template_id>.txt` holds the UTF-8 text. Throws Error{Schema}
  /// when a template's text and its index entry disagree.
  static PromptLibrary from_directory(const std::filesystem::path& dir);

  /// Adds or replaces a template; placeholders are read from the text.
  void add(std::string id, std::string text);

  bool contains(std::string_view id) const;
  const PromptTemplate& get(std::string_view id) const;  // throws MissingTemplate
  std::vector<std::string> ids() const;

  /// Single-pass literal substitution of the template's placeholders. Brace
  /// text inside bound values is never re-expanded.
  Question render(std::string_view id, const Bindings& bindings) const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

Question render_prompt(const PromptLibrary& library, std::string_view template_id, const Bindings& bindings);

}  // namespace f2c
