#include "f2c/prompts.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <set>

#include <json.hpp>

#include "f2c/embedded.hpp"
#include "f2c/error.hpp"
#include "text_util.hpp"

namespace f2c {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }

// Returns the identifier of a `{identifier}` starting at text[pos] == '{'.
std::optional<std::string_view> placeholder_at(std::string_view text, std::size_t pos) {
  if (pos + 2 >= text.size() || !is_ident_start(text[pos + 1])) return std::nullopt;
  std::size_t end = pos + 2;
  while (end < text.size() && detail::is_word_char(text[end])) ++end;
  if (end >= text.size() || text[end] != '}') return std::nullopt;
  return text.substr(pos + 1, end - pos - 1);
}

PromptLibrary load(const std::function<std::string(const std::string&)>& read, const std::string& index_text,
                   const std::string& where) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(index_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, where + "/index.json: " + e.what());
  }
  if (!index.is_object()) throw Error(ErrorCode::Schema, where + "/index.json must be an object");
  PromptLibrary library;
  for (const auto& [id, required] : index.items()) {
    std::string text = read(id + ".txt");
    std::set<std::string> declared;
    for (const auto& name : required) declared.insert(name.get<std::string>());
    auto found = scan_placeholders(text);
    std::set<std::string> in_text(found.begin(), found.end());
    if (declared != in_text) {
      throw Error(ErrorCode::Schema, "template '" + id + "' placeholders do not match index.json");
    }
    library.add(id, std::move(text));
  }
  return library;
}

}  // namespace

std::vector<std::string> scan_placeholders(std::string_view text) {
  std::vector<std::string> names;
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    if (auto name = placeholder_at(text, pos)) {
      if (std::find(names.begin(), names.end(), *name) == names.end()) names.emplace_back(*name);
    }
  }
  return names;
}

PromptLibrary PromptLibrary::builtin() {
  const auto& files = embedded::files();
  auto read = [&files](const std::string& name) {
    auto it = files.find("prompts/" + name);
    if (it == files.end()) throw Error(ErrorCode::MissingTemplate, name);
    return std::string(it->second);
  };
  return load(read, read("index.json"), "<builtin prompts>");
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
  auto read = [&dir](const std::string& name) { return detail::read_file(dir / name); };
  return load(read, read("index.json"), dir.string());
}

void PromptLibrary::add(std::string id, std::string text) {
  PromptTemplate t{id, std::move(text), {}};
  t.placeholders = scan_placeholders(t.text);
  templates_[std::move(id)] = std::move(t);
}

bool PromptLibrary::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const PromptTemplate& PromptLibrary::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::MissingTemplate, std::string(id));
  return it->second;
}

std::vector<std::string> PromptLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

Question PromptLibrary::render(std::string_view id, const Bindings& bindings) const {
  const auto& t = get(id);
  for (const auto& name : t.placeholders) {
    if (!bindings.contains(name)) throw Error(ErrorCode::UnboundPlaceholder, name);
  }
  std::string out;
  out.reserve(t.text.size());
  std::string_view text = t.text;
  std::size_t copied = 0;
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1)) {
    auto name = placeholder_at(text, pos);
    if (!name) continue;
    auto it = bindings.find(*name);
    out.append(text.substr(copied, pos - copied));
    out.append(it->second);
    copied = pos + name->size() + 2;
    pos = copied - 1;
  }
  out.append(text.substr(copied));
  return Question{std::move(out), t.id};
}

Question render_prompt(const PromptLibrary& library, std::string_view template_id, const Bindings& bindings) {
  return library.render(template_id, bindings);
}

}  // namespace f2c
