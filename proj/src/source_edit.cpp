#include "f2c/source_edit.hpp"

#include <regex>
#include <vector>

#include "text_util.hpp"

namespace f2c {

namespace {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last byte, including the newline
};

// Same length as `src`, with comments and string/char literals blanked so
// structural scans cannot be fooled by their contents.
std::string mask_cpp(std::string_view src) {
  std::string out(src);
  std::size_t i = 0;
  while (i < src.size()) {
    if (src.compare(i, 2, "//") == 0) {
      while (i < src.size() && src[i] != '\n') out[i++] = ' ';
    } else if (src.compare(i, 2, "/*") == 0) {
      auto end = src.find("*/", i + 2);
      end = end == std::string_view::npos ? src.size() : end + 2;
      for (; i < end; ++i) {
        if (out[i] != '\n') out[i] = ' ';
      }
    } else if (src[i] == '"' || src[i] == '\'') {
      const char q = src[i++];
      while (i < src.size() && src[i] != q && src[i] != '\n') {
        if (src[i] == '\\' && i + 1 < src.size()) out[i++] = ' ';
        out[i++] = ' ';
      }
      ++i;
    } else {
      ++i;
    }
  }
  return out;
}

std::string mask_fortran(std::string_view src) {
  std::string out(src);
  char quote = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const char c = src[i];
    if (c == '\n') {
      quote = 0;
      continue;
    }
    if (quote) {
      if (c == quote) quote = 0;
      else out[i] = ' ';
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '!') {
      while (i < src.size() && src[i] != '\n') out[i++] = ' ';
      --i;
    } else {
      out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

std::size_t line_start(std::string_view s, std::size_t pos) {
  auto nl = s.rfind('\n', pos == 0 ? 0 : pos - 1);
  return (pos == 0 || nl == std::string_view::npos) ? 0 : nl + 1;
}

std::size_t past_line_end(std::string_view s, std::size_t pos) {
  auto nl = s.find('\n', pos);
  return nl == std::string_view::npos ? s.size() : nl + 1;
}

std::optional<Span> cpp_main_span(std::string_view src) {
  const auto masked = mask_cpp(src);
  static const std::regex main_re(R"(\b(int|auto|signed)\s+main\s*\()");
  std::smatch m;
  if (!std::regex_search(masked, m, main_re)) return std::nullopt;
  std::size_t pos = static_cast<std::size_t>(m.position(0) + m.length(0));
  int depth = 1;
  while (pos < masked.size() && depth > 0) {
    if (masked[pos] == '(') ++depth;
    if (masked[pos] == ')') --depth;
    ++pos;
  }
  auto brace = masked.find_first_of("{;", pos);
  if (brace == std::string::npos || masked[brace] == ';') return std::nullopt;
  depth = 0;
  std::size_t end = brace;
  for (; end < masked.size(); ++end) {
    if (masked[end] == '{') ++depth;
    if (masked[end] == '}' && --depth == 0) break;
  }
  if (end >= masked.size()) end = masked.size() - 1;
  return Span{line_start(src, static_cast<std::size_t>(m.position(0))), past_line_end(src, end)};
}

std::optional<Span> fortran_program_span(std::string_view src) {
  const auto masked = mask_fortran(src);
  static const std::regex program_re(R"(^\s*program\s+\w+)");
  static const std::regex opener_re(
      R"(^\s*((recursive|pure|elemental|impure|module|integer|real|logical|complex|character|double\s+precision|type\s*\([^)]*\))(\([^)]*\))?\s+)*(subroutine|function)\s+\w+)");
  static const std::regex end_re(R"(^\s*end\s*(program|subroutine|function)?(\s+\w+)?\s*$)");
  const auto lines = detail::split_lines(masked);
  std::size_t offset = 0;
  std::optional<std::size_t> begin;
  int depth = 0;
  for (auto line : lines) {
    std::string l(line);
    const std::size_t next = offset + line.size() + 1;
    if (!begin) {
      if (std::regex_search(l, program_re)) {
        begin = offset;
        depth = 1;
      }
    } else if (std::regex_search(l, end_re)) {
      if (--depth == 0) return Span{*begin, std::min(next, src.size())};
    } else if (std::regex_search(l, opener_re)) {
      ++depth;
    }
    offset = next;
  }
  if (begin) return Span{*begin, src.size()};
  return std::nullopt;
}

std::optional<Span> entry_span(std::string_view src, Language language) {
  return language == Language::Cpp ? cpp_main_span(src) : fortran_program_span(src);
}

std::string join_trimmed(std::string_view head, std::string_view tail) {
  std::string out(detail::trim_right(head));
  if (!out.empty()) out += "\n\n";
  out.append(detail::trim_right(tail));
  out += '\n';
  return out;
}

bool is_preamble_line(std::string_view line, Language language) {
  auto t = detail::trim(line);
  if (t.empty()) return true;
  if (language == Language::Cpp) return t.front() == '#' || t.rfind("using ", 0) == 0;
  return false;
}

std::vector<std::string> include_lines(std::string_view src) {
  std::vector<std::string> out;
  for (auto line : detail::split_lines(src)) {
    auto t = detail::trim(line);
    if (t.rfind("#include", 0) == 0 || t.rfind("using namespace", 0) == 0) out.emplace_back(t);
  }
  return out;
}

// Adds `lines` missing from `src` at its top.
std::string hoist(std::string_view src, const std::vector<std::string>& lines) {
  auto present = include_lines(src);
  std::string head;
  for (const auto& l : lines) {
    if (std::find(present.begin(), present.end(), l) == present.end()) {
      head += l + '\n';
      present.push_back(l);
    }
  }
  return head + std::string(src);
}

}  // namespace

EntrySplit split_entry(std::string_view source, Language language) {
  auto span = entry_span(source, language);
  if (!span) return EntrySplit{std::string(source), {}};
  EntrySplit out;
  out.definitions = std::string(source.substr(0, span->begin)) + std::string(source.substr(span->end));
  out.entry = std::string(source.substr(span->begin, span->end - span->begin));
  return out;
}

bool has_entry_point(std::string_view source, Language language) { return entry_span(source, language).has_value(); }

bool is_entry_only(std::string_view source, Language language) {
  auto split = split_entry(source, language);
  if (split.entry.empty()) return false;
  for (auto line : detail::split_lines(split.definitions)) {
    if (!is_preamble_line(line, language)) return false;
  }
  return true;
}

std::string install_entry(std::string_view base, std::string_view test_source, Language language) {
  if (!is_entry_only(test_source, language)) return std::string(test_source);
  auto base_split = split_entry(base, language);
  auto test_split = split_entry(test_source, language);
  auto merged = join_trimmed(base_split.definitions, test_split.entry);
  if (language == Language::Cpp) merged = hoist(merged, include_lines(test_split.definitions));
  return merged;
}

std::string carry_definitions(std::string_view translation, std::string_view repaired, Language language) {
  auto repaired_split = split_entry(repaired, language);
  auto translation_split = split_entry(translation, language);
  auto merged = join_trimmed(repaired_split.definitions, translation_split.entry);
  if (language == Language::Cpp) merged = hoist(merged, include_lines(translation_split.definitions));
  return merged;
}

}  // namespace f2c
