#include "f2c/preprocess.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>

#include <json.hpp>

#include "f2c/error.hpp"
#include "log.hpp"
#include "text_util.hpp"

namespace f2c {

using detail::is_blank;
using detail::to_lower;

std::string_view to_string(Language language) {
  return language == Language::Fortran ? "fortran" : "cpp";
}

std::string_view to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::TooManyTokens: return "TooManyTokens";
    case FilterReason::UndefinedExternal: return "UndefinedExternal";
    case FilterReason::NotExecutable: return "NotExecutable";
    case FilterReason::EmptyAfterStrip: return "EmptyAfterStrip";
  }
  return "?";
}

SourceForm form_from_path(std::string_view path) {
  auto ext = to_lower(std::filesystem::path(path).extension().string());
  return (ext == ".f" || ext == ".for") ? SourceForm::Fixed : SourceForm::Free;
}

namespace {

struct LineScan {
  std::string text;
  bool dropped = false;
  char open_quote = 0;  // quote still open at end of line
};

// Scans `line` from `start` for a `!` comment outside character literals.
// `quote` is the literal open at `start`. `skip_column` (0-based) is ignored,
// for the fixed-form continuation column.
LineScan scan_inline(std::string_view line, std::size_t start, char quote, std::ptrdiff_t skip_column = -1) {
  LineScan out;
  for (std::size_t i = start; i < line.size(); ++i) {
    const char c = line[i];
    if (static_cast<std::ptrdiff_t>(i) == skip_column) continue;
    if (quote != 0) {
      if (c == quote) {
        if (i + 1 < line.size() && line[i + 1] == quote) {
          ++i;
        } else {
          quote = 0;
        }
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '!') {
      auto kept = line.substr(0, i);
      while (!kept.empty() && is_blank(kept.back())) kept.remove_suffix(1);
      out.text = std::string(kept);
      out.dropped = kept.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
      return out;
    }
  }
  out.text = std::string(line);
  out.open_quote = quote;
  return out;
}

bool ends_with_ampersand(std::string_view line) {
  auto t = detail::trim_right(line);
  return !t.empty() && t.back() == '&';
}

bool is_fixed_comment_marker(char c) { return c == 'c' || c == 'C' || c == '*' || c == '!'; }

}  // namespace

std::string strip_comments(std::string_view source, SourceForm form) {
  const auto lines = detail::split_lines(source);
  std::vector<std::string> kept;
  kept.reserve(lines.size());
  char quote = 0;

  for (auto line : lines) {
    if (form == SourceForm::Free) {
      if (quote == 0) {
        auto first = line.find_first_not_of(" \t\r\f\v");
        if (first != std::string_view::npos) {
          if (line[first] == '#' && first == 0) {
            kept.emplace_back(line);
            continue;
          }
          if (line[first] == '!') {
            if (first + 1 < line.size() && line[first + 1] == '$') {
              kept.emplace_back(line);
            }
            continue;
          }
        }
      }
      auto scan = scan_inline(line, 0, quote);
      quote = (scan.open_quote != 0 && ends_with_ampersand(line)) ? scan.open_quote : 0;
      if (!scan.dropped) kept.push_back(std::move(scan.text));
    } else {
      if (!line.empty() && line[0] == '#') {
        kept.emplace_back(line);
        quote = 0;
        continue;
      }
      if (!line.empty() && is_fixed_comment_marker(line[0])) {
        if (line.size() > 1 && line[1] == '$') kept.emplace_back(line);
        quote = 0;
        continue;
      }
      const bool continuation = line.size() > 5 && line[5] != ' ' && line[5] != '0' && line[5] != '\t' &&
                                line.substr(0, 5).find_first_not_of(' ') == std::string_view::npos;
      if (!continuation) quote = 0;
      auto scan = scan_inline(line, 0, quote, continuation ? 5 : -1);
      quote = scan.open_quote;
      if (!scan.dropped) kept.push_back(std::move(scan.text));
    }
  }

  std::string out;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i) out += '\n';
    out += kept[i];
  }
  if (!out.empty() && !source.empty() && source.back() == '\n') out += '\n';
  return out;
}

std::size_t estimate_tokens(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (detail::is_word_char(c)) {
      while (i < text.size() && detail::is_word_char(text[i])) ++i;
      ++count;
    } else {
      ++i;
      ++count;
    }
  }
  return count;
}

namespace {

// Lower-cased statements with free-form `&` continuations joined and `;`
// separated statements split apart. Character literals are blanked so that
// keywords inside strings are not matched.
std::vector<std::string> logical_statements(std::string_view text) {
  std::vector<std::string> statements;
  std::string current;
  char quote = 0;
  for (auto raw : detail::split_lines(text)) {
    std::string line;
    line.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const char c = raw[i];
      if (quote) {
        if (c == quote) {
          if (i + 1 < raw.size() && raw[i + 1] == quote) {
            ++i;
            line += "  ";
            continue;
          }
          quote = 0;
          line += c;
        } else {
          line += ' ';
        }
        continue;
      }
      if (c == '\'' || c == '"') quote = c;
      line += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    auto trimmed = std::string(detail::trim(line));
    if (!current.empty() && !trimmed.empty() && trimmed.front() == '&') trimmed.erase(0, 1);
    const bool continues = !trimmed.empty() && trimmed.back() == '&';
    if (continues) trimmed.pop_back();
    current += trimmed;
    if (continues) {
      current += ' ';
      continue;
    }
    quote = 0;
    std::size_t start = 0;
    for (std::size_t pos; (pos = current.find(';', start)) != std::string::npos; start = pos + 1) {
      statements.emplace_back(detail::trim(std::string_view(current).substr(start, pos - start)));
    }
    statements.emplace_back(detail::trim(std::string_view(current).substr(start)));
    current.clear();
  }
  if (!current.empty()) statements.push_back(current);
  return statements;
}

const std::set<std::string, std::less<>>& intrinsic_modules() {
  static const std::set<std::string, std::less<>> names = {
      "iso_fortran_env", "iso_c_binding", "ieee_arithmetic", "ieee_exceptions",
      "ieee_features",   "omp_lib",       "omp_lib_kinds",
  };
  return names;
}

const std::regex& use_re() {
  static const std::regex re(R"(^use\b\s*(,\s*(intrinsic|non_intrinsic)\s*)?(::)?\s*([a-z_]\w*))");
  return re;
}
const std::regex& module_re() {
  static const std::regex re(R"(^(sub)?module\b\s*(\([^)]*\))?\s*([a-z_]\w*)\s*$)");
  return re;
}
const std::regex& procedure_re() {
  static const std::regex re(R"((^|[\s)])(subroutine|function)\s+([a-z_]\w*))");
  return re;
}
const std::regex& external_stmt_re() {
  static const std::regex re(R"(^external\b\s*(::)?\s*(.*)$)");
  return re;
}
const std::regex& external_attr_re() {
  static const std::regex re(R"(,\s*external\b[^:]*::\s*(.*)$)");
  return re;
}
const std::regex& include_re() {
  static const std::regex re(R"(^#?\s*include\s*["'<]\s*([^"'>]+?)\s*["'>])");
  return re;
}
const std::regex& program_re() {
  static const std::regex re(R"(^program\s+[a-z_]\w*)");
  return re;
}

bool starts_with_end(const std::string& stmt) {
  return stmt.rfind("end", 0) == 0 && (stmt.size() == 3 || !detail::is_word_char(stmt[3]) ||
                                       stmt.compare(3, 10, "subroutine") == 0 || stmt.compare(3, 8, "function") == 0);
}

std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> names;
  static const std::regex word(R"([a-z_]\w*)");
  for (std::sregex_iterator it(list.begin(), list.end(), word), end; it != end; ++it) names.push_back(it->str());
  return names;
}

// Include targets need the original spelling (file names are case sensitive),
// and logical_statements() blanks character literals, so they are collected
// from the raw lines.
std::vector<std::string> include_targets(std::string_view text) {
  std::vector<std::string> out;
  static const std::regex re(R"(^\s*#?\s*[iI][nN][cC][lL][uU][dD][eE]\s*["'<]\s*([^"'>]+?)\s*["'>])");
  for (auto line : detail::split_lines(text)) {
    std::string s(line);
    std::smatch m;
    if (std::regex_search(s, m, re)) out.push_back(m[1].str());
  }
  return out;
}

}  // namespace

bool has_program_entry(std::string_view stripped_source) {
  for (const auto& stmt : logical_statements(stripped_source)) {
    if (std::regex_search(stmt, program_re())) return true;
  }
  return false;
}

bool has_procedure_definition(std::string_view stripped_source) {
  for (const auto& stmt : logical_statements(stripped_source)) {
    if (starts_with_end(stmt)) continue;
    if (std::regex_search(stmt, procedure_re())) return true;
  }
  return false;
}

std::vector<std::string> detect_external_deps(std::string_view stripped_source) {
  try {
    const auto statements = logical_statements(stripped_source);
    std::set<std::string, std::less<>> defined_modules;
    std::set<std::string, std::less<>> defined_procedures;
    for (const auto& stmt : statements) {
      std::smatch m;
      if (starts_with_end(stmt)) continue;
      if (std::regex_search(stmt, m, module_re())) {
        const auto name = m[3].str();
        if (name != "procedure") defined_modules.insert(name);
      }
      for (std::sregex_iterator it(stmt.begin(), stmt.end(), procedure_re()), end; it != end; ++it) {
        defined_procedures.insert((*it)[3].str());
      }
    }

    std::vector<std::string> deps;
    auto add = [&](std::string name) {
      if (std::find(deps.begin(), deps.end(), name) == deps.end()) deps.push_back(std::move(name));
    };
    auto includes = include_targets(stripped_source);
    std::size_t next_include = 0;

    for (const auto& stmt : statements) {
      std::smatch m;
      if (std::regex_search(stmt, m, use_re())) {
        const bool intrinsic = m[2].matched && m[2].str() == "intrinsic";
        const auto name = m[4].str();
        if (!intrinsic && !defined_modules.contains(name) && !intrinsic_modules().contains(name)) add(name);
      } else if (std::regex_search(stmt, m, external_stmt_re())) {
        for (auto& name : split_names(m[2].str())) {
          if (!defined_procedures.contains(name)) add(std::move(name));
        }
      } else if (std::regex_search(stmt, m, external_attr_re())) {
        for (auto& name : split_names(m[1].str())) {
          if (!defined_procedures.contains(name)) add(std::move(name));
        }
      } else if (std::regex_search(stmt, include_re())) {
        if (next_include < includes.size()) add(includes[next_include++]);
      }
    }
    return deps;
  } catch (const std::exception& e) {
    detail::warn(std::string("external dependency scan failed: ") + e.what());
    return {};
  }
}

void annotate(SourceUnit& unit) {
  if (unit.language() == Language::Fortran) unit.set_text(strip_comments(unit.text(), unit.form()));
  SourceAnnotations a;
  a.token_count = estimate_tokens(unit.text());
  if (unit.language() == Language::Fortran) {
    a.external_refs = detect_external_deps(unit.text());
    a.has_program_entry = has_program_entry(unit.text());
    a.has_procedure = has_procedure_definition(unit.text());
  }
  unit.set_annotations(std::move(a));
}

FilterDecision filter_seed(const SourceUnit& source, const FilterOptions& options) {
  const auto stripped = strip_comments(source.text(), source.form());
  const auto tokens = estimate_tokens(stripped);
  FilterDecision decision;
  if (tokens >= options.max_seed_tokens) decision.reasons.push_back(FilterReason::TooManyTokens);
  if (!detect_external_deps(stripped).empty()) decision.reasons.push_back(FilterReason::UndefinedExternal);
  const bool program = has_program_entry(stripped);
  const bool executable = options.require_program_entry ? program : (program || has_procedure_definition(stripped));
  if (!executable) decision.reasons.push_back(FilterReason::NotExecutable);
  if (tokens == 0) decision.reasons.push_back(FilterReason::EmptyAfterStrip);
  return decision;
}

namespace {

bool is_fortran_extension(const std::filesystem::path& p) {
  static const std::set<std::string, std::less<>> exts = {".f", ".for", ".f90", ".f95", ".f03", ".f08", ".ftn"};
  return exts.contains(to_lower(p.extension().string()));
}

}  // namespace

std::vector<SourceUnit> load_seeds(const std::filesystem::path& location) {
  namespace fs = std::filesystem;
  std::vector<SourceUnit> seeds;
  if (fs::is_directory(location)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(location)) {
      if (entry.is_regular_file() && is_fortran_extension(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      auto rel = fs::relative(file, location).generic_string();
      seeds.emplace_back(rel, Language::Fortran, detail::read_file(file), file.generic_string(), form_from_path(rel));
    }
    return seeds;
  }

  std::ifstream in(location);
  if (!in) throw Error(ErrorCode::Io, "cannot open seed corpus " + location.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Schema, location.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("content") || !j["id"].is_string() ||
        !j["content"].is_string()) {
      throw Error(ErrorCode::Schema,
                  location.string() + ":" + std::to_string(line_no) + ": expected {\"id\": string, \"content\": string}");
    }
    auto id = j["id"].get<std::string>();
    SourceForm form = form_from_path(id);
    if (j.contains("form") && j["form"].is_string()) form = j["form"] == "fixed" ? SourceForm::Fixed : SourceForm::Free;
    seeds.emplace_back(id, Language::Fortran, j["content"].get<std::string>(),
                       location.generic_string() + ":" + std::to_string(line_no), form);
  }
  return seeds;
}

}  // namespace f2c
