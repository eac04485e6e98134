#include "f2c/dataset.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "f2c/embedded.hpp"
#include "f2c/error.hpp"
#include "text_util.hpp"

namespace f2c {

namespace fs = std::filesystem;

nlohmann::ordered_json to_json(const PairRecord& record) {
  nlohmann::ordered_json j;
  j["schema_version"] = kPairSchemaVersion;
  j["id"] = record.id;
  j["fortran"] = record.fortran;
  j["cpp"] = record.cpp;
  j["fortran_with_tests"] = record.fortran_with_tests;
  j["cpp_with_tests"] = record.cpp_with_tests;
  j["rounds_used"] = record.rounds_used;
  j["evidence"] = nlohmann::ordered_json::array();
  for (const auto& o : record.evidence) j["evidence"].push_back(to_json(o, false));
  return j;
}

PairRecord pair_record_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema_version", kPairSchemaVersion) != kPairSchemaVersion) {
      throw Error(ErrorCode::Schema, "unsupported pair schema_version");
    }
    PairRecord r;
    r.id = j.at("id").get<std::string>();
    r.fortran = j.at("fortran").get<std::string>();
    r.cpp = j.at("cpp").get<std::string>();
    r.fortran_with_tests = j.at("fortran_with_tests").get<std::string>();
    r.cpp_with_tests = j.at("cpp_with_tests").get<std::string>();
    r.rounds_used = j.value("rounds_used", 0);
    if (j.contains("evidence")) {
      for (const auto& o : j["evidence"]) r.evidence.push_back(tool_outcome_from_json(o));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("pair record: ") + e.what());
  }
}

void validate(const PairRecord& record) {
  if (record.fortran.empty() || record.cpp.empty() || record.fortran_with_tests.empty() ||
      record.cpp_with_tests.empty()) {
    throw Error(ErrorCode::Schema, "pair " + record.id + ": source fields must be non-empty");
  }
  auto has_ok = [&record](ToolKind kind, std::size_t wanted) {
    std::size_t n = 0;
    for (const auto& o : record.evidence) n += (o.kind == kind && o.ok()) ? 1 : 0;
    return n >= wanted;
  };
  if (!has_ok(ToolKind::CompileFortran, 1) || !has_ok(ToolKind::CompileCpp, 1) || !has_ok(ToolKind::Execute, 2)) {
    throw Error(ErrorCode::Schema, "pair " + record.id + ": evidence lacks exit-0 compile and run outcomes");
  }
}

// ---------------------------------------------------------------------------
// Dialogues

bool is_well_formed(const Dialogue& dialogue, std::string* why) {
  auto fail = [why](std::string reason) {
    if (why) *why = std::move(reason);
    return false;
  };
  const auto& m = dialogue.messages;
  std::size_t head = 0;
  while (head < m.size() && m[head].role == Role::System) ++head;
  const std::size_t n = m.size() - head;
  if (n == 0) return fail("dialogue has no user/assistant messages");
  if (n % 2 != 0) return fail("odd number of user/assistant messages (" + std::to_string(n) + ")");
  for (std::size_t i = head; i < m.size(); ++i) {
    const Role expected = (i - head) % 2 == 0 ? Role::User : Role::Assistant;
    if (m[i].role != expected) {
      return fail("message " + std::to_string(i) + " should have role " + std::string(to_string(expected)));
    }
  }
  return true;
}

std::vector<DialogueRecord> split_dialogue(const Dialogue& dialogue) {
  std::string why;
  if (!is_well_formed(dialogue, &why)) throw Error(ErrorCode::MalformedDialogue, dialogue.id + ": " + why);
  const auto& m = dialogue.messages;
  std::size_t head = 0;
  while (head < m.size() && m[head].role == Role::System) ++head;
  std::vector<DialogueRecord> records;
  const std::size_t turns = (m.size() - head) / 2;
  records.reserve(turns);
  for (std::size_t k = 1; k <= turns; ++k) {
    DialogueRecord r;
    r.id = dialogue.id;
    r.messages.assign(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(head + 2 * k));
    records.push_back(std::move(r));
  }
  return records;
}

JsonlSink::JsonlSink(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

void JsonlSink::append(const nlohmann::ordered_json& row) {
  const auto line = row.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  if (!out_) throw Error(ErrorCode::Io, "write failed");
  ++lines_;
}

std::size_t JsonlSink::lines() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

std::size_t emit_pairs(std::span<const PairRecord> records, const fs::path& sink) {
  JsonlSink out(sink);
  for (const auto& r : records) out.append(to_json(r));
  return out.lines();
}

EmitDialoguesResult emit_dialogues(std::span<const Dialogue> dialogues, const fs::path& sink) {
  JsonlSink out(sink);
  EmitDialoguesResult result;
  for (const auto& d : dialogues) {
    std::vector<DialogueRecord> records;
    try {
      records = split_dialogue(d);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedDialogue) throw;
      ++result.rejects;
      continue;
    }
    for (const auto& r : records) out.append(to_json(r));
    result.records += records.size();
  }
  return result;
}

std::vector<PairRecord> read_pairs(const fs::path& path) {
  std::vector<PairRecord> out;
  const auto text = detail::read_file(path);
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(pair_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Schema, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::Schema, path.string() + ":" + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return out;
}

DialogueFile read_dialogues(const fs::path& path) {
  DialogueFile file;
  const auto text = detail::read_file(path);
  const auto body = detail::trim(text);
  if (!body.empty() && body.front() == '[') {
    nlohmann::json array;
    try {
      array = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      file.errors.push_back({1, e.what()});
      return file;
    }
    std::size_t index = 0;
    for (const auto& j : array) {
      ++index;
      try {
        file.dialogues.push_back(dialogue_from_json(j));
        file.lines.push_back(index);
      } catch (const Error& e) {
        file.errors.push_back({index, e.detail()});
      }
    }
    return file;
  }
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      file.dialogues.push_back(dialogue_from_json(nlohmann::json::parse(line)));
      file.lines.push_back(line_no);
    } catch (const nlohmann::json::exception& e) {
      file.errors.push_back({line_no, e.what()});
    } catch (const Error& e) {
      file.errors.push_back({line_no, e.detail()});
    }
  }
  return file;
}

// ---------------------------------------------------------------------------
// Statistics

const std::vector<std::string>& keyword_list(Language language) {
  static const auto load = [](std::string_view name) {
    std::vector<std::string> words;
    const auto& files = embedded::files();
    auto it = files.find(name);
    if (it == files.end()) throw Error(ErrorCode::Io, "missing keyword list " + std::string(name));
    for (auto line : detail::split_lines(it->second)) {
      auto w = detail::trim(line);
      if (!w.empty()) words.emplace_back(w);
    }
    return words;
  };
  static const auto fortran = load("keywords/fortran.txt");
  static const auto cpp = load("keywords/cpp.txt");
  return language == Language::Fortran ? fortran : cpp;
}

namespace {

// Calls `on_word` for each identifier-like word outside comments and
// literals.
template <typename F>
void scan_words(std::string_view src, Language language, F&& on_word) {
  std::size_t i = 0;
  const auto n = src.size();
  while (i < n) {
    const char c = src[i];
    if (language == Language::Cpp && src.compare(i, 2, "//") == 0) {
      while (i < n && src[i] != '\n') ++i;
    } else if (language == Language::Cpp && src.compare(i, 2, "/*") == 0) {
      auto end = src.find("*/", i + 2);
      i = end == std::string_view::npos ? n : end + 2;
    } else if (language == Language::Fortran && c == '!') {
      while (i < n && src[i] != '\n') ++i;
    } else if (c == '"' || c == '\'') {
      ++i;
      while (i < n && src[i] != c && src[i] != '\n') {
        if (language == Language::Cpp && src[i] == '\\') ++i;
        ++i;
      }
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const auto start = i;
      while (i < n && detail::is_word_char(src[i])) ++i;
      on_word(src.substr(start, i - start));
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < n && (detail::is_word_char(src[i]) || src[i] == '.')) ++i;
    } else {
      ++i;
    }
  }
}

}  // namespace

Histogram keyword_histogram(std::string_view source, Language language) {
  static const auto sets = [] {
    std::array<std::set<std::string, std::less<>>, 2> s;
    for (const auto& w : keyword_list(Language::Fortran)) s[0].insert(detail::to_lower(w));
    for (const auto& w : keyword_list(Language::Cpp)) s[1].insert(w);
    return s;
  }();
  const auto& keywords = sets[language == Language::Fortran ? 0 : 1];
  Histogram h;
  scan_words(source, language, [&](std::string_view word) {
    if (language == Language::Fortran) {
      auto lower = detail::to_lower(word);
      if (keywords.contains(lower)) ++h[lower];
    } else if (keywords.contains(word)) {
      ++h[std::string(word)];
    }
  });
  return h;
}

Histogram keyword_histogram(std::span<const PairRecord> records, Language language) {
  Histogram total;
  for (const auto& r : records) {
    for (const auto& [k, v] : keyword_histogram(language == Language::Fortran ? r.fortran : r.cpp, language)) {
      total[k] += v;
    }
  }
  return total;
}

std::vector<std::pair<std::string, std::size_t>> top_k(const Histogram& histogram, std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> rows(histogram.begin(), histogram.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

std::map<std::size_t, std::size_t> line_count_distribution(std::span<const PairRecord> records, Language language,
                                                           std::size_t bin_width) {
  if (bin_width == 0) bin_width = 1;
  std::map<std::size_t, std::size_t> bins;
  for (const auto& r : records) {
    const auto& src = language == Language::Fortran ? r.fortran : r.cpp;
    const auto lines = detail::split_lines(src).size();
    ++bins[(lines / bin_width) * bin_width];
  }
  return bins;
}

std::string render_bar_chart(const std::vector<std::pair<std::string, std::size_t>>& rows, std::size_t width) {
  std::size_t label_width = 0;
  std::size_t max_count = 0;
  for (const auto& [label, count] : rows) {
    label_width = std::max(label_width, label.size());
    max_count = std::max(max_count, count);
  }
  std::string out;
  for (const auto& [label, count] : rows) {
    const auto bar = max_count == 0 ? 0 : (count * width + max_count - 1) / max_count;
    out += label + std::string(label_width - label.size(), ' ') + " | " + std::string(bar, '#') + ' ' +
           std::to_string(count) + '\n';
  }
  return out;
}

std::vector<ToolOutcome> replay_pair(const PairRecord& record, const fs::path& scratch_root, int timeout_s) {
  auto ws = Workspace::create(scratch_root);
  bool fixed_form = false;
  for (const auto& o : record.evidence) {
    if (o.kind == ToolKind::CompileFortran) {
      const auto& cmd = o.command_line;
      fixed_form = cmd.find(" test.f ") != std::string::npos ||
                   (cmd.size() >= 7 && cmd.compare(cmd.size() - 7, 7, " test.f") == 0);
    }
  }
  ws.write(fixed_form ? "test.f" : "test.f90", record.fortran_with_tests);
  ws.write("test.cpp", record.cpp_with_tests);
  std::vector<ToolOutcome> outcomes;
  for (const auto& o : record.evidence) {
    auto r = run_process({"/bin/sh", "-c", o.command_line}, ws.root(), timeout_s, {});
    outcomes.push_back(ToolOutcome{o.kind, r.exit_code, std::move(r.stdout_text), std::move(r.stderr_text),
                                   r.timed_out, r.wall_time_ms, o.command_line});
  }
  return outcomes;
}

}  // namespace f2c
