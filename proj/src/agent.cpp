#include "f2c/agent.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "text_util.hpp"

namespace f2c {

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Translate: return "Translate";
    case ActionKind::GenerateTestCases: return "GenerateTestCases";
    case ActionKind::CompilationFixing: return "CompilationFixing";
    case ActionKind::ExecutionFixing: return "ExecutionFixing";
    case ActionKind::InspectTestCaseResults: return "InspectTestCaseResults";
    case ActionKind::KeepConsistency: return "KeepConsistency";
  }
  return "?";
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Preprocessed: return "Preprocessed";
    case Phase::Translated: return "Translated";
    case Phase::TestsGenerated: return "TestsGenerated";
    case Phase::CompileChecked: return "CompileChecked";
    case Phase::ExecChecked: return "ExecChecked";
    case Phase::Verified: return "Verified";
  }
  return "?";
}

void AgentMemory::append(Role role, std::string content) {
  messages_.push_back(Message{role, std::move(content), next_timestamp()});
}

void AgentMemory::append(const std::vector<Message>& delta) {
  for (const auto& m : delta) append(m.role, m.content);
}

OutcomeClass classify(const ToolOutcome& outcome) {
  if (!outcome.ok()) return OutcomeClass::Failed;
  static const std::regex failure(R"(\bfail(ed|ure|s)?\b)", std::regex::icase);
  if (std::regex_search(outcome.stdout_text, failure) || std::regex_search(outcome.stderr_text, failure)) {
    return OutcomeClass::TestFailureReported;
  }
  return OutcomeClass::Ok;
}

std::string format_run_result(std::string_view label, const std::optional<ToolOutcome>& outcome) {
  std::string out(label);
  if (!outcome) return out + " was not run.";
  out += " Stdout: " + outcome->stdout_text;
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += std::string(label) + " Stderr: " + outcome->stderr_text;
  if (outcome->timed_out) {
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += std::string(label) + " run timed out.";
  } else if (outcome->exit_code && *outcome->exit_code != 0) {
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += std::string(label) + " exit code: " + std::to_string(*outcome->exit_code);
  }
  return out;
}

namespace {

std::string compile_reason(const ToolOutcome& o) {
  std::string reason = o.stderr_text.empty() ? o.stdout_text : o.stderr_text;
  if (o.timed_out) reason += "\n(compilation timed out)";
  return std::string(detail::trim_right(reason));
}

Bindings bindings_from(const AgentMemory& memory) {
  const auto& f = memory.facts;
  Bindings b;
  b["fortran_code"] = f.current_fortran;
  b["Fortran_Code"] = f.current_fortran;
  b["ser_answer"] = f.translation_answer;
  b["fortran_run_result"] = format_run_result("Fortran", f.last_fortran_outcome);
  b["cpp_run_result"] = format_run_result("C++", f.last_cpp_outcome);
  b["fortran_compile_run_result"] = b["fortran_run_result"];
  b["cpp_compile_run_result"] = b["cpp_run_result"];
  return b;
}

OutcomeClass class_of(const std::optional<ToolOutcome>& o) {
  return o ? classify(*o) : OutcomeClass::Failed;
}

[[noreturn]] void no_row(const Environment& env, std::string_view why) {
  throw Error(ErrorCode::MissingTemplate,
              "no question for phase " + std::string(to_string(env.phase)) + " (" + std::string(why) + ")");
}

}  // namespace

std::pair<Action, Question> questioner_step(const AgentMemory& memory, const Environment& environment,
                                            const PromptLibrary& prompts, const QuestionerOptions& options) {
  auto bindings = bindings_from(memory);
  const auto& facts = memory.facts;

  switch (environment.phase) {
    case Phase::Preprocessed: {
      if (facts.current_fortran.empty()) throw Error(ErrorCode::UnboundPlaceholder, "fortran_code");
      return {Action{ActionKind::Translate, {}}, prompts.render(options.translate_template, bindings)};
    }
    case Phase::Translated: {
      if (facts.translation_answer.empty()) throw Error(ErrorCode::UnboundPlaceholder, "ser_answer");
      return {Action{ActionKind::GenerateTestCases, {}}, prompts.render("q_ask_s_unit_test", bindings)};
    }
    case Phase::CompileChecked: {
      if (class_of(facts.last_fortran_outcome) == OutcomeClass::Failed) {
        if (!facts.last_fortran_outcome) throw Error(ErrorCode::UnboundPlaceholder, "reason");
        bindings["reason"] = compile_reason(*facts.last_fortran_outcome);
        return {Action{ActionKind::CompilationFixing, {{"language", "fortran"}}},
                prompts.render("fortran_compile_fix", bindings)};
      }
      if (class_of(facts.last_cpp_outcome) == OutcomeClass::Failed) {
        if (!facts.last_cpp_outcome) throw Error(ErrorCode::UnboundPlaceholder, "reason");
        bindings["reason"] = compile_reason(*facts.last_cpp_outcome);
        return {Action{ActionKind::CompilationFixing, {{"language", "cpp"}}},
                prompts.render("compiler_check_prompt", bindings)};
      }
      no_row(environment, "both compiles succeeded");
    }
    case Phase::ExecChecked: {
      const auto fc = class_of(facts.last_fortran_outcome);
      const auto cc = class_of(facts.last_cpp_outcome);
      if (fc == OutcomeClass::Failed) {
        return {Action{ActionKind::ExecutionFixing, {{"language", "fortran"}}},
                prompts.render("execution_fix", bindings)};
      }
      if (cc == OutcomeClass::Failed) {
        return {Action{ActionKind::ExecutionFixing, {{"language", "cpp"}}}, prompts.render("execution_fix", bindings)};
      }
      if (fc == OutcomeClass::TestFailureReported || cc == OutcomeClass::TestFailureReported) {
        return {Action{ActionKind::InspectTestCaseResults, {}}, prompts.render("inspect_test_results", bindings)};
      }
      return {Action{ActionKind::KeepConsistency, {}}, prompts.render("ft_ct_further_check", bindings)};
    }
    case Phase::TestsGenerated:
      no_row(environment, "tests are compiled, not asked about");
    case Phase::Verified:
      no_row(environment, "session already verified");
  }
  no_row(environment, "unknown phase");
}

// ---------------------------------------------------------------------------
// Code blocks

namespace {

std::optional<std::string> canonical_language(std::string_view tag) {
  static const std::set<std::string, std::less<>> cpp = {"cpp", "c++", "cxx", "cc", "hpp", "h++", "c"};
  static const std::set<std::string, std::less<>> fortran = {"fortran", "f90", "f95", "f03", "f08", "f",
                                                               "for",     "f77", "fortran90", "fortran95", "fortran77"};
  auto lower = detail::to_lower(tag);
  if (cpp.contains(lower)) return "cpp";
  if (fortran.contains(lower)) return "fortran";
  return std::nullopt;
}

struct Fenced {
  std::string info;  // canonical language or the raw lower-cased tag
  bool tagged = false;
  std::string body;
};

std::vector<Fenced> fenced_blocks(std::string_view response) {
  std::vector<Fenced> blocks;
  const auto lines = detail::split_lines(response);
  std::size_t i = 0;
  while (i < lines.size()) {
    auto line = lines[i];
    auto indent = line.find_first_not_of(" \t");
    if (indent == std::string_view::npos || line.substr(indent, 3) != "```") {
      ++i;
      continue;
    }
    auto info_text = detail::trim(line.substr(indent + 3));
    auto first_word = info_text.substr(0, info_text.find_first_of(" \t{"));
    Fenced block;
    block.tagged = !first_word.empty();
    if (block.tagged) {
      auto canon = canonical_language(first_word);
      block.info = canon ? *canon : detail::to_lower(first_word);
    }
    std::string body;
    bool first = true;
    ++i;
    while (i < lines.size()) {
      auto l = lines[i];
      auto t = detail::trim(l);
      if (t.size() >= 3 && t.substr(0, 3) == "```" && t.find_first_not_of('`') == std::string_view::npos) {
        ++i;
        break;
      }
      std::size_t strip = 0;
      while (strip < indent && strip < l.size() && (l[strip] == ' ' || l[strip] == '\t')) ++strip;
      if (!first) body += '\n';
      body.append(l.substr(strip));
      first = false;
      ++i;
    }
    block.body = std::string(detail::trim_right(body));
    blocks.push_back(std::move(block));
  }
  return blocks;
}

bool looks_like(std::string_view language, std::string_view text) {
  static const std::regex fortran_unit(
      R"((^|\n)\s*((recursive|pure|elemental|integer|real|logical|double\s+precision|complex|character)[^\n]*\s+)?(program|module|subroutine|function)\s+\w+)",
      std::regex::icase);
  static const std::regex fortran_end(R"((^|\n)\s*end\b)", std::regex::icase);
  static const std::regex cpp_marks(R"(#\s*include|\bint\s+main\s*\(|\bstd::|[;{}]\s*($|\n))");
  const std::string s(text);
  if (language == "fortran") return std::regex_search(s, fortran_unit) && std::regex_search(s, fortran_end);
  if (language == "cpp") return std::regex_search(s, cpp_marks) && s.find('{') != std::string::npos;
  return false;
}

// Without fences: the span from the first line that opens a unit of the
// hinted language to the last line that closes one.
std::optional<std::string> unfenced_region(std::string_view response, std::string_view language) {
  const auto lines = detail::split_lines(response);
  std::optional<std::size_t> start;
  std::optional<std::size_t> stop;
  if (language == "fortran") {
    static const std::regex open(
        R"(^\s*(((recursive|pure|elemental|integer|real|logical|double\s+precision|complex|character)(\([^)]*\))?\s+)*(program|module|subroutine|function)\s+\w+.*)$)",
        std::regex::icase);
    static const std::regex close(R"(^\s*end(\s+(program|module|subroutine|function)\b.*)?\s*$)", std::regex::icase);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string l(lines[i]);
      if (!start && std::regex_match(l, open)) start = i;
      if (start && std::regex_match(l, close)) stop = i;
    }
  } else if (language == "cpp") {
    static const std::regex open(R"(^\s*(#\s*include\b.*|([\w:<>,*&]+\s+)+[\w:~]+\s*\([^;]*\)\s*(const\s*)?\{?\s*)$)");
    int depth = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      std::string l(lines[i]);
      if (!start) {
        if (!std::regex_match(l, open)) continue;
        start = i;
      }
      for (char c : l) {
        if (c == '{') ++depth;
        if (c == '}') --depth;
      }
      if (depth < 0) break;
      if (depth == 0 && l.find('}') != std::string::npos) stop = i;
    }
  }
  if (!start || !stop || *stop < *start) return std::nullopt;
  std::string region;
  for (std::size_t i = *start; i <= *stop; ++i) {
    if (i > *start) region += '\n';
    region.append(lines[i]);
  }
  if (!looks_like(language, region)) return std::nullopt;
  return region;
}

}  // namespace

std::vector<std::string> extract_code_blocks(std::string_view response, const std::optional<std::string>& language_hint) {
  const auto blocks = fenced_blocks(response);
  std::vector<std::string> out;
  if (!language_hint) {
    for (const auto& b : blocks) out.push_back(b.body);
    return out;
  }
  const auto hint = canonical_language(*language_hint).value_or(detail::to_lower(*language_hint));
  for (const auto& b : blocks) {
    if (b.tagged && b.info == hint) out.push_back(b.body);
  }
  if (!out.empty()) return out;
  for (const auto& b : blocks) {
    if (!b.tagged && looks_like(hint, b.body)) out.push_back(b.body);
  }
  if (!out.empty() || !blocks.empty()) return out;
  if (auto region = unfenced_region(response, hint)) out.push_back(std::move(*region));
  return out;
}

std::optional<bool> parse_verdict(std::string_view reply) {
  std::size_t i = 0;
  auto skippable = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || std::ispunct(static_cast<unsigned char>(c));
  };
  while (i < reply.size() && skippable(reply[i])) ++i;
  std::size_t j = i;
  while (j < reply.size() && std::isalpha(static_cast<unsigned char>(reply[j]))) ++j;
  const auto word = detail::to_lower(reply.substr(i, j - i));
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Solver

namespace {

std::optional<std::string> last_block(std::string_view reply, const char* language) {
  auto blocks = extract_code_blocks(reply, std::string(language));
  if (blocks.empty()) return std::nullopt;
  return std::move(blocks.back());
}

Action step(ActionKind kind, std::map<std::string, std::string, std::less<>> payload = {}) {
  return Action{kind, std::move(payload)};
}

}  // namespace

SolverResult solver_step(const Question& question, const Action& asked, const AgentMemory& memory,
                         const Environment& environment, LlmBackend& backend, const SolverOptions& options) {
  (void)environment;
  ChatRequest request;
  request.messages = memory.messages();
  request.messages.push_back(Message{Role::User, question.text, memory.next_timestamp()});
  request.temperature = options.temperature;
  request.max_output_tokens = options.max_output_tokens;
  request.model_name = options.model;
  request.session = options.session;

  const auto response = backend.chat(request);

  std::vector<Message> delta{request.messages.back(),
                             Message{Role::Assistant, response.content, memory.next_timestamp() + 1}};
  if (detail::trim(response.content).empty()) {
    // Keep the dialogue well formed: an empty assistant turn is not allowed.
    delta.back().content = "(empty response)";
    throw SolverError(ErrorCode::EmptyResponse, "backend returned no content", std::move(delta));
  }
  const std::string& reply = response.content;

  SolverResult result;
  auto fail = [&](ErrorCode code, const std::string& what) -> SolverError {
    return SolverError(code, what, delta);
  };

  switch (asked.kind) {
    case ActionKind::Translate: {
      auto cpp = last_block(reply, "cpp");
      if (!cpp) throw fail(ErrorCode::NoCodeBlockFound, "translation reply has no C++ code");
      result.plan.steps.push_back(step(ActionKind::GenerateTestCases, {{"cpp", *cpp}}));
      result.plan.rationale = "translation received; generate unit tests for both languages next";
      break;
    }
    case ActionKind::GenerateTestCases: {
      auto fortran = last_block(reply, "fortran");
      auto cpp = last_block(reply, "cpp");
      if (!fortran || !cpp) {
        throw fail(ErrorCode::NoCodeBlockFound,
                   std::string("unit test reply lacks ") + (!fortran ? "Fortran" : "C++") + " code");
      }
      result.plan.steps.push_back(step(ActionKind::CompilationFixing, {{"fortran", *fortran}, {"cpp", *cpp}}));
      result.plan.steps.push_back(step(ActionKind::ExecutionFixing));
      result.plan.rationale = "test-bearing programs received; compile both, then run both";
      break;
    }
    case ActionKind::CompilationFixing: {
      auto it = asked.payload.find("language");
      const std::string language = it == asked.payload.end() ? "cpp" : it->second;
      auto code = last_block(reply, language.c_str());
      if (!code) throw fail(ErrorCode::NoCodeBlockFound, "fix reply has no " + language + " code");
      result.plan.steps.push_back(step(ActionKind::CompilationFixing, {{language, *code}}));
      result.plan.steps.push_back(step(ActionKind::ExecutionFixing));
      result.plan.rationale = "fixed " + language + " code received; recompile and rerun";
      break;
    }
    case ActionKind::ExecutionFixing:
    case ActionKind::InspectTestCaseResults: {
      auto fortran = last_block(reply, "fortran");
      auto cpp = last_block(reply, "cpp");
      if (!fortran && !cpp) throw fail(ErrorCode::NoCodeBlockFound, "fix reply has no code");
      std::map<std::string, std::string, std::less<>> payload;
      if (fortran) payload["fortran"] = *fortran;
      if (cpp) payload["cpp"] = *cpp;
      result.plan.steps.push_back(step(ActionKind::CompilationFixing, std::move(payload)));
      result.plan.steps.push_back(step(ActionKind::ExecutionFixing));
      result.plan.rationale = "updated code received; recompile and rerun";
      break;
    }
    case ActionKind::KeepConsistency: {
      auto verdict = parse_verdict(reply);
      if (!verdict) throw fail(ErrorCode::NoVerdict, "reply is neither yes nor no");
      if (*verdict) {
        result.plan.steps.push_back(step(ActionKind::KeepConsistency, {{"verdict", "yes"}}));
        result.plan.rationale = "translation confirmed; keep the pair";
      } else {
        result.plan.steps.push_back(step(options.retry_action, {{"verdict", "no"}}));
        result.plan.rationale = "translation rejected by the verdict; go back";
      }
      break;
    }
  }
  result.memory_delta = std::move(delta);
  return result;
}

}  // namespace f2c
