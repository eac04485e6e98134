#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "f2c/error.hpp"
#include "f2c/llm_backend.hpp"
#include "f2c/message.hpp"
#include "f2c/prompts.hpp"
#include "f2c/sandbox.hpp"

namespace f2c {

// The solver's action set.
enum class ActionKind {
  Translate,
  GenerateTestCases,
  CompilationFixing,
  ExecutionFixing,
  InspectTestCaseResults,
  KeepConsistency,
};
std::string_view to_string(ActionKind kind);

struct Action {
  ActionKind kind = ActionKind::Translate;
  std::map<std::string, std::string, std::less<>> payload;

  friend bool operator==(const Action&, const Action&) = default;
};

struct Plan {
  std::vector<Action> steps;  // never empty
  std::string rationale;

  friend bool operator==(const Plan&, const Plan&) = default;
};

enum class Phase { Preprocessed, Translated, TestsGenerated, CompileChecked, ExecChecked, Verified };
std::string_view to_string(Phase phase);

struct Facts {
  std::string current_fortran;
  std::string current_cpp;
  std::string fortran_with_tests;
  std::string cpp_with_tests;
  // Reply that carried the latest translation; bound as {ser_answer}.
  std::string translation_answer;
  std::optional<ToolOutcome> last_fortran_outcome;
  std::optional<ToolOutcome> last_cpp_outcome;
};

/// Message log plus labelled artifacts. The log is append-only.
class AgentMemory {
 public:
  const std::vector<Message>& messages() const { return messages_; }
  void append(Role role, std::string content);
  void append(const std::vector<Message>& delta);
  std::uint64_t next_timestamp() const { return messages_.empty() ? 1 : messages_.back().timestamp + 1; }

  Facts facts;

 private:
  std::vector<Message> messages_;
};

struct Environment {
  Phase phase = Phase::Preprocessed;
  std::vector<ToolOutcome> tool_feedback;
  int iteration = 0;
};

enum class OutcomeClass { Ok, Failed, TestFailureReported };

/// Failed: nonzero exit or timeout. TestFailureReported: exit 0 but the
/// output contains a failure report ("fail", "failed", "failure" as a word,
/// any case).
OutcomeClass classify(const ToolOutcome& outcome);

struct QuestionerOptions {
  // Template for the Translate row; "prompts_fortran_to_cpp" is the
  // alternative shipped instruction.
  std::string translate_template = "q_ask_s_translation";
};

/// Deterministic decision table over (phase, outcome class). Throws
/// MissingTemplate when no row applies or the template is absent, and
/// UnboundPlaceholder when memory lacks a binding the template needs.
std::pair<Action, Question> questioner_step(const AgentMemory& memory, const Environment& environment,
                                            const PromptLibrary& prompts, const QuestionerOptions& options = {});

// "Fortran Stdout: ...\nFortran Stderr: ..." (+ exit status when not clean).
std::string format_run_result(std::string_view label, const std::optional<ToolOutcome>& outcome);

struct SolverOptions {
  std::string model;
  double temperature = 0.2;
  int max_output_tokens = 1024;
  std::string session;
  // Step planned after a "No" verdict.
  ActionKind retry_action = ActionKind::GenerateTestCases;
};

struct SolverResult {
  Plan plan;
  // Exactly two messages: the question (user) and the reply (assistant).
  std::vector<Message> memory_delta;

  const std::vector<Action>& actions() const { return plan.steps; }
};

/// Raised by solver_step after the exchange took place, so the caller can
/// still record it.
class SolverError : public Error {
 public:
  SolverError(ErrorCode code, const std::string& message, std::vector<Message> delta)
      : Error(code, message), memory_delta(std::move(delta)) {}
  std::vector<Message> memory_delta;
};

/// Sends the dialogue so far plus `question` to the backend and turns the
/// reply into a plan. `asked` is the action the question was rendered for.
/// Throws SolverError{EmptyResponse | NoCodeBlockFound | NoVerdict}; backend
/// errors propagate unchanged.
SolverResult solver_step(const Question& question, const Action& asked, const AgentMemory& memory,
                         const Environment& environment, LlmBackend& backend, const SolverOptions& options = {});

/// Bodies of ``` fenced blocks, in order. With a hint ("cpp", "fortran" and
/// their usual aliases) only blocks tagged for that language are returned;
/// untagged blocks count when no tagged block matches and they look like the
/// language. Without any fence, falls back to the longest region that looks
/// like the hinted language.
std::vector<std::string> extract_code_blocks(std::string_view response,
                                             const std::optional<std::string>& language_hint = std::nullopt);

/// Leading "yes"/"no" (case-insensitive) after trimming whitespace,
/// quotes, markdown emphasis and punctuation.
std::optional<bool> parse_verdict(std::string_view reply);

}  // namespace f2c
