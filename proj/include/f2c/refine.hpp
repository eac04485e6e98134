#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "f2c/agent.hpp"
#include "f2c/dataset.hpp"
#include "f2c/llm_backend.hpp"
#include "f2c/preprocess.hpp"
#include "f2c/prompts.hpp"
#include "f2c/sandbox.hpp"

namespace f2c {

enum class SessionStatus { Running, Accepted, Rejected };
enum class RejectReason { FilteredOut, BudgetExhausted, BackendFailure, VerdictNo };
std::string_view to_string(SessionStatus status);
std::string_view to_string(RejectReason reason);

/// Fix rounds shared by every error class of one session.
struct RefinementBudget {
  int max_rounds = 5;
  int rounds_used = 0;

  bool exhausted() const { return rounds_used >= max_rounds; }
  // Throws Error{BudgetExhausted} instead of going past max_rounds.
  void consume();
};

// Where a "No" verdict sends the session.
enum class RetryEntry { UnitTests, Translation };
std::string_view to_string(RetryEntry entry);
RetryEntry retry_entry_from_string(std::string_view text);  // throws Error{Config}

struct SessionConfig {
  int max_rounds = 5;
  int exec_timeout_s = 60;
  RetryEntry retry_entry = RetryEntry::UnitTests;
  QuestionerOptions questioner;
  // model, temperature and max_output_tokens; session is set per seed.
  SolverOptions solver;
  std::filesystem::path scratch_root = std::filesystem::temp_directory_path();
  // When set, every intermediate source and outcome of a session is kept
  // under audit_dir/<seed id>/.
  std::optional<std::filesystem::path> audit_dir;
};

struct SessionState {
  SourceUnit seed;
  AgentMemory memory;
  Environment environment;
  RefinementBudget budget;
  SessionStatus status = SessionStatus::Running;
  std::optional<RejectReason> reject_reason;
  std::string reject_detail;
  // Outcomes of the latest verification, in evidence order.
  std::vector<ToolOutcome> evidence;
};

struct SessionResult {
  std::string id;
  SessionStatus status = SessionStatus::Running;
  std::optional<RejectReason> reject_reason;
  std::string detail;
  int rounds_used = 0;
  std::optional<PairRecord> pair;
  Dialogue dialogue;
  std::vector<FilterReason> filter_reasons;
};

enum class Verdict { Accept, Retry };

/// Drives one seed through translation, unit-test generation, the
/// compile/run/fix loop and the final verdict. Owns one workspace for its
/// lifetime.
class Session {
 public:
  Session(SourceUnit seed, const SessionConfig& config, const PromptLibrary& prompts, const Sandbox& sandbox,
          LlmBackend& backend);

  /// Runs to a terminal state. Backend failures (network, rate limit,
  /// server error, empty reply) end in Rejected{BackendFailure}; script
  /// exhaustion, replay mismatch and auth failures propagate.
  SessionResult run();

  // Single steps, exposed for tests.

  // Compiles both test-bearing programs and, if both compile, runs both.
  // Leaves the phase at CompileChecked or ExecChecked.
  void verify();
  /// One fix cycle for the highest-priority failure: asks the questioner,
  /// applies the solver's code, then verifies again. Throws
  /// Error{BudgetExhausted} when no round is left.
  void refinement_round();
  /// Asks for the yes/no verdict. Throws Error{PreconditionViolation} unless
  /// both test runs exited 0.
  Verdict final_verification();

  SessionState& state() { return state_; }
  const SessionState& state() const { return state_; }
  const Workspace& workspace() const { return workspace_; }

 private:
  SolverResult exchange(const Action& asked, const Question& question);
  SolverResult ask(const Action& asked, const Question& question);
  void translate();
  void generate_tests();
  void apply_code(const Action& step);
  void reject(RejectReason reason, std::string detail);
  void audit(const std::string& name, std::string_view content);
  void audit_outcome(const ToolOutcome& outcome);
  SessionResult result() const;

  const SessionConfig& config_;
  const PromptLibrary& prompts_;
  const Sandbox& sandbox_;
  LlmBackend& backend_;
  SessionState state_;
  Workspace workspace_;
  SolverOptions solver_options_;
  int audit_seq_ = 0;
};

// Runs a session for an already filtered seed.
SessionResult translate_seed(const SourceUnit& seed, const SessionConfig& config, const PromptLibrary& prompts,
                             const Sandbox& sandbox, LlmBackend& backend);

struct CorpusOptions {
  SessionConfig session;
  FilterOptions filter;
  int workers = 1;
};

struct RunReport {
  std::size_t seeds = 0;
  std::size_t filtered_out = 0;
  std::size_t sessions = 0;
  std::size_t accepted = 0;
  std::size_t budget_exhausted = 0;
  std::size_t backend_failure = 0;
  std::size_t verdict_no = 0;
  std::size_t rounds_total = 0;
  std::string started_at;
  std::string finished_at;

  // accepted / seeds; absent with no seeds.
  std::optional<double> acceptance_rate() const;
  // accepted / sessions; absent with no sessions.
  std::optional<double> session_acceptance_rate() const;
};

struct CorpusResult {
  RunReport report;
  std::vector<SessionResult> sessions;  // seed order, including filtered seeds
};

/// Filters every seed, then runs the accepted ones on a bounded worker pool.
/// Results keep seed order. Fatal backend errors stop the pool and are
/// rethrown after all workers joined.
CorpusResult run_corpus(const std::vector<SourceUnit>& seeds, const CorpusOptions& options,
                        const PromptLibrary& prompts, const Sandbox& sandbox, LlmBackend& backend);

/// The report as written to run_report.json. `extra` (config, toolchain) is
/// merged in after the counts.
nlohmann::ordered_json run_report_json(const CorpusResult& result, const nlohmann::ordered_json& extra = {},
                               bool include_timestamps = true);

std::string utc_timestamp();

}  // namespace f2c
