#include "f2c/refine.hpp"

#include <atomic>
#include <ctime>
#include <exception>
#include <mutex>
#include <thread>

#include "f2c/error.hpp"
#include "f2c/source_edit.hpp"
#include "text_util.hpp"

namespace f2c {

namespace fs = std::filesystem;

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::Running: return "Running";
    case SessionStatus::Accepted: return "Accepted";
    case SessionStatus::Rejected: return "Rejected";
  }
  return "?";
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::FilteredOut: return "FilteredOut";
    case RejectReason::BudgetExhausted: return "BudgetExhausted";
    case RejectReason::BackendFailure: return "BackendFailure";
    case RejectReason::VerdictNo: return "VerdictNo";
  }
  return "?";
}

std::string_view to_string(RetryEntry entry) {
  return entry == RetryEntry::UnitTests ? "unit_tests" : "translation";
}

RetryEntry retry_entry_from_string(std::string_view text) {
  if (text == "unit_tests") return RetryEntry::UnitTests;
  if (text == "translation") return RetryEntry::Translation;
  throw Error(ErrorCode::Config, "retry_entry_phase must be unit_tests or translation, got '" + std::string(text) + "'");
}

void RefinementBudget::consume() {
  if (exhausted()) {
    throw Error(ErrorCode::BudgetExhausted, "all " + std::to_string(max_rounds) + " refinement rounds used");
  }
  ++rounds_used;
}

namespace {

bool is_backend_failure(ErrorCode code) {
  return code == ErrorCode::Network || code == ErrorCode::RateLimited || code == ErrorCode::BackendError ||
         code == ErrorCode::EmptyResponse;
}

bool runs_clean(const SessionState& s) {
  const auto& f = s.memory.facts;
  return s.environment.phase == Phase::ExecChecked && f.last_fortran_outcome && f.last_cpp_outcome &&
         f.last_fortran_outcome->kind == ToolKind::Execute && f.last_cpp_outcome->kind == ToolKind::Execute &&
         classify(*f.last_fortran_outcome) == OutcomeClass::Ok && classify(*f.last_cpp_outcome) == OutcomeClass::Ok;
}

std::string safe_name(std::string_view id) {
  std::string out;
  for (char c : id) out += detail::is_word_char(c) || c == '.' || c == '-' ? c : '_';
  return out.empty() ? "_" : out;
}

}  // namespace

Session::Session(SourceUnit seed, const SessionConfig& config, const PromptLibrary& prompts, const Sandbox& sandbox,
                 LlmBackend& backend)
    : config_(config),
      prompts_(prompts),
      sandbox_(sandbox),
      backend_(backend),
      state_{std::move(seed), {}, {}, RefinementBudget{config.max_rounds, 0}, SessionStatus::Running, {}, {}, {}},
      workspace_(Workspace::create(config.scratch_root)),
      solver_options_(config.solver) {
  if (config.max_rounds < 1) throw Error(ErrorCode::Config, "max_rounds must be at least 1");
  state_.memory.facts.current_fortran = state_.seed.text();
  solver_options_.session = state_.seed.id();
}

SolverResult Session::exchange(const Action& asked, const Question& question) {
  try {
    auto result = solver_step(question, asked, state_.memory, state_.environment, backend_, solver_options_);
    state_.memory.append(result.memory_delta);
    return result;
  } catch (const SolverError& e) {
    state_.memory.append(e.memory_delta);
    throw;
  }
}

SolverResult Session::ask(const Action& asked, const Question& question) {
  Question q = question;
  for (;;) {
    try {
      return exchange(asked, q);
    } catch (const SolverError& e) {
      if (e.code() != ErrorCode::NoCodeBlockFound) throw;
      state_.budget.consume();
      const bool tests = asked.kind == ActionKind::GenerateTestCases;
      q = prompts_.render("code_block_request", {{"language", tests ? "Fortran and C++" : "C++"},
                                                 {"fence", tests ? "fortran block and a ```cpp" : "cpp"}});
    }
  }
}

void Session::translate() {
  state_.environment.phase = Phase::Preprocessed;
  auto [action, question] = questioner_step(state_.memory, state_.environment, prompts_, config_.questioner);
  auto result = ask(action, question);
  auto& facts = state_.memory.facts;
  facts.current_cpp = result.actions().front().payload.at("cpp");
  facts.translation_answer = state_.memory.messages().back().content;
  audit("translation.cpp", facts.current_cpp);
  state_.environment.phase = Phase::Translated;
}

void Session::generate_tests() {
  state_.environment.phase = Phase::Translated;
  auto [action, question] = questioner_step(state_.memory, state_.environment, prompts_, config_.questioner);
  auto result = ask(action, question);
  const auto& payload = result.actions().front().payload;
  auto& facts = state_.memory.facts;
  facts.fortran_with_tests = install_entry(facts.current_fortran, payload.at("fortran"), Language::Fortran);
  facts.cpp_with_tests = install_entry(facts.current_cpp, payload.at("cpp"), Language::Cpp);
  state_.environment.phase = Phase::TestsGenerated;
}

void Session::apply_code(const Action& step) {
  auto& facts = state_.memory.facts;
  if (auto it = step.payload.find("fortran"); it != step.payload.end()) {
    facts.fortran_with_tests = install_entry(facts.fortran_with_tests, it->second, Language::Fortran);
  }
  if (auto it = step.payload.find("cpp"); it != step.payload.end()) {
    facts.cpp_with_tests = install_entry(facts.cpp_with_tests, it->second, Language::Cpp);
    facts.current_cpp = carry_definitions(facts.current_cpp, facts.cpp_with_tests, Language::Cpp);
  }
}

void Session::verify() {
  auto& facts = state_.memory.facts;
  const bool fixed = state_.seed.form() == SourceForm::Fixed;
  audit(fixed ? "fortran_with_tests.f" : "fortran_with_tests.f90", facts.fortran_with_tests);
  audit("cpp_with_tests.cpp", facts.cpp_with_tests);

  auto cf = sandbox_.compile_fortran(facts.fortran_with_tests, workspace_, state_.seed.form());
  auto cc = sandbox_.compile_cpp(facts.cpp_with_tests, workspace_);
  audit_outcome(cf);
  audit_outcome(cc);
  state_.evidence = {cf, cc};
  facts.last_fortran_outcome = cf;
  facts.last_cpp_outcome = cc;
  if (!cf.ok() || !cc.ok()) {
    state_.environment.phase = Phase::CompileChecked;
    state_.environment.tool_feedback = state_.evidence;
    return;
  }
  auto rf = sandbox_.execute("test_f", workspace_, config_.exec_timeout_s);
  auto rc = sandbox_.execute("test_cpp", workspace_, config_.exec_timeout_s);
  audit_outcome(rf);
  audit_outcome(rc);
  state_.evidence.push_back(rf);
  state_.evidence.push_back(rc);
  facts.last_fortran_outcome = std::move(rf);
  facts.last_cpp_outcome = std::move(rc);
  state_.environment.phase = Phase::ExecChecked;
  state_.environment.tool_feedback = state_.evidence;
}

void Session::refinement_round() {
  if (state_.status != SessionStatus::Running) {
    throw Error(ErrorCode::PreconditionViolation, "session is not running");
  }
  if (state_.budget.exhausted()) state_.budget.consume();  // throws
  auto [action, question] = questioner_step(state_.memory, state_.environment, prompts_, config_.questioner);
  state_.budget.consume();
  ++state_.environment.iteration;
  try {
    auto result = exchange(action, question);
    for (const auto& step : result.actions()) {
      if (step.kind == ActionKind::CompilationFixing) apply_code(step);
    }
  } catch (const SolverError& e) {
    // A reply without code spends the round and changes nothing.
    if (e.code() != ErrorCode::NoCodeBlockFound) throw;
  }
  state_.environment.phase = Phase::TestsGenerated;
  verify();
}

Verdict Session::final_verification() {
  if (!runs_clean(state_)) {
    throw Error(ErrorCode::PreconditionViolation, "final verification needs both test programs to run with exit 0");
  }
  auto [action, question] = questioner_step(state_.memory, state_.environment, prompts_, config_.questioner);
  std::optional<SolverResult> result;
  try {
    result = exchange(action, question);
  } catch (const SolverError& e) {
    if (e.code() != ErrorCode::NoVerdict) throw;
    try {
      result = exchange(action, prompts_.render("verdict_clarify", {}));
    } catch (const SolverError& again) {
      if (again.code() != ErrorCode::NoVerdict) throw;
      return Verdict::Retry;
    }
  }
  const auto& step = result->actions().front();
  auto it = step.payload.find("verdict");
  return it != step.payload.end() && it->second == "yes" ? Verdict::Accept : Verdict::Retry;
}

void Session::reject(RejectReason reason, std::string detail) {
  state_.status = SessionStatus::Rejected;
  state_.reject_reason = reason;
  state_.reject_detail = std::move(detail);
}

SessionResult Session::run() {
  try {
    translate();
    generate_tests();
    verify();
    while (state_.status == SessionStatus::Running) {
      if (runs_clean(state_)) {
        if (final_verification() == Verdict::Accept) {
          state_.status = SessionStatus::Accepted;
          state_.environment.phase = Phase::Verified;
          break;
        }
        if (state_.budget.exhausted()) {
          reject(RejectReason::VerdictNo, "verdict was No with no refinement rounds left");
          break;
        }
        state_.budget.consume();
        if (config_.retry_entry == RetryEntry::Translation) translate();
        generate_tests();
        verify();
        continue;
      }
      if (state_.budget.exhausted()) {
        reject(RejectReason::BudgetExhausted, "failures persist after " + std::to_string(state_.budget.rounds_used) +
                                                  " refinement rounds");
        break;
      }
      refinement_round();
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BudgetExhausted) {
      reject(RejectReason::BudgetExhausted, e.detail());
    } else if (is_backend_failure(e.code())) {
      reject(RejectReason::BackendFailure, e.what());
    } else {
      throw;
    }
  }
  return result();
}

SessionResult Session::result() const {
  SessionResult r;
  r.id = state_.seed.id();
  r.status = state_.status;
  r.reject_reason = state_.reject_reason;
  r.detail = state_.reject_detail;
  r.rounds_used = state_.budget.rounds_used;
  r.dialogue = Dialogue{state_.seed.id(), state_.memory.messages()};
  if (state_.status == SessionStatus::Accepted) {
    const auto& f = state_.memory.facts;
    r.pair = PairRecord{state_.seed.id(), f.current_fortran, f.current_cpp, f.fortran_with_tests, f.cpp_with_tests,
                        state_.evidence, state_.budget.rounds_used};
  }
  return r;
}

void Session::audit(const std::string& name, std::string_view content) {
  if (!config_.audit_dir) return;
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%03d-", ++audit_seq_);
  detail::write_file(*config_.audit_dir / safe_name(state_.seed.id()) / (prefix + name), content);
}

void Session::audit_outcome(const ToolOutcome& outcome) {
  if (!config_.audit_dir) return;
  audit(std::string(to_string(outcome.kind)) + ".json", to_json(outcome).dump(2));
}

SessionResult translate_seed(const SourceUnit& seed, const SessionConfig& config, const PromptLibrary& prompts,
                             const Sandbox& sandbox, LlmBackend& backend) {
  Session session(seed, config, prompts, sandbox, backend);
  return session.run();
}

// ---------------------------------------------------------------------------
// Corpus

std::optional<double> RunReport::acceptance_rate() const {
  if (seeds == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(seeds);
}

std::optional<double> RunReport::session_acceptance_rate() const {
  if (sessions == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(sessions);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CorpusResult run_corpus(const std::vector<SourceUnit>& seeds, const CorpusOptions& options,
                        const PromptLibrary& prompts, const Sandbox& sandbox, LlmBackend& backend) {
  CorpusResult out;
  out.report.started_at = utc_timestamp();
  out.report.seeds = seeds.size();
  out.sessions.resize(seeds.size());

  std::vector<SourceUnit> prepared;
  std::vector<std::size_t> todo;
  prepared.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SourceUnit seed = seeds[i];
    if (seed.annotations().token_count == 0 && !seed.text().empty()) annotate(seed);
    const auto decision = filter_seed(seed, options.filter);
    if (!decision.accepted()) {
      auto& r = out.sessions[i];
      r.id = seed.id();
      r.status = SessionStatus::Rejected;
      r.reject_reason = RejectReason::FilteredOut;
      r.filter_reasons = decision.reasons;
      for (auto reason : decision.reasons) {
        if (!r.detail.empty()) r.detail += ", ";
        r.detail += to_string(reason);
      }
    } else {
      todo.push_back(i);
    }
    prepared.push_back(std::move(seed));
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto worker = [&] {
    while (!stop.load()) {
      const auto k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const auto i = todo[k];
      try {
        out.sessions[i] = translate_seed(prepared[i], options.session, prompts, sandbox, backend);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        stop.store(true);
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.workers, 1)), 1,
                                               std::max<std::size_t>(todo.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  auto& rep = out.report;
  for (const auto& r : out.sessions) {
    rep.rounds_total += static_cast<std::size_t>(r.rounds_used);
    if (r.status == SessionStatus::Accepted) ++rep.accepted;
    if (!r.reject_reason) continue;
    switch (*r.reject_reason) {
      case RejectReason::FilteredOut: ++rep.filtered_out; break;
      case RejectReason::BudgetExhausted: ++rep.budget_exhausted; break;
      case RejectReason::BackendFailure: ++rep.backend_failure; break;
      case RejectReason::VerdictNo: ++rep.verdict_no; break;
    }
  }
  rep.sessions = todo.size();
  rep.finished_at = utc_timestamp();
  return out;
}

nlohmann::ordered_json run_report_json(const CorpusResult& result, const nlohmann::ordered_json& extra,
                               bool include_timestamps) {
  const auto& rep = result.report;
  auto rate = [](std::optional<double> v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  if (include_timestamps) {
    j["started_at"] = rep.started_at;
    j["finished_at"] = rep.finished_at;
  }
  nlohmann::ordered_json filter_counts = nlohmann::ordered_json::object();
  for (auto reason : {FilterReason::TooManyTokens, FilterReason::UndefinedExternal, FilterReason::NotExecutable,
                      FilterReason::EmptyAfterStrip}) {
    std::size_t n = 0;
    for (const auto& r : result.sessions) {
      n += static_cast<std::size_t>(std::count(r.filter_reasons.begin(), r.filter_reasons.end(), reason));
    }
    filter_counts[std::string(to_string(reason))] = n;
  }
  j["counts"] = {
      {"seeds", rep.seeds},
      {"filtered_out", rep.filtered_out},
      {"attempted", rep.sessions},
      {"accepted", rep.accepted},
      {"rejected", {{"BudgetExhausted", rep.budget_exhausted},
                    {"BackendFailure", rep.backend_failure},
                    {"VerdictNo", rep.verdict_no}}},
      {"filter_reasons", filter_counts},
      {"rounds_total", rep.rounds_total},
  };
  j["acceptance_rate"] = rate(rep.acceptance_rate());
  j["session_acceptance_rate"] = rate(rep.session_acceptance_rate());
  for (const auto& [key, value] : extra.items()) j[key] = value;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : result.sessions) {
    nlohmann::ordered_json row;
    row["id"] = r.id;
    row["status"] = to_string(r.status);
    row["reject_reason"] = r.reject_reason ? nlohmann::ordered_json(to_string(*r.reject_reason)) : nullptr;
    row["rounds_used"] = r.rounds_used;
    row["exchanges"] = r.dialogue.messages.size() / 2;
    if (!r.detail.empty()) row["detail"] = r.detail;
    rows.push_back(std::move(row));
  }
  return j;
}

}  // namespace f2c
